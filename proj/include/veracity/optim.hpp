#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "veracity/autograd.hpp"

namespace veracity {

// Linear warmup over the first warmup_fraction of steps, then linear decay to
// zero at total_steps.
inline double scheduled_lr(double peak, std::size_t step, std::size_t total_steps, double warmup_fraction) {
  if (total_steps == 0) return peak;
  const double warmup = std::floor(warmup_fraction * static_cast<double>(total_steps));
  const double s = static_cast<double>(step);
  if (warmup > 0.0 && s < warmup) return peak * (s + 1.0) / warmup;
  const double remaining = static_cast<double>(total_steps) - warmup;
  if (remaining <= 0.0) return peak;
  return peak * std::max(0.0, (static_cast<double>(total_steps) - s) / remaining);
}

// Rescales all gradients so their joint L2 norm is at most max_norm. Returns
// the norm before clipping.
inline double clip_grad_norm(const std::vector<ag::Parameter*>& params, double max_norm) {
  double sq = 0.0;
  for (const auto* p : params) sq += p->grad.squaredNorm();
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double s = max_norm / (norm + 1e-6);
    for (auto* p : params) p->grad *= s;
  }
  return norm;
}

class Adam {
 public:
  explicit Adam(std::vector<ag::Parameter*> params, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (const auto* p : params_) {
      m_.push_back(ag::Matrix::Zero(p->value.rows(), p->value.cols()));
      v_.push_back(ag::Matrix::Zero(p->value.rows(), p->value.cols()));
    }
  }

  void step(double lr) {
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
      auto& p = *params_[i];
      m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * p.grad;
      v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * p.grad.cwiseAbs2();
      p.value.array() -= lr * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + eps_);
    }
  }

  void zero_grad() {
    for (auto* p : params_) p->zero_grad();
  }

  const std::vector<ag::Parameter*>& parameters() const { return params_; }

 private:
  std::vector<ag::Parameter*> params_;
  std::vector<ag::Matrix> m_, v_;
  double beta1_, beta2_, eps_;
  std::size_t t_ = 0;
};

}  // namespace veracity
