#pragma once

// Test-only re-implementations of the pooling heads, driven by the head's
// own parameter values.

#include <algorithm>
#include <cmath>
#include <vector>

#include "veracity/heads.hpp"

namespace oracle {

using veracity::ag::Matrix;
using veracity::EncoderOutput;
using veracity::SentenceHead;

inline double sigm(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Independent LSTM over the rows of x (gate order: input, forget, cell, output).
inline std::vector<Eigen::RowVectorXd> lstm_states(const Matrix& x, const Matrix& wx, const Matrix& wh, const Matrix& b,
                                            bool reverse) {
  const Eigen::Index h = wh.rows();
  std::vector<Eigen::RowVectorXd> out(static_cast<std::size_t>(x.rows()));
  Eigen::RowVectorXd hs = Eigen::RowVectorXd::Zero(h), cs = Eigen::RowVectorXd::Zero(h);
  for (Eigen::Index s = 0; s < x.rows(); ++s) {
    const Eigen::Index t = reverse ? x.rows() - 1 - s : s;
    const Eigen::RowVectorXd z = x.row(t) * wx + hs * wh + b;
    for (Eigen::Index j = 0; j < h; ++j) {
      const double i = sigm(z(j)), f = sigm(z(h + j)), g = std::tanh(z(2 * h + j)), o = sigm(z(3 * h + j));
      cs(j) = f * cs(j) + i * g;
      hs(j) = o * std::tanh(cs(j));
    }
    out[static_cast<std::size_t>(t)] = hs;
  }
  return out;
}

// Concatenated forward/backward states for the unmasked rows of `enc`.
inline Matrix oracle_bilstm_states(SentenceHead& head, const EncoderOutput& enc) {
  auto p = head.parameters();
  std::vector<int> rows;
  for (std::size_t i = 0; i < enc.mask.size(); ++i) {
    if (enc.mask[i]) rows.push_back(static_cast<int>(i));
  }
  Matrix x(static_cast<Eigen::Index>(rows.size()), enc.token_vectors.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) x.row(static_cast<Eigen::Index>(i)) = enc.token_vectors.row(rows[i]);
  const auto f = lstm_states(x, p[0]->value, p[1]->value, p[2]->value, false);
  const auto b = lstm_states(x, p[3]->value, p[4]->value, p[5]->value, true);
  const Eigen::Index h = p[1]->value.rows();
  Matrix out(x.rows(), 2 * h);
  for (Eigen::Index t = 0; t < x.rows(); ++t) out.row(t) << f[static_cast<std::size_t>(t)], b[static_cast<std::size_t>(t)];
  return out;
}

// Independent convolution: feature map values for each region bank.
inline std::vector<Matrix> oracle_feature_maps(SentenceHead& head, const Matrix& x_valid) {
  const auto& cfg = head.config();
  auto p = head.parameters();
  int widest = *std::max_element(cfg.region_sizes.begin(), cfg.region_sizes.end());
  Matrix x = x_valid;
  if (x.rows() < widest) {
    const Eigen::Index missing = widest - x.rows();
    Matrix padded = Matrix::Zero(widest, x.cols());
    padded.middleRows(missing / 2, x.rows()) = x;
    x = padded;
  }
  std::vector<Matrix> maps;
  for (std::size_t r = 0; r < cfg.region_sizes.size(); ++r) {
    const int width = cfg.region_sizes[r];
    const Matrix& w = p[2 * r]->value;
    const Matrix& b = p[2 * r + 1]->value;
    Matrix m(x.rows() - width + 1, cfg.feature_maps);
    for (Eigen::Index t = 0; t < m.rows(); ++t) {
      for (int f = 0; f < cfg.feature_maps; ++f) {
        double acc = b(0, f);
        for (int j = 0; j < width; ++j) {
          for (Eigen::Index c = 0; c < x.cols(); ++c) acc += x(t + j, c) * w(j * x.cols() + c, f);
        }
        m(t, f) = std::max(0.0, acc);
      }
    }
    maps.push_back(m);
  }
  return maps;
}

}  // namespace oracle
