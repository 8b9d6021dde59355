#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "veracity/autograd.hpp"
#include "veracity/encoder.hpp"

namespace veracity {

enum class HeadKind { cls, recurrent, conv };

inline std::string_view head_id(HeadKind k) {
  switch (k) {
    case HeadKind::cls: return "cls";
    case HeadKind::recurrent: return "rnn";
    case HeadKind::conv: return "cnn";
  }
  return "";
}

inline HeadKind parse_head(std::string_view s) {
  if (s == "cls") return HeadKind::cls;
  if (s == "rnn" || s == "recurrent" || s == "bilstm") return HeadKind::recurrent;
  if (s == "cnn" || s == "conv") return HeadKind::conv;
  throw Error("unknown head kind: " + std::string(s));
}

struct HeadConfig {
  HeadKind kind = HeadKind::cls;
  int hidden = 0;  // recurrent hidden size; 0 means "same as the encoder dimension"
  std::vector<int> region_sizes = {7, 7, 7, 7};
  int feature_maps = 768;
  double dropout = 0.1;

  // Dropout 0.1 for the pooled-token baseline, 0.5 for the pooling heads.
  static HeadConfig defaults(HeadKind kind) {
    HeadConfig c;
    c.kind = kind;
    c.dropout = kind == HeadKind::cls ? 0.1 : 0.5;
    return c;
  }

  void validate() const {
    if (hidden < 0) throw Error("recurrent hidden size must be positive");
    if (kind == HeadKind::conv) {
      if (region_sizes.empty()) throw Error("conv head needs at least one region size");
      for (int r : region_sizes) {
        if (r < 1) throw Error("conv region sizes must be >= 1");
      }
      if (feature_maps < 1) throw Error("conv head needs at least one feature map");
    }
    if (dropout < 0.0 || dropout >= 1.0) throw Error("head dropout must lie in [0, 1)");
  }

  friend bool operator==(const HeadConfig&, const HeadConfig&) = default;
};

inline void to_json(nlohmann::json& j, const HeadConfig& c) {
  j = nlohmann::json{{"kind", head_id(c.kind)},
                     {"hidden", c.hidden},
                     {"region_sizes", c.region_sizes},
                     {"feature_maps", c.feature_maps},
                     {"dropout", c.dropout}};
}

inline void from_json(const nlohmann::json& j, HeadConfig& c) {
  c.kind = parse_head(j.at("kind").get<std::string>());
  c.hidden = j.at("hidden").get<int>();
  c.region_sizes = j.at("region_sizes").get<std::vector<int>>();
  c.feature_maps = j.at("feature_maps").get<int>();
  c.dropout = j.at("dropout").get<double>();
}

// Size of the sentence representation each head produces.
inline int repr_dim(const HeadConfig& c, int d) {
  switch (c.kind) {
    case HeadKind::cls: return d;
    case HeadKind::recurrent: return 2 * (c.hidden > 0 ? c.hidden : d);
    case HeadKind::conv: return static_cast<int>(c.region_sizes.size()) * c.feature_maps;
  }
  return 0;
}

namespace detail {

inline std::vector<int> valid_positions(const std::vector<bool>& mask) {
  std::vector<int> idx;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i]) idx.push_back(static_cast<int>(i));
  }
  return idx;
}

}  // namespace detail

// Turns the encoder's final layer into one sentence vector.
//   cls:       the sentence-start vector as is.
//   recurrent: BiLSTM over the real positions, forward and backward states
//              concatenated per step, then max over time.
//   conv:      1-D convolutions (one bank of feature_maps filters per region
//              size) with ReLU, max over time per map, concatenated.
class SentenceHead {
 public:
  SentenceHead(HeadConfig config, int d, std::uint64_t seed) : config_(std::move(config)), d_(d) {
    config_.validate();
    if (config_.kind == HeadKind::recurrent && config_.hidden == 0) config_.hidden = d;
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0xBEu};
    std::mt19937_64 rng(seq);
    auto uniform = [&](const std::string& name, Eigen::Index r, Eigen::Index c, double bound) {
      std::uniform_real_distribution<double> u(-bound, bound);
      ag::Matrix m(r, c);
      for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
      return ag::Parameter(name, std::move(m));
    };

    if (config_.kind == HeadKind::recurrent) {
      const int h = config_.hidden;
      const double bound = 1.0 / std::sqrt(static_cast<double>(h));
      for (const char* dir : {"fwd", "bwd"}) {
        const std::string p = std::string("head.lstm.") + dir + ".";
        params_.push_back(uniform(p + "wx", d, 4 * h, bound));
        params_.push_back(uniform(p + "wh", h, 4 * h, bound));
        ag::Matrix bias = ag::Matrix::Zero(1, 4 * h);
        bias.middleCols(h, h).setOnes();  // forget gate starts open
        params_.emplace_back(p + "b", std::move(bias));
      }
    } else if (config_.kind == HeadKind::conv) {
      for (std::size_t i = 0; i < config_.region_sizes.size(); ++i) {
        const int r = config_.region_sizes[i];
        const double bound = 1.0 / std::sqrt(static_cast<double>(r * d));
        const std::string p = "head.conv" + std::to_string(i) + ".";
        params_.push_back(uniform(p + "w", static_cast<Eigen::Index>(r) * d, config_.feature_maps, bound));
        params_.emplace_back(p + "b", ag::Matrix::Zero(1, config_.feature_maps));
      }
    }
  }

  const HeadConfig& config() const { return config_; }
  int input_dim() const { return d_; }
  int output_dim() const { return repr_dim(config_, d_); }

  ag::Var represent(ag::Graph& g, const EncodedSequence& enc) { return run(*this, g, enc); }
  ag::Var represent(ag::Graph& g, const EncodedSequence& enc) const { return run(*this, g, enc); }

  // Evaluation on a materialised encoder output.
  Eigen::RowVectorXd represent(const EncoderOutput& enc) const {
    ag::Graph g;
    Eigen::RowVectorXd pooled = enc.pooled;
    EncodedSequence seq{g.constant(enc.token_vectors), g.constant(pooled), enc.mask};
    return represent(g, seq).value().row(0);
  }

  std::vector<ag::Parameter*> parameters() {
    std::vector<ag::Parameter*> out;
    for (auto& p : params_) out.push_back(&p);
    return out;
  }

 private:
  template <class Self>
  static ag::Var run(Self& self, ag::Graph& g, const EncodedSequence& enc) {
    if (self.config_.kind == HeadKind::cls) return enc.pooled;
    const auto valid = detail::valid_positions(enc.mask);
    if (valid.empty()) throw Error("sentence head: input has no unmasked positions");
    ag::Var x = ag::gather_rows(enc.tokens, valid);
    if (self.config_.kind == HeadKind::recurrent) return recurrent(self, g, x);
    return conv(self, g, x);
  }

  template <class Self>
  static ag::Var lstm_pass(Self& self, ag::Graph& g, ag::Var x, std::size_t first_param, bool reverse,
                           std::vector<ag::Var>& states) {
    using namespace ag;
    const Eigen::Index h = self.config_.hidden;
    const Eigen::Index t = x.rows();
    Var input_proj = matmul(x, g.param(self.params_[first_param]));
    Var wh = g.param(self.params_[first_param + 1]);
    Var bias = g.param(self.params_[first_param + 2]);
    Var hs = g.constant(Matrix::Zero(1, h));
    Var cs = g.constant(Matrix::Zero(1, h));
    states.assign(static_cast<std::size_t>(t), hs);
    for (Eigen::Index step = 0; step < t; ++step) {
      const Eigen::Index pos = reverse ? t - 1 - step : step;
      Var gates = add(add(slice_rows(input_proj, pos, 1), matmul(hs, wh)), bias);
      Var in_gate = sigmoid(slice_cols(gates, 0, h));
      Var forget_gate = sigmoid(slice_cols(gates, h, h));
      Var candidate = tanh(slice_cols(gates, 2 * h, h));
      Var out_gate = sigmoid(slice_cols(gates, 3 * h, h));
      cs = add(cwise_mul(forget_gate, cs), cwise_mul(in_gate, candidate));
      hs = cwise_mul(out_gate, tanh(cs));
      states[static_cast<std::size_t>(pos)] = hs;
    }
    return hs;
  }

  template <class Self>
  static ag::Var recurrent(Self& self, ag::Graph& g, ag::Var x) {
    std::vector<ag::Var> fwd, bwd;
    lstm_pass(self, g, x, 0, false, fwd);
    lstm_pass(self, g, x, 3, true, bwd);
    std::vector<ag::Var> steps;
    steps.reserve(fwd.size());
    for (std::size_t i = 0; i < fwd.size(); ++i) steps.push_back(ag::concat_cols({fwd[i], bwd[i]}));
    return ag::max_over_time(ag::concat_rows(steps));
  }

  template <class Self>
  static ag::Var conv(Self& self, ag::Graph& g, ag::Var x) {
    int widest = 0;
    for (int r : self.config_.region_sizes) widest = std::max(widest, r);
    if (x.rows() < widest) {
      const Eigen::Index missing = widest - x.rows();
      x = ag::pad_rows(x, missing / 2, missing - missing / 2);
    }
    std::vector<ag::Var> pooled;
    for (std::size_t i = 0; i < self.config_.region_sizes.size(); ++i) {
      ag::Var windows = ag::unfold_rows(x, self.config_.region_sizes[i]);
      ag::Var maps = ag::relu(ag::add_row(ag::matmul(windows, g.param(self.params_[2 * i])),
                                          g.param(self.params_[2 * i + 1])));
      pooled.push_back(ag::max_over_time(maps));
    }
    return ag::concat_cols(pooled);
  }

  HeadConfig config_;
  int d_;
  std::vector<ag::Parameter> params_;
};

// Affine output layer over the sentence representation.
class OutputLayer {
 public:
  OutputLayer(int in_dim, int num_classes, std::uint64_t seed) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x0Cu};
    std::mt19937_64 rng(seq);
    std::normal_distribution<double> normal(0.0, 0.02);
    ag::Matrix w(in_dim, num_classes);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = normal(rng);
    weight_ = ag::Parameter("out.w", std::move(w));
    bias_ = ag::Parameter("out.b", ag::Matrix::Zero(1, num_classes));
  }

  int num_classes() const { return static_cast<int>(bias_.value.cols()); }

  // Dropout on the representation is applied only when mode.training().
  ag::Var logits(ag::Graph& g, ag::Var repr, const ForwardMode& mode) {
    return ag::add_row(ag::matmul(ag::dropout(repr, mode.head_dropout, mode.rng), g.param(weight_)), g.param(bias_));
  }
  ag::Var logits(ag::Graph& g, ag::Var repr) const {
    return ag::add_row(ag::matmul(repr, g.param(weight_)), g.param(bias_));
  }

  std::vector<ag::Parameter*> parameters() { return {&weight_, &bias_}; }

  ag::Parameter& weight() { return weight_; }
  ag::Parameter& bias() { return bias_; }

 private:
  ag::Parameter weight_, bias_;
};

struct ClassScores {
  Eigen::RowVectorXd logits;
  Eigen::RowVectorXd probabilities;
};

inline ClassScores classify(const Eigen::RowVectorXd& repr, const OutputLayer& layer) {
  ag::Graph g;
  const ag::Var z = layer.logits(g, g.constant(repr));
  ClassScores out;
  out.logits = z.value().row(0);
  out.probabilities = ag::softmax(out.logits);
  return out;
}

// Argmax with ties going to the lowest index.
inline int predict(const Eigen::RowVectorXd& probabilities) {
  int best = 0;
  for (Eigen::Index i = 1; i < probabilities.size(); ++i) {
    if (probabilities(i) > probabilities(best)) best = static_cast<int>(i);
  }
  return best;
}

inline int predict(const std::vector<double>& probabilities) {
  return predict(Eigen::Map<const Eigen::RowVectorXd>(probabilities.data(),
                                                      static_cast<Eigen::Index>(probabilities.size())));
}

}  // namespace veracity
