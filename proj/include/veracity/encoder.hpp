#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "veracity/autograd.hpp"
#include "veracity/tokenizer.hpp"

namespace veracity {

// Dropout rates and randomness for one forward pass. A null rng means
// evaluation: dropout is off and repeated passes are bit-identical.
struct ForwardMode {
  std::mt19937_64* rng = nullptr;
  double encoder_dropout = 0.0;
  double head_dropout = 0.0;

  bool training() const { return rng != nullptr; }
  static ForwardMode eval() { return {}; }
};

struct EncoderConfig {
  int d = 32;
  int num_layers = 2;
  int num_heads = 4;
  int ffn_dim = 128;
  int vocab_size = 8192;
  int max_positions = 256;
  std::uint64_t seed = 0;

  friend bool operator==(const EncoderConfig&, const EncoderConfig&) = default;
};

inline void to_json(nlohmann::json& j, const EncoderConfig& c) {
  j = nlohmann::json{{"d", c.d},
                     {"num_layers", c.num_layers},
                     {"num_heads", c.num_heads},
                     {"ffn_dim", c.ffn_dim},
                     {"vocab_size", c.vocab_size},
                     {"max_positions", c.max_positions},
                     {"seed", c.seed}};
}

inline void from_json(const nlohmann::json& j, EncoderConfig& c) {
  c.d = j.at("d").get<int>();
  c.num_layers = j.at("num_layers").get<int>();
  c.num_heads = j.value("num_heads", 1);
  c.ffn_dim = j.value("ffn_dim", 4 * c.d);
  c.vocab_size = j.at("vocab_size").get<int>();
  c.max_positions = j.at("max_positions").get<int>();
  c.seed = j.value("seed", std::uint64_t{0});
}

// Desk-scale stand-in for the pretrained encoder.
inline EncoderConfig toy_config(int d, int num_layers, std::uint64_t seed) {
  if (d < 8) throw Error("toy encoder needs d >= 8");
  if (num_layers < 1) throw Error("toy encoder needs at least one layer");
  EncoderConfig c;
  c.d = d;
  c.num_layers = num_layers;
  c.num_heads = d % 4 == 0 ? 4 : (d % 2 == 0 ? 2 : 1);
  c.ffn_dim = 4 * d;
  c.vocab_size = 8192;
  c.max_positions = 256;
  c.seed = seed;
  return c;
}

// Shape of the 12-layer, 768-dimensional pretrained encoder.
inline EncoderConfig reference_config() {
  EncoderConfig c;
  c.d = 768;
  c.num_layers = 12;
  c.num_heads = 12;
  c.ffn_dim = 3072;
  c.vocab_size = 30522;
  c.max_positions = 512;
  return c;
}

struct EncoderOutput {
  ag::Matrix token_vectors;       // T x d, final layer
  Eigen::RowVectorXd pooled;      // final-layer vector at the sentence-start position
  std::vector<bool> mask;
};

// Graph-level form of EncoderOutput, used while training.
struct EncodedSequence {
  ag::Var tokens;
  ag::Var pooled;
  std::vector<bool> mask;
};

// Post-norm transformer: token + position embeddings, then self-attention and
// feed-forward sublayers, each wrapped in residual + layer norm. Padding
// positions never act as attention keys, so the vectors at real positions do
// not depend on how much padding follows them.
class TransformerEncoder {
 public:
  explicit TransformerEncoder(EncoderConfig config) : config_(config), tokenizer_(config.vocab_size) {
    if (config_.d % config_.num_heads != 0) throw Error("d must be divisible by num_heads");
    std::seed_seq seq{static_cast<std::uint32_t>(config_.seed), static_cast<std::uint32_t>(config_.seed >> 32), 0xE1u};
    std::mt19937_64 rng(seq);
    std::normal_distribution<double> normal(0.0, 0.02);
    auto init = [&](const std::string& name, Eigen::Index r, Eigen::Index c) {
      ag::Matrix m(r, c);
      for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
      return ag::Parameter(name, std::move(m));
    };
    auto zeros = [](const std::string& name, Eigen::Index c) { return ag::Parameter(name, ag::Matrix::Zero(1, c)); };
    auto ones = [](const std::string& name, Eigen::Index c) { return ag::Parameter(name, ag::Matrix::Ones(1, c)); };

    const int d = config_.d;
    token_embedding_ = init("enc.token_embedding", config_.vocab_size, d);
    position_embedding_ = init("enc.position_embedding", config_.max_positions, d);
    embed_norm_gain_ = ones("enc.embed_norm.gain", d);
    embed_norm_bias_ = zeros("enc.embed_norm.bias", d);
    for (int l = 0; l < config_.num_layers; ++l) {
      const std::string p = "enc.layer" + std::to_string(l) + ".";
      Layer layer;
      layer.wq = init(p + "wq", d, d);
      layer.bq = zeros(p + "bq", d);
      layer.wk = init(p + "wk", d, d);
      layer.bk = zeros(p + "bk", d);
      layer.wv = init(p + "wv", d, d);
      layer.bv = zeros(p + "bv", d);
      layer.wo = init(p + "wo", d, d);
      layer.bo = zeros(p + "bo", d);
      layer.attn_norm_gain = ones(p + "attn_norm.gain", d);
      layer.attn_norm_bias = zeros(p + "attn_norm.bias", d);
      layer.w1 = init(p + "w1", d, config_.ffn_dim);
      layer.b1 = zeros(p + "b1", config_.ffn_dim);
      layer.w2 = init(p + "w2", config_.ffn_dim, d);
      layer.b2 = zeros(p + "b2", d);
      layer.ffn_norm_gain = ones(p + "ffn_norm.gain", d);
      layer.ffn_norm_bias = zeros(p + "ffn_norm.bias", d);
      layers_.push_back(std::move(layer));
    }
  }

  const EncoderConfig& config() const { return config_; }
  int dim() const { return config_.d; }
  const HashTokenizer& tokenizer() const { return tokenizer_; }

  TokenizedInput tokenize(std::string_view text, int max_len = kDefaultMaxLen) const {
    return tokenizer_.tokenize(text, std::min(max_len, config_.max_positions));
  }

  // Trainable pass: gradients flow into this encoder's parameters.
  EncodedSequence encode(ag::Graph& g, const TokenizedInput& input, const ForwardMode& mode) {
    return run(*this, g, input, mode);
  }

  // Frozen pass; safe to call concurrently.
  EncodedSequence encode(ag::Graph& g, const TokenizedInput& input, const ForwardMode& mode) const {
    return run(*this, g, input, mode);
  }

  EncoderOutput encode(const TokenizedInput& input) const {
    ag::Graph g;
    const auto seq = encode(g, input, ForwardMode::eval());
    return EncoderOutput{seq.tokens.value(), seq.pooled.value().row(0), seq.mask};
  }

  std::vector<ag::Parameter*> parameters() {
    std::vector<ag::Parameter*> out = {&token_embedding_, &position_embedding_, &embed_norm_gain_, &embed_norm_bias_};
    for (auto& l : layers_) {
      for (auto* p : {&l.wq, &l.bq, &l.wk, &l.bk, &l.wv, &l.bv, &l.wo, &l.bo, &l.attn_norm_gain,
                      &l.attn_norm_bias, &l.w1, &l.b1, &l.w2, &l.b2, &l.ffn_norm_gain, &l.ffn_norm_bias}) {
        out.push_back(p);
      }
    }
    return out;
  }

 private:
  struct Layer {
    ag::Parameter wq, bq, wk, bk, wv, bv, wo, bo;
    ag::Parameter attn_norm_gain, attn_norm_bias;
    ag::Parameter w1, b1, w2, b2;
    ag::Parameter ffn_norm_gain, ffn_norm_bias;
  };

  // Self is TransformerEncoder or const TransformerEncoder; the constness
  // picks whether Graph::param tracks gradients.
  template <class Self>
  static EncodedSequence run(Self& self, ag::Graph& g, const TokenizedInput& input, const ForwardMode& mode) {
    using namespace ag;
    const auto t = static_cast<int>(input.token_ids.size());
    if (t == 0) throw Error("encode: empty input");
    if (input.mask.size() != input.token_ids.size()) throw Error("encode: mask length mismatch");
    if (!input.mask[0]) throw Error("encode: position 0 must be the sentence-start token");
    if (t > self.config_.max_positions) {
      throw Error("encode: input length " + std::to_string(t) + " exceeds positional capacity " +
                  std::to_string(self.config_.max_positions));
    }
    const double rate = mode.encoder_dropout;
    std::vector<int> positions(static_cast<std::size_t>(t));
    for (int i = 0; i < t; ++i) positions[static_cast<std::size_t>(i)] = i;

    Var x = add(gather_rows(g.param(self.token_embedding_), input.token_ids),
                gather_rows(g.param(self.position_embedding_), positions));
    x = layer_norm(x, g.param(self.embed_norm_gain_), g.param(self.embed_norm_bias_));
    x = dropout(x, rate, mode.rng);

    const int heads = self.config_.num_heads;
    const int head_dim = self.config_.d / heads;
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(head_dim));
    for (auto& layer : self.layers_) {
      Var q = add_row(matmul(x, g.param(layer.wq)), g.param(layer.bq));
      Var k = add_row(matmul(x, g.param(layer.wk)), g.param(layer.bk));
      Var v = add_row(matmul(x, g.param(layer.wv)), g.param(layer.bv));
      std::vector<Var> per_head;
      per_head.reserve(static_cast<std::size_t>(heads));
      for (int h = 0; h < heads; ++h) {
        Var qh = slice_cols(q, h * head_dim, head_dim);
        Var kh = slice_cols(k, h * head_dim, head_dim);
        Var vh = slice_cols(v, h * head_dim, head_dim);
        Var scores = scale(matmul(qh, transpose(kh)), inv_sqrt);
        Var attn = dropout(masked_softmax_rows(scores, input.mask), rate, mode.rng);
        per_head.push_back(matmul(attn, vh));
      }
      Var attended = add_row(matmul(concat_cols(per_head), g.param(layer.wo)), g.param(layer.bo));
      x = layer_norm(add(x, dropout(attended, rate, mode.rng)), g.param(layer.attn_norm_gain),
                     g.param(layer.attn_norm_bias));
      Var hidden = gelu(add_row(matmul(x, g.param(layer.w1)), g.param(layer.b1)));
      Var ffn = add_row(matmul(hidden, g.param(layer.w2)), g.param(layer.b2));
      x = layer_norm(add(x, dropout(ffn, rate, mode.rng)), g.param(layer.ffn_norm_gain),
                     g.param(layer.ffn_norm_bias));
    }
    return EncodedSequence{x, slice_rows(x, 0, 1), input.mask};
  }

  EncoderConfig config_;
  HashTokenizer tokenizer_;
  ag::Parameter token_embedding_, position_embedding_;
  ag::Parameter embed_norm_gain_, embed_norm_bias_;
  std::vector<Layer> layers_;
};

}  // namespace veracity
