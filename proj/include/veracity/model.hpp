#pragma once

#include <cstdint>
#include <vector>

#include "veracity/encoder.hpp"
#include "veracity/heads.hpp"

namespace veracity {

// Encoder + sentence head + output layer, trained jointly.
class Classifier {
 public:
  Classifier(TransformerEncoder encoder, const HeadConfig& head, int num_classes, std::uint64_t seed)
      : encoder_(std::move(encoder)),
        head_(head, encoder_.dim(), seed),
        output_(head_.output_dim(), num_classes, seed) {}

  TransformerEncoder& encoder() { return encoder_; }
  const TransformerEncoder& encoder() const { return encoder_; }
  SentenceHead& head() { return head_; }
  const SentenceHead& head() const { return head_; }
  OutputLayer& output() { return output_; }
  int num_classes() const { return output_.num_classes(); }

  ag::Var logits(ag::Graph& g, const TokenizedInput& input, const ForwardMode& mode) {
    const auto enc = encoder_.encode(g, input, mode);
    return output_.logits(g, head_.represent(g, enc), mode);
  }

  ag::Var logits(ag::Graph& g, const TokenizedInput& input) const {
    const auto enc = encoder_.encode(g, input, ForwardMode::eval());
    return output_.logits(g, head_.represent(g, enc));
  }

  Eigen::RowVectorXd probabilities(const TokenizedInput& input) const {
    ag::Graph g;
    return ag::softmax(logits(g, input).value().row(0));
  }

  std::vector<ag::Parameter*> parameters() {
    auto out = encoder_.parameters();
    for (auto* p : head_.parameters()) out.push_back(p);
    for (auto* p : output_.parameters()) out.push_back(p);
    return out;
  }

 private:
  TransformerEncoder encoder_;
  SentenceHead head_;
  OutputLayer output_;
};

}  // namespace veracity
