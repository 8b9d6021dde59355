#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "veracity/corpus.hpp"

namespace veracity {

// Synthetic rated statements with ordinal structure. Each statement mixes
// noise words with "cue" words drawn around a position on a truthfulness
// axis; a statement of rank c centres its cues at c * cue_spacing, so
// neighbouring ranks share more cues than distant ones.
struct SyntheticConfig {
  std::size_t per_label = 500;
  int min_words = 6;
  int max_words = 14;
  double cue_prob = 0.35;     // chance that a word is a cue rather than noise
  double cue_spacing = 2.0;   // axis distance between adjacent ranks
  double cue_spread = 1.6;    // std-dev of a cue's position around its rank
  int cue_variants = 3;       // distinct words per axis position
  int noise_words = 300;
  std::uint64_t seed = 0;
};

inline std::vector<Statement> synthetic_corpus(const SyntheticConfig& cfg) {
  std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32), 0x5Eu};
  std::mt19937_64 rng(seq);
  const int axis_max = static_cast<int>(std::lround(cfg.cue_spacing * (kNumTruthLabels - 1)));
  std::uniform_int_distribution<int> length(cfg.min_words, cfg.max_words);
  std::uniform_int_distribution<int> noise(0, cfg.noise_words - 1);
  std::uniform_int_distribution<int> variant(0, cfg.cue_variants - 1);
  std::bernoulli_distribution is_cue(cfg.cue_prob);
  std::normal_distribution<double> jitter(0.0, cfg.cue_spread);

  std::vector<Statement> out;
  out.reserve(cfg.per_label * kNumTruthLabels);
  std::size_t next_id = 0;
  for (std::size_t i = 0; i < cfg.per_label; ++i) {
    for (auto label : kAllTruthLabels) {
      const double centre = cfg.cue_spacing * rank(label);
      const int n = length(rng);
      std::string text;
      bool has_cue = false;
      for (int w = 0; w < n; ++w) {
        if (!text.empty()) text += ' ';
        if (is_cue(rng) || (w == n - 1 && !has_cue)) {
          const int pos = std::clamp(static_cast<int>(std::lround(centre + jitter(rng))), 0, axis_max);
          text += "cue" + std::to_string(pos) + "v" + std::to_string(variant(rng));
          has_cue = true;
        } else {
          text += "w" + std::to_string(noise(rng));
        }
      }
      out.push_back(Statement{"syn" + std::to_string(next_id++), std::move(text), label, {}});
    }
  }
  return out;
}

// Writes statements in the input dump format (JSONL).
inline std::string to_jsonl(const std::vector<Statement>& statements) {
  std::string out;
  for (const auto& s : statements) {
    nlohmann::ordered_json rec;
    rec["id"] = s.id;
    rec["statement"] = s.text;
    rec["rating"] = name(s.label);
    for (const auto& [k, v] : s.source_meta) rec[k] = v;
    out += rec.dump();
    out += '\n';
  }
  return out;
}

}  // namespace veracity
