#pragma once

#include <array>
#include <cctype>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "veracity/error.hpp"

namespace veracity {

// The six-level truthfulness meter. Rank grows with truthfulness, so the
// absolute difference of two ranks is their ordinal distance.
enum class TruthLabel : int {
  pants_fire = 0,
  false_ = 1,
  mostly_false = 2,
  half_true = 3,
  mostly_true = 4,
  true_ = 5,
};

inline constexpr int kNumTruthLabels = 6;

inline constexpr std::array<TruthLabel, kNumTruthLabels> kAllTruthLabels = {
    TruthLabel::pants_fire, TruthLabel::false_,      TruthLabel::mostly_false,
    TruthLabel::half_true,  TruthLabel::mostly_true, TruthLabel::true_,
};

inline constexpr int rank(TruthLabel label) { return static_cast<int>(label); }

inline TruthLabel label_from_rank(int r) {
  if (r < 0 || r >= kNumTruthLabels) {
    throw DomainError("truth label rank out of range: " + std::to_string(r));
  }
  return static_cast<TruthLabel>(r);
}

inline std::string_view name(TruthLabel label) {
  static constexpr std::array<std::string_view, kNumTruthLabels> names = {
      "pants-fire", "false", "mostly-false", "half-true", "mostly-true", "true"};
  return names[static_cast<std::size_t>(rank(label))];
}

// Accepts the canonical names and the usual spellings found in fact-check
// dumps ("Pants on Fire!", "half_true", "Mostly False", ...). Matching ignores
// case and anything that is not a letter. "barely-true" is the pre-2011 name
// of mostly-false.
inline std::optional<TruthLabel> parse_rating(std::string_view rating) {
  std::string key;
  key.reserve(rating.size());
  for (unsigned char c : rating) {
    if (std::isalpha(c)) key.push_back(static_cast<char>(std::tolower(c)));
  }
  if (key == "pantsonfire" || key == "pantsfire") return TruthLabel::pants_fire;
  if (key == "false") return TruthLabel::false_;
  if (key == "mostlyfalse" || key == "barelytrue") return TruthLabel::mostly_false;
  if (key == "halftrue") return TruthLabel::half_true;
  if (key == "mostlytrue") return TruthLabel::mostly_true;
  if (key == "true") return TruthLabel::true_;
  return std::nullopt;
}

// A projection of the meter onto ordered classes. search_binary is the
// top-three versus bottom-three split used only for hyperparameter search.
enum class RegimeKind { fine, coarse, binary, search_binary };

class Regime {
 public:
  constexpr Regime() = default;
  constexpr explicit Regime(RegimeKind kind) : kind_(kind) {}

  static constexpr Regime fine() { return Regime(RegimeKind::fine); }
  static constexpr Regime coarse() { return Regime(RegimeKind::coarse); }
  static constexpr Regime binary() { return Regime(RegimeKind::binary); }
  static constexpr Regime search_binary() { return Regime(RegimeKind::search_binary); }

  constexpr RegimeKind kind() const { return kind_; }

  constexpr int num_classes() const {
    switch (kind_) {
      case RegimeKind::fine: return 6;
      case RegimeKind::coarse: return 3;
      case RegimeKind::binary: return 2;
      case RegimeKind::search_binary: return 2;
    }
    return 0;
  }

  std::vector<std::string> class_names() const {
    switch (kind_) {
      case RegimeKind::fine: {
        std::vector<std::string> out;
        for (auto l : kAllTruthLabels) out.emplace_back(name(l));
        return out;
      }
      case RegimeKind::coarse: return {"false", "neutral", "true"};
      case RegimeKind::binary: return {"false", "true"};
      case RegimeKind::search_binary: return {"more-false", "more-true"};
    }
    return {};
  }

  std::string_view id() const {
    switch (kind_) {
      case RegimeKind::fine: return "fine";
      case RegimeKind::coarse: return "coarse";
      case RegimeKind::binary: return "binary";
      case RegimeKind::search_binary: return "search_binary";
    }
    return "";
  }

  // Whether the label survives the regime's pre-balancing filter.
  constexpr bool admits(TruthLabel label) const {
    if (kind_ != RegimeKind::binary) return true;
    return label != TruthLabel::half_true && label != TruthLabel::mostly_false;
  }

  friend constexpr bool operator==(Regime a, Regime b) { return a.kind_ == b.kind_; }

 private:
  RegimeKind kind_ = RegimeKind::fine;
};

inline Regime parse_regime(std::string_view s) {
  if (s == "fine") return Regime::fine();
  if (s == "coarse") return Regime::coarse();
  if (s == "binary") return Regime::binary();
  if (s == "search_binary" || s == "search-binary") return Regime::search_binary();
  throw DomainError("unknown regime: " + std::string(s));
}

// Class index of a label under a regime. Higher index means more truthful.
// Throws DomainError for neutral-band labels under the binary regime; callers
// filter those out first (see Regime::admits).
inline int map_label(TruthLabel label, Regime regime) {
  const int r = rank(label);
  switch (regime.kind()) {
    case RegimeKind::fine: return r;
    case RegimeKind::coarse: return r / 2;
    case RegimeKind::binary:
      if (!regime.admits(label)) {
        throw DomainError("label '" + std::string(name(label)) +
                          "' has no class in the binary regime; filter neutral labels first");
      }
      return r <= 1 ? 0 : 1;
    case RegimeKind::search_binary: return r <= 2 ? 0 : 1;
  }
  throw DomainError("unhandled regime");
}

}  // namespace veracity
