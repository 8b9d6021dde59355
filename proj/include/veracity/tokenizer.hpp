#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <unicode/uchar.h>
#include <unicode/locid.h>
#include <unicode/unistr.h>

#include "veracity/error.hpp"

namespace veracity {

inline constexpr int kPadId = 0;
inline constexpr int kStartId = 1;  // sentence-start; its final-layer vector is the pooled output
inline constexpr int kSepId = 2;
inline constexpr int kFirstWordId = 3;
inline constexpr int kDefaultMaxLen = 128;

struct TokenizedInput {
  std::vector<int> token_ids;
  std::vector<bool> mask;  // true = real token

  std::size_t size() const { return token_ids.size(); }
  std::size_t valid_count() const {
    std::size_t n = 0;
    for (bool m : mask) n += m ? 1 : 0;
    return n;
  }
  friend bool operator==(const TokenizedInput&, const TokenizedInput&) = default;
};

// Lowercased word pieces: maximal runs of letters/digits, and every other
// non-space code point on its own.
inline std::vector<std::string> split_words(std::string_view text) {
  icu::UnicodeString u = icu::UnicodeString::fromUTF8(
      icu::StringPiece(text.data(), static_cast<int32_t>(text.size())));
  u.toLower(icu::Locale::getRoot());
  std::vector<std::string> out;
  icu::UnicodeString current;
  auto flush = [&] {
    if (current.isEmpty()) return;
    std::string s;
    current.toUTF8String(s);
    out.push_back(std::move(s));
    current.remove();
  };
  for (int32_t i = 0; i < u.length();) {
    const UChar32 c = u.char32At(i);
    i += U16_LENGTH(c);
    if (u_isUWhiteSpace(c)) {
      flush();
    } else if (u_isalnum(c)) {
      current.append(c);
    } else {
      flush();
      current.append(c);
      flush();
    }
  }
  flush();
  return out;
}

// Hashing word tokenizer: ids are FNV-1a buckets, so no vocabulary file is
// needed and the mapping is stable across runs and platforms.
class HashTokenizer {
 public:
  explicit HashTokenizer(int vocab_size) : vocab_size_(vocab_size) {
    if (vocab_size <= kFirstWordId) throw Error("vocabulary too small for the special tokens");
  }

  int vocab_size() const { return vocab_size_; }

  int word_id(std::string_view word) const {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : word) {
      h ^= c;
      h *= 1099511628211ULL;
    }
    return kFirstWordId + static_cast<int>(h % static_cast<std::uint64_t>(vocab_size_ - kFirstWordId));
  }

  // [start] w1 ... wn [sep], truncated to max_len including both specials.
  TokenizedInput tokenize(std::string_view text, int max_len = kDefaultMaxLen) const {
    if (max_len < 2) throw Error("max_len must leave room for the two special tokens");
    const auto words = split_words(text);
    const std::size_t room = static_cast<std::size_t>(max_len - 2);
    TokenizedInput out;
    out.token_ids.push_back(kStartId);
    for (std::size_t i = 0; i < words.size() && i < room; ++i) out.token_ids.push_back(word_id(words[i]));
    out.token_ids.push_back(kSepId);
    out.mask.assign(out.token_ids.size(), true);
    return out;
  }

 private:
  int vocab_size_;
};

// Appends `extra` padding positions.
inline TokenizedInput pad(TokenizedInput in, std::size_t extra) {
  in.token_ids.insert(in.token_ids.end(), extra, kPadId);
  in.mask.insert(in.mask.end(), extra, false);
  return in;
}

}  // namespace veracity
