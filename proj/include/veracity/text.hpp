#pragma once

#include <string>
#include <string_view>

#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>
#include <unicode/ustring.h>

#include "veracity/error.hpp"

namespace veracity {

inline bool is_valid_utf8(std::string_view bytes) {
  UErrorCode status = U_ZERO_ERROR;
  int32_t needed = 0;
  u_strFromUTF8(nullptr, 0, &needed, bytes.data(), static_cast<int32_t>(bytes.size()), &status);
  return status == U_BUFFER_OVERFLOW_ERROR || status == U_STRING_NOT_TERMINATED_WARNING ||
         U_SUCCESS(status);
}

namespace detail {

inline bool is_quote(UChar32 c) {
  switch (c) {
    case U'"': case U'\'': case 0x201C: case 0x201D: case 0x2018: case 0x2019:
    case 0x00AB: case 0x00BB: case 0x201E: case 0x201F:
      return true;
    default:
      return false;
  }
}

}  // namespace detail

// NFC, internal whitespace collapsed to single spaces, surrounding
// whitespace and quote marks stripped. Input must be valid UTF-8.
inline std::string normalize_text(std::string_view raw) {
  if (!is_valid_utf8(raw)) throw CorpusError("text is not valid UTF-8");

  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* nfc = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status)) throw Error("ICU NFC normalizer unavailable");
  icu::UnicodeString text = nfc->normalize(
      icu::UnicodeString::fromUTF8(icu::StringPiece(raw.data(), static_cast<int32_t>(raw.size()))),
      status);
  if (U_FAILURE(status)) throw CorpusError("NFC normalization failed");

  icu::UnicodeString collapsed;
  bool pending_space = false;
  for (int32_t i = 0; i < text.length();) {
    const UChar32 c = text.char32At(i);
    i += U16_LENGTH(c);
    if (u_isUWhiteSpace(c)) {
      pending_space = !collapsed.isEmpty();
      continue;
    }
    if (pending_space) collapsed.append(static_cast<UChar>(u' '));
    pending_space = false;
    collapsed.append(c);
  }

  int32_t begin = 0;
  int32_t end = collapsed.length();
  for (;;) {
    bool changed = false;
    while (begin < end && u_isUWhiteSpace(collapsed.char32At(begin))) { ++begin; changed = true; }
    while (end > begin && u_isUWhiteSpace(collapsed.char32At(end - 1))) { --end; changed = true; }
    if (begin < end && detail::is_quote(collapsed.char32At(begin))) {
      begin += U16_LENGTH(collapsed.char32At(begin));
      changed = true;
    }
    if (end > begin && detail::is_quote(collapsed.char32At(end - 1))) {
      --end;
      changed = true;
    }
    if (!changed) break;
  }

  std::string out;
  collapsed.tempSubStringBetween(begin, end).toUTF8String(out);
  return out;
}

}  // namespace veracity
