#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "tmprompt/error.hpp"
#include "tmprompt/unicode.hpp"

namespace tmprompt {

namespace detail {

// Punctuation allowed inside a word when surrounded by non-punctuation
// (e.g. "don't", "state-of", "U.S", "and/or").
inline bool is_word_joiner(char32_t cp) {
  switch (cp) {
    case U'-':
    case U'\'':
    case U'.':
    case U'@':
    case U'&':
    case U'_':
    case U'/':
    case 0x00B7:  // middle dot
    case 0x2010:  // hyphen
    case 0x2011:  // non-breaking hyphen
    case 0x2019:  // right single quotation mark
      return true;
    default:
      return false;
  }
}

inline bool is_digit_separator(char32_t cp) {
  return cp == U',' || cp == U'.' || cp == U':';
}

inline void tokenize_chunk(std::u32string_view chunk, Tokens& out) {
  const std::size_t n = chunk.size();
  std::vector<bool> punct(n);
  for (std::size_t i = 0; i < n; ++i) punct[i] = unicode::is_punct(chunk[i]);

  std::vector<bool> attached(n, false);
  for (std::size_t i = 1; i + 1 < n; ++i) {
    if (!punct[i] || punct[i - 1] || punct[i + 1]) continue;
    const char32_t prev = chunk[i - 1];
    const char32_t next = chunk[i + 1];
    if (is_word_joiner(chunk[i]) ||
        (is_digit_separator(chunk[i]) && unicode::is_ascii_digit(prev) &&
         unicode::is_ascii_digit(next))) {
      attached[i] = true;
    }
  }
  // BPE continuation marker: "voll@@".
  if (n > 2 && chunk[n - 1] == U'@' && chunk[n - 2] == U'@' && !punct[n - 3]) {
    attached[n - 1] = attached[n - 2] = true;
  }

  std::u32string word;
  for (std::size_t i = 0; i < n; ++i) {
    if (!punct[i] || attached[i]) {
      word.push_back(chunk[i]);
      continue;
    }
    if (!word.empty()) {
      out.push_back(unicode::encode(word));
      word.clear();
    }
    out.push_back(unicode::encode(std::u32string_view(&chunk[i], 1)));
  }
  if (!word.empty()) out.push_back(unicode::encode(word));
}

}  // namespace detail

/// Rule tokenizer: splits on whitespace, then separates punctuation marks
/// (Unicode category P*) into single-codepoint tokens. Punctuation between
/// two word characters is kept for a small set of joiners (apostrophe,
/// hyphen, period, slash...) and for digit groupings such as "1,325".
/// A trailing BPE marker "@@" stays attached to its word.
///
/// The language code is accepted for interface stability; the rules are
/// currently language-independent.
inline Tokens tokenize(std::string_view text, std::string_view /*lang*/ = {}) {
  Tokens out;
  const std::u32string cps = unicode::decode(text);
  std::size_t i = 0;
  while (i < cps.size()) {
    while (i < cps.size() && unicode::is_space(cps[i])) ++i;
    std::size_t j = i;
    while (j < cps.size() && !unicode::is_space(cps[j])) ++j;
    if (j > i) {
      detail::tokenize_chunk(std::u32string_view(cps).substr(i, j - i), out);
    }
    i = j;
  }
  return out;
}

/// Decimal digits with optional "." or "," group separators ("2000",
/// "1,325", "3.5").
inline bool is_number_token(std::string_view token) {
  if (token.empty()) return false;
  bool need_digit = true;
  for (char c : token) {
    if (c >= '0' && c <= '9') {
      need_digit = false;
    } else if ((c == '.' || c == ',') && !need_digit) {
      need_digit = true;
    } else {
      return false;
    }
  }
  return !need_digit;
}

inline bool is_punct_token(std::string_view token) {
  return unicode::is_all_punct(token);
}

/// Retrieval form: drops pure punctuation and pure number tokens and
/// lowercases the rest, preserving order.
inline Tokens normalize_for_retrieval(const Tokens& tokens) {
  Tokens out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) {
    if (is_punct_token(t) || is_number_token(t)) continue;
    out.push_back(unicode::to_lower(t));
  }
  return out;
}

inline std::string join(const Tokens& tokens, std::string_view sep = " ") {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += sep;
    out += tokens[i];
  }
  return out;
}

// Splits on single spaces without any punctuation handling; the inverse of
// join() for whitespace-free tokens.
inline Tokens split_spaces(std::string_view text) {
  Tokens out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && text[i] == ' ') ++i;
    std::size_t j = i;
    while (j < text.size() && text[j] != ' ') ++j;
    if (j > i) out.emplace_back(text.substr(i, j - i));
    i = j;
  }
  return out;
}

}  // namespace tmprompt
