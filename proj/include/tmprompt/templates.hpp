#pragma once

#include <array>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>

#include "tmprompt/error.hpp"
#include "tmprompt/tokenize.hpp"

namespace tmprompt {

enum class TemplateKind {
  Directly,
  Comma,
  Semicolon,
  Conjunction,
  Parenthesis,
  Fragment,
};

inline constexpr std::array<TemplateKind, 5> kSentenceTemplates = {
    TemplateKind::Directly, TemplateKind::Comma, TemplateKind::Semicolon,
    TemplateKind::Conjunction, TemplateKind::Parenthesis};

inline constexpr std::array<TemplateKind, 6> kAllTemplates = {
    TemplateKind::Directly,    TemplateKind::Comma,
    TemplateKind::Semicolon,   TemplateKind::Conjunction,
    TemplateKind::Parenthesis, TemplateKind::Fragment};

inline std::string_view to_string(TemplateKind kind) {
  switch (kind) {
    case TemplateKind::Directly:
      return "directly";
    case TemplateKind::Comma:
      return "comma";
    case TemplateKind::Semicolon:
      return "semicolon";
    case TemplateKind::Conjunction:
      return "conjunction";
    case TemplateKind::Parenthesis:
      return "parenthesis";
    case TemplateKind::Fragment:
      return "fragment";
  }
  return "?";
}

inline std::optional<TemplateKind> parse_template(std::string_view name) {
  for (auto kind : kAllTemplates) {
    if (to_string(kind) == name) return kind;
  }
  return std::nullopt;
}

inline bool is_sentence_level(TemplateKind kind) {
  return kind != TemplateKind::Fragment;
}

/// Encoder input (TM side + template, then the input sentence) and the
/// decoder prefix to be generated with probability 1. The decoder owns
/// the begin-of-sentence marker, so it is not part of forced_prefix.
struct PromptedPair {
  Tokens encoder_tokens;
  Tokens forced_prefix;
  TemplateKind kind = TemplateKind::Directly;

  friend bool operator==(const PromptedPair&, const PromptedPair&) = default;
};

struct Conjunction {
  std::string word;
  std::string comma;

  friend bool operator==(const Conjunction&, const Conjunction&) = default;
};

// Language code -> conjunction with juxtaposed meaning, plus the comma
// that follows it.
class ConjunctionTable {
 public:
  static ConjunctionTable defaults() {
    ConjunctionTable t;
    t.set("en", {"And", ","});
    t.set("de", {"Und", ","});
    t.set("fr", {"Et", ","});
    t.set("es", {"Y", ","});
    t.set("zh", {"并且", "，"});
    return t;
  }

  void set(std::string lang, Conjunction c) {
    table_[std::move(lang)] = std::move(c);
  }

  const Conjunction& at(const std::string& lang) const {
    auto it = table_.find(lang);
    if (it == table_.end()) {
      throw InvalidArgument("no conjunction configured for language '" +
                            lang + "'");
    }
    return it->second;
  }

  bool contains(const std::string& lang) const {
    return table_.count(lang) != 0;
  }

  /// Overlays entries from a key-value file; one `lang = word comma` per
  /// line, `#` starts a comment.
  void load_overrides(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open conjunction table '" + path + "'");
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (auto hash = line.find('#'); hash != std::string::npos) {
        line.erase(hash);
      }
      const auto eq = line.find('=');
      Tokens key = split_spaces(line.substr(0, eq));
      if (eq == std::string::npos) {
        if (key.empty()) continue;
        throw FormatError(path + ":" + std::to_string(line_no) +
                          ": expected 'lang = word comma'");
      }
      Tokens value = split_spaces(line.substr(eq + 1));
      if (key.size() != 1 || value.size() != 2) {
        throw FormatError(path + ":" + std::to_string(line_no) +
                          ": expected 'lang = word comma'");
      }
      set(key[0], {value[0], value[1]});
    }
  }

 private:
  std::map<std::string, Conjunction> table_;
};

/// True iff the last token consists solely of punctuation.
inline bool ends_with_punct(const Tokens& tokens) {
  return !tokens.empty() && is_punct_token(tokens.back());
}

/// Renders one side of a sentence-level TM under `kind`. Only the final
/// token may be replaced; everything else is added at the boundaries.
inline Tokens render_tm(const Tokens& tm, TemplateKind kind,
                        const std::string& lang,
                        const ConjunctionTable& conjunctions) {
  Tokens out;
  out.reserve(tm.size() + 3);
  switch (kind) {
    case TemplateKind::Directly:
      out = tm;
      if (!ends_with_punct(out)) out.emplace_back(".");
      break;
    case TemplateKind::Comma:
    case TemplateKind::Semicolon:
      out = tm;
      if (ends_with_punct(out)) out.pop_back();
      out.emplace_back(kind == TemplateKind::Comma ? "," : ";");
      break;
    case TemplateKind::Conjunction: {
      const auto& conj = conjunctions.at(lang);
      out = tm;
      if (!ends_with_punct(out)) out.emplace_back(".");
      out.push_back(conj.word);
      out.push_back(conj.comma);
      break;
    }
    case TemplateKind::Parenthesis:
      out.emplace_back("(");
      out.insert(out.end(), tm.begin(), tm.end());
      out.emplace_back(")");
      break;
    case TemplateKind::Fragment:
      throw InvalidArgument(
          "fragment template needs fragments; use apply_fragment_template");
  }
  return out;
}

inline PromptedPair apply_sentence_template(
    TemplateKind kind, const Tokens& source_tm, const Tokens& target_tm,
    const Tokens& input, const std::string& source_lang,
    const std::string& target_lang,
    const ConjunctionTable& conjunctions = ConjunctionTable::defaults()) {
  if (!is_sentence_level(kind)) {
    throw InvalidArgument(
        "fragment template needs fragments; use apply_fragment_template");
  }
  if (source_tm.empty() || target_tm.empty() || input.empty()) {
    throw InvalidArgument("TM sides and input must be non-empty");
  }
  PromptedPair p;
  p.kind = kind;
  p.encoder_tokens = render_tm(source_tm, kind, source_lang, conjunctions);
  p.encoder_tokens.insert(p.encoder_tokens.end(), input.begin(), input.end());
  p.forced_prefix = render_tm(target_tm, kind, target_lang, conjunctions);
  return p;
}

namespace detail {

inline Tokens parenthesize_all(const std::vector<Tokens>& fragments) {
  Tokens out;
  for (const auto& f : fragments) {
    if (f.empty()) throw InvalidArgument("empty fragment");
    out.emplace_back("(");
    out.insert(out.end(), f.begin(), f.end());
    out.emplace_back(")");
  }
  return out;
}

}  // namespace detail

/// Each fragment is enclosed in parentheses; source fragments precede the
/// input on the encoder side, target fragments form the forced prefix.
inline PromptedPair apply_fragment_template(
    const std::vector<Tokens>& source_fragments,
    const std::vector<Tokens>& target_fragments, const Tokens& input) {
  if (source_fragments.empty() || target_fragments.empty()) {
    throw InvalidArgument("fragment lists must be non-empty");
  }
  PromptedPair p;
  p.kind = TemplateKind::Fragment;
  p.encoder_tokens = detail::parenthesize_all(source_fragments);
  p.encoder_tokens.insert(p.encoder_tokens.end(), input.begin(), input.end());
  p.forced_prefix = detail::parenthesize_all(target_fragments);
  return p;
}

}  // namespace tmprompt
