#pragma once

#include <cstddef>
#include <fstream>
#include <iostream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tmprompt/error.hpp"
#include "tmprompt/serialize.hpp"
#include "tmprompt/tokenize.hpp"

namespace tmprompt {

using EntryId = std::size_t;

struct TmEntry {
  EntryId id = 0;
  Tokens source_tokens;
  Tokens target_tokens;
  Tokens source_retrieval_tokens;

  friend bool operator==(const TmEntry&, const TmEntry&) = default;
};

struct Query {
  Tokens tokens;
  Tokens retrieval_tokens;

  static Query from_tokens(Tokens tokens) {
    Query q;
    q.retrieval_tokens = normalize_for_retrieval(tokens);
    q.tokens = std::move(tokens);
    return q;
  }
  static Query from_text(std::string_view text, std::string_view lang = {}) {
    return from_tokens(tokenize(text, lang));
  }
};

// Append-only bilingual translation memory. Entry ids equal positions.
class TmStore {
 public:
  TmStore() = default;
  TmStore(std::string source_lang, std::string target_lang)
      : source_lang_(std::move(source_lang)),
        target_lang_(std::move(target_lang)) {}

  EntryId add(Tokens source, Tokens target) {
    if (source.empty() || target.empty()) {
      throw InvalidArgument("TM entry sides must be non-empty");
    }
    TmEntry e;
    e.id = entries_.size();
    e.source_retrieval_tokens = normalize_for_retrieval(source);
    e.source_tokens = std::move(source);
    e.target_tokens = std::move(target);
    entries_.push_back(std::move(e));
    return entries_.back().id;
  }

  const std::vector<TmEntry>& entries() const { return entries_; }
  const TmEntry& at(EntryId id) const { return entries_.at(id); }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const std::string& source_lang() const { return source_lang_; }
  const std::string& target_lang() const { return target_lang_; }

  friend bool operator==(const TmStore&, const TmStore&) = default;

 private:
  std::string source_lang_;
  std::string target_lang_;
  std::vector<TmEntry> entries_;
};

struct IngestResult {
  TmStore store;
  std::size_t skipped = 0;  // line pairs with a blank side
};

namespace detail {

inline std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  if (in.bad()) throw IoError("error while reading '" + path + "'");
  return lines;
}

}  // namespace detail

/// Builds a store from two line-aligned files. Blank pairs are skipped and
/// counted; ids follow file order among kept lines.
inline IngestResult ingest_corpus(const std::string& source_path,
                                  const std::string& target_path,
                                  const std::string& source_lang,
                                  const std::string& target_lang) {
  const auto src = detail::read_lines(source_path);
  const auto tgt = detail::read_lines(target_path);
  if (src.size() != tgt.size()) {
    throw InvalidArgument("line count mismatch: '" + source_path + "' has " +
                          std::to_string(src.size()) + " lines, '" +
                          target_path + "' has " + std::to_string(tgt.size()));
  }
  IngestResult result{TmStore(source_lang, target_lang), 0};
  for (std::size_t i = 0; i < src.size(); ++i) {
    Tokens s = tokenize(src[i], source_lang);
    Tokens t = tokenize(tgt[i], target_lang);
    if (s.empty() || t.empty()) {
      ++result.skipped;
      continue;
    }
    result.store.add(std::move(s), std::move(t));
  }
  return result;
}

/// Single-file variant: `source TAB target` per line. A line without a tab
/// counts as blank on the target side.
inline IngestResult ingest_tsv(const std::string& path,
                               const std::string& source_lang,
                               const std::string& target_lang) {
  const auto lines = detail::read_lines(path);
  IngestResult result{TmStore(source_lang, target_lang), 0};
  for (const auto& line : lines) {
    const auto tab = line.find('\t');
    const std::string_view view(line);
    Tokens s = tokenize(view.substr(0, tab), source_lang);
    Tokens t = tab == std::string::npos ? Tokens{}
                                        : tokenize(view.substr(tab + 1),
                                                   target_lang);
    if (s.empty() || t.empty()) {
      ++result.skipped;
      continue;
    }
    result.store.add(std::move(s), std::move(t));
  }
  return result;
}

// On-disk layout (UTF-8 text, '\n' line ends, fields separated by '\t'):
//
//   TMSTORE\t1
//   langs\t<source_lang>\t<target_lang>
//   entries\t<N>
//   <source tokens joined by ' '>\t<target tokens joined by ' '>   (N lines)
//   end
//
// Retrieval tokens are derived data and are recomputed on load.
inline constexpr std::string_view kStoreMagic = "TMSTORE";
inline constexpr int kStoreVersion = 1;

inline void write_store(std::ostream& out, const TmStore& store) {
  io::write_header(out, kStoreMagic, kStoreVersion);
  io::check_field(store.source_lang());
  io::check_field(store.target_lang());
  out << "langs\t" << store.source_lang() << '\t' << store.target_lang()
      << '\n';
  out << "entries\t" << store.size() << '\n';
  for (const auto& e : store.entries()) {
    out << io::join_checked(e.source_tokens) << '\t'
        << io::join_checked(e.target_tokens) << '\n';
  }
  out << "end\n";
}

inline TmStore read_store(std::istream& in) {
  io::LineReader reader(in, "store");
  reader.expect_header(kStoreMagic, kStoreVersion);
  auto langs = reader.fields("langs", 3);
  TmStore store(langs[1], langs[2]);
  const std::size_t n = reader.count_line("entries");
  for (std::size_t i = 0; i < n; ++i) {
    auto f = reader.split_next(2);
    Tokens s = split_spaces(f[0]);
    Tokens t = split_spaces(f[1]);
    if (s.empty() || t.empty()) reader.fail("empty side in entry");
    store.add(std::move(s), std::move(t));
  }
  reader.expect_end();
  return store;
}

inline void save_store(const TmStore& store, const std::string& path) {
  io::save_file(path, [&](std::ostream& out) { write_store(out, store); });
}

inline TmStore load_store(const std::string& path) {
  return io::load_file(path, [](std::istream& in) { return read_store(in); });
}

}  // namespace tmprompt
