#pragma once

#include <algorithm>
#include <fstream>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "tmprompt/error.hpp"
#include "tmprompt/model1.hpp"
#include "tmprompt/tokenize.hpp"

namespace tmprompt {

struct CommonSubsequence {
  Tokens words;
  std::vector<std::size_t> positions_in_x;
  std::vector<std::size_t> positions_in_xtm;

  std::size_t size() const { return words.size(); }
};

/// Longest common subsequence by suffix DP with a forward traceback that
/// prefers a match, then advancing in `x`, then advancing in `x_tm`; among
/// optimal solutions this picks the earliest usable `x_tm` positions.
inline CommonSubsequence lcs(const Tokens& x, const Tokens& x_tm) {
  const std::size_t n = x.size();
  const std::size_t m = x_tm.size();
  // len[i][j] = LCS length of x[i..] and x_tm[j..]
  std::vector<std::size_t> len((n + 1) * (m + 1), 0);
  auto at = [&](std::size_t i, std::size_t j) -> std::size_t& {
    return len[i * (m + 1) + j];
  };
  for (std::size_t i = n; i-- > 0;) {
    for (std::size_t j = m; j-- > 0;) {
      at(i, j) = x[i] == x_tm[j] ? at(i + 1, j + 1) + 1
                                 : std::max(at(i + 1, j), at(i, j + 1));
    }
  }
  CommonSubsequence out;
  std::size_t i = 0, j = 0;
  while (i < n && j < m) {
    if (x[i] == x_tm[j] && at(i, j) == at(i + 1, j + 1) + 1) {
      out.words.push_back(x[i]);
      out.positions_in_x.push_back(i);
      out.positions_in_xtm.push_back(j);
      ++i;
      ++j;
    } else if (at(i + 1, j) >= at(i, j + 1)) {
      ++i;
    } else {
      ++j;
    }
  }
  return out;
}

// Case-insensitive stop-word set.
class StopWords {
 public:
  StopWords() = default;
  explicit StopWords(const std::vector<std::string>& words) {
    for (const auto& w : words) add(w);
  }

  void add(const std::string& w) { words_.insert(unicode::to_lower(w)); }
  bool contains(const std::string& w) const {
    return words_.count(unicode::to_lower(w)) != 0;
  }
  std::size_t size() const { return words_.size(); }

  /// Articles, common prepositions, conjunctions and pronouns. Unknown
  /// languages get an empty list.
  static StopWords builtin(const std::string& lang) {
    if (lang == "en") {
      return StopWords({"a",    "an",   "the",  "of",   "to",   "in",
                        "on",   "at",   "by",   "for",  "with", "from",
                        "into", "over", "and",  "or",   "but",  "nor",
                        "so",   "as",   "if",   "than", "that", "this",
                        "these", "those", "i",  "you",  "he",   "she",
                        "it",   "we",   "they", "me",   "him",  "her",
                        "us",   "them", "my",   "your", "his",  "its",
                        "our",  "their", "is",  "are",  "was",  "were",
                        "be",   "been"});
    }
    if (lang == "de") {
      return StopWords({"der",   "die",   "das",  "den",   "dem",  "des",
                        "ein",   "eine",  "einen", "einem", "einer", "eines",
                        "und",   "oder",  "aber", "in",    "im",   "an",
                        "am",    "auf",   "aus",  "bei",   "mit",  "nach",
                        "von",   "vom",   "zu",   "zum",   "zur",  "für",
                        "über",  "unter", "ich",  "du",    "er",   "sie",
                        "es",    "wir",   "ihr",  "mich",  "dich", "sich",
                        "uns",   "euch",  "ist",  "sind",  "war",  "dass"});
    }
    return StopWords();
  }

  /// One word per line; blank lines and `#` comments are ignored.
  static StopWords from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open stop-word list '" + path + "'");
    StopWords sw;
    std::string line;
    while (std::getline(in, line)) {
      if (auto hash = line.find('#'); hash != std::string::npos) {
        line.erase(hash);
      }
      for (const auto& w : split_spaces(line)) sw.add(w);
    }
    return sw;
  }

 private:
  std::set<std::string> words_;
};

/// Half-open token span [begin, end).
struct Span {
  std::size_t begin = 0;
  std::size_t end = 0;

  friend bool operator==(const Span&, const Span&) = default;
};

struct FragmentSet {
  std::vector<Tokens> source_fragments;
  std::vector<Tokens> target_fragments;
  std::vector<Span> source_spans;  // into x_tm
  std::vector<Span> target_spans;  // into y_tm

  bool empty() const {
    return source_fragments.empty() || target_fragments.empty();
  }
};

namespace detail {

// Splits sorted positions into maximal runs of consecutive integers.
inline std::vector<Span> consecutive_runs(
    const std::vector<std::size_t>& sorted) {
  std::vector<Span> runs;
  for (std::size_t p : sorted) {
    if (!runs.empty() && runs.back().end == p) {
      ++runs.back().end;
    } else {
      runs.push_back({p, p + 1});
    }
  }
  return runs;
}

// Trims boundary punctuation; returns false when the fragment must go.
inline bool clean_fragment(const Tokens& sentence, Span& span,
                           const StopWords& stop) {
  while (span.begin < span.end && is_punct_token(sentence[span.begin])) {
    ++span.begin;
  }
  while (span.end > span.begin && is_punct_token(sentence[span.end - 1])) {
    --span.end;
  }
  if (span.begin == span.end) return false;
  return !(span.end - span.begin == 1 && stop.contains(sentence[span.begin]));
}

}  // namespace detail

/// Fragment-level TM: common subsequence of input and source TM, grouped
/// into contiguous source runs, projected to the target TM through Viterbi
/// links and grouped again. Target runs are ordered by their source
/// fragment first, target position second. Boundary punctuation is
/// trimmed and single-stop-word fragments dropped; either list may come
/// back empty.
///
/// Model 1 cannot tell repeated source words apart, so a target word whose
/// best link ties between several copies of the same word counts as
/// aligned to the copy that belongs to the common subsequence.
inline FragmentSet build_fragment_tm(const Tokens& x, const Tokens& x_tm,
                                     const Tokens& y_tm,
                                     const Model1Table& table,
                                     const StopWords& source_stop,
                                     const StopWords& target_stop) {
  FragmentSet out;
  const auto common = lcs(x, x_tm);
  if (common.size() == 0) return out;

  const auto source_runs = detail::consecutive_runs(common.positions_in_xtm);
  std::vector<long> run_of(x_tm.size(), -1);
  for (std::size_t r = 0; r < source_runs.size(); ++r) {
    for (std::size_t p = source_runs[r].begin; p < source_runs[r].end; ++p) {
      run_of[p] = static_cast<long>(r);
    }
  }

  std::vector<std::vector<std::size_t>> targets_of_run(source_runs.size());
  const auto cands = viterbi_candidates(table, x_tm, y_tm);
  for (std::size_t j = 0; j < cands.size(); ++j) {
    for (std::size_t i : cands[j]) {
      if (run_of[i] >= 0) {
        targets_of_run[static_cast<std::size_t>(run_of[i])].push_back(j);
        break;
      }
    }
  }

  for (std::size_t r = 0; r < source_runs.size(); ++r) {
    Span s = source_runs[r];
    if (detail::clean_fragment(x_tm, s, source_stop)) {
      out.source_spans.push_back(s);
      out.source_fragments.emplace_back(x_tm.begin() + static_cast<long>(s.begin),
                                        x_tm.begin() + static_cast<long>(s.end));
    }
    // targets_of_run[r] is already ascending: j is visited in order.
    for (Span t : detail::consecutive_runs(targets_of_run[r])) {
      if (detail::clean_fragment(y_tm, t, target_stop)) {
        out.target_spans.push_back(t);
        out.target_fragments.emplace_back(
            y_tm.begin() + static_cast<long>(t.begin),
            y_tm.begin() + static_cast<long>(t.end));
      }
    }
  }
  return out;
}

}  // namespace tmprompt
