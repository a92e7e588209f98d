#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "tmprompt/error.hpp"
#include "tmprompt/parallel.hpp"
#include "tmprompt/serialize.hpp"
#include "tmprompt/tm_store.hpp"

namespace tmprompt {

/// Word-level edit distance (unit-cost insert, delete, substitute).
template <class SeqA, class SeqB>
std::size_t levenshtein(const SeqA& a, const SeqB& b) {
  const std::size_t n = std::size(a);
  const std::size_t m = std::size(b);
  if (n == 0) return m;
  if (m == 0) return n;
  std::vector<std::size_t> prev(m + 1), cur(m + 1);
  for (std::size_t j = 0; j <= m; ++j) prev[j] = j;
  auto ai = std::begin(a);
  for (std::size_t i = 1; i <= n; ++i, ++ai) {
    cur[0] = i;
    auto bj = std::begin(b);
    for (std::size_t j = 1; j <= m; ++j, ++bj) {
      const std::size_t sub = prev[j - 1] + (*ai == *bj ? 0 : 1);
      cur[j] = std::min({sub, prev[j] + 1, cur[j - 1] + 1});
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

/// Fuzzy Match Score: 1 - LD(x, x_tm) / max(|x|, |x_tm|).
template <class SeqA, class SeqB>
double fms(const SeqA& x, const SeqB& x_tm) {
  const std::size_t longest = std::max(std::size(x), std::size(x_tm));
  if (longest == 0) {
    throw InvalidArgument("fuzzy match score of two empty sequences");
  }
  return 1.0 - static_cast<double>(levenshtein(x, x_tm)) /
                   static_cast<double>(longest);
}

inline constexpr std::size_t kDefaultCandidates = 500;

/// Inverted index over the retrieval tokens of a store's source side.
/// Postings are per-entry deduplicated and strictly increasing; a
/// document's length is its number of distinct retrieval tokens.
class TmIndex {
 public:
  using TermId = std::uint32_t;

  std::size_t entry_count() const { return doc_lengths_.size(); }
  std::size_t term_count() const { return terms_.size(); }
  const std::vector<std::size_t>& doc_lengths() const { return doc_lengths_; }

  std::optional<TermId> term_id(const std::string& token) const {
    auto it = lookup_.find(token);
    if (it == lookup_.end()) return std::nullopt;
    return it->second;
  }
  const std::string& term(TermId t) const { return terms_[t]; }
  const std::vector<EntryId>& postings(TermId t) const { return postings_[t]; }
  std::size_t df(TermId t) const { return postings_[t].size(); }

  double idf(TermId t) const {
    return std::log(1.0 + static_cast<double>(entry_count()) /
                              static_cast<double>(df(t)));
  }

  // Token -> postings view, ordered by token (for tests and persistence).
  std::map<std::string, std::vector<EntryId>> postings_map() const {
    std::map<std::string, std::vector<EntryId>> out;
    for (TermId t = 0; t < terms_.size(); ++t) out[terms_[t]] = postings_[t];
    return out;
  }

  friend TmIndex build_index(const TmStore& store);
  friend TmIndex read_index(std::istream& in);

 private:
  TermId intern(const std::string& token) {
    auto [it, inserted] =
        lookup_.try_emplace(token, static_cast<TermId>(terms_.size()));
    if (inserted) {
      terms_.push_back(token);
      postings_.emplace_back();
    }
    return it->second;
  }

  std::unordered_map<std::string, TermId> lookup_;
  std::vector<std::string> terms_;
  std::vector<std::vector<EntryId>> postings_;
  std::vector<std::size_t> doc_lengths_;
};

inline TmIndex build_index(const TmStore& store) {
  if (store.empty()) throw InvalidArgument("cannot index an empty store");
  TmIndex index;
  index.doc_lengths_.reserve(store.size());
  std::vector<TmIndex::TermId> seen;
  for (const auto& e : store.entries()) {
    seen.clear();
    for (const auto& tok : e.source_retrieval_tokens) {
      seen.push_back(index.intern(tok));
    }
    std::sort(seen.begin(), seen.end());
    seen.erase(std::unique(seen.begin(), seen.end()), seen.end());
    for (auto t : seen) index.postings_[t].push_back(e.id);
    index.doc_lengths_.push_back(seen.size());
  }
  return index;
}

struct Candidate {
  EntryId id = 0;
  double overlap = 0.0;

  friend bool operator==(const Candidate&, const Candidate&) = default;
};

/// Reusable scratch space for candidate generation; one per thread.
class CandidateSearcher {
 public:
  explicit CandidateSearcher(const TmIndex& index)
      : index_(index), scores_(index.entry_count(), 0.0) {}

  /// Entries ranked by idf-weighted overlap with the distinct query
  /// tokens (ties: smaller id first); zero-overlap entries are omitted.
  std::vector<Candidate> search(const Tokens& retrieval_tokens, std::size_t k) {
    if (k == 0) throw InvalidArgument("candidate count k must be >= 1");
    Tokens distinct = retrieval_tokens;
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()),
                   distinct.end());

    touched_.clear();
    for (const auto& tok : distinct) {
      auto term = index_.term_id(tok);
      if (!term) continue;
      const double w = index_.idf(*term);
      for (EntryId id : index_.postings(*term)) {
        if (scores_[id] == 0.0) touched_.push_back(id);
        scores_[id] += w;
      }
    }

    std::vector<Candidate> out;
    out.reserve(touched_.size());
    for (EntryId id : touched_) {
      out.push_back({id, scores_[id]});
      scores_[id] = 0.0;
    }
    auto better = [](const Candidate& a, const Candidate& b) {
      return a.overlap != b.overlap ? a.overlap > b.overlap : a.id < b.id;
    };
    if (out.size() > k) {
      std::nth_element(out.begin(), out.begin() + static_cast<long>(k),
                       out.end(), better);
      out.resize(k);
    }
    std::sort(out.begin(), out.end(), better);
    return out;
  }

 private:
  const TmIndex& index_;
  std::vector<double> scores_;
  std::vector<EntryId> touched_;
};

inline std::vector<Candidate> candidate_search(
    const TmIndex& index, const Query& query,
    std::size_t k = kDefaultCandidates) {
  return CandidateSearcher(index).search(query.retrieval_tokens, k);
}

struct RetrievalResult {
  EntryId entry_id = 0;
  double fms = 0.0;
  std::size_t candidate_rank = 0;  // 1-based rank in the candidate list
  double overlap = 0.0;

  friend bool operator==(const RetrievalResult&,
                         const RetrievalResult&) = default;
};

namespace detail {

inline std::optional<RetrievalResult> rerank(
    const TmStore& store, const Query& query,
    const std::vector<Candidate>& candidates) {
  std::optional<RetrievalResult> best;
  for (std::size_t r = 0; r < candidates.size(); ++r) {
    const auto& c = candidates[r];
    const double score =
        fms(query.retrieval_tokens, store.at(c.id).source_retrieval_tokens);
    const bool wins =
        !best || score > best->fms ||
        (score == best->fms &&
         (c.overlap > best->overlap ||
          (c.overlap == best->overlap && c.id < best->entry_id)));
    if (wins) best = RetrievalResult{c.id, score, r + 1, c.overlap};
  }
  return best;
}

}  // namespace detail

/// Candidate generation followed by FMS rerank. Ties on FMS go to the
/// higher overlap score, then the smaller id.
inline std::optional<RetrievalResult> retrieve_best(
    const TmIndex& index, const TmStore& store, const Query& query,
    std::size_t k = kDefaultCandidates) {
  if (index.entry_count() != store.size()) {
    throw InvalidArgument("index was not built from this store");
  }
  return detail::rerank(store, query, candidate_search(index, query, k));
}

/// Normative exhaustive mode: every entry sharing a token is reranked.
inline std::optional<RetrievalResult> retrieve_exhaustive(
    const TmIndex& index, const TmStore& store, const Query& query) {
  return retrieve_best(index, store, query,
                       std::max<std::size_t>(1, store.size()));
}

/// Batch retrieval; result i belongs to query i for any `jobs`.
inline std::vector<std::optional<RetrievalResult>> retrieve_batch(
    const TmIndex& index, const TmStore& store,
    const std::vector<Query>& queries, std::size_t k = kDefaultCandidates,
    std::size_t jobs = 1) {
  if (index.entry_count() != store.size()) {
    throw InvalidArgument("index was not built from this store");
  }
  std::vector<std::optional<RetrievalResult>> out(queries.size());
  std::vector<std::optional<CandidateSearcher>> searchers(
      std::max<std::size_t>(1, jobs));
  parallel_for(queries.size(), jobs, [&](std::size_t w, std::size_t i) {
    if (!searchers[w]) searchers[w].emplace(index);
    out[i] = detail::rerank(store, queries[i],
                            searchers[w]->search(queries[i].retrieval_tokens, k));
  });
  return out;
}

// On-disk layout:
//
//   TMINDEX\t1
//   entries\t<N>
//   doclens\t<len_0 len_1 ... len_{N-1}>
//   terms\t<T>
//   <token>\t<id id id ...>      (T lines, sorted by token bytes)
//   end
inline constexpr std::string_view kIndexMagic = "TMINDEX";
inline constexpr int kIndexVersion = 1;

inline void write_index(std::ostream& out, const TmIndex& index) {
  io::write_header(out, kIndexMagic, kIndexVersion);
  out << "entries\t" << index.entry_count() << '\n';
  out << "doclens\t";
  for (std::size_t i = 0; i < index.entry_count(); ++i) {
    if (i) out << ' ';
    out << index.doc_lengths()[i];
  }
  out << '\n';
  const auto postings = index.postings_map();
  out << "terms\t" << postings.size() << '\n';
  for (const auto& [token, ids] : postings) {
    out << token << '\t';
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (i) out << ' ';
      out << ids[i];
    }
    out << '\n';
  }
  out << "end\n";
}

inline TmIndex read_index(std::istream& in) {
  io::LineReader reader(in, "index");
  reader.expect_header(kIndexMagic, kIndexVersion);
  TmIndex index;
  const std::size_t n = reader.count_line("entries");
  auto lens = reader.fields("doclens", 2);
  for (const auto& v : split_spaces(lens[1])) {
    index.doc_lengths_.push_back(reader.number<std::size_t>(v, "doc length"));
  }
  if (index.doc_lengths_.size() != n) reader.fail("doclens count mismatch");
  const std::size_t terms = reader.count_line("terms");
  for (std::size_t t = 0; t < terms; ++t) {
    auto f = reader.split_next(2);
    if (index.term_id(f[0])) reader.fail("duplicate term '" + f[0] + "'");
    auto id = index.intern(f[0]);
    auto& list = index.postings_[id];
    for (const auto& v : split_spaces(f[1])) {
      auto e = reader.number<EntryId>(v, "entry id");
      if (e >= n || (!list.empty() && e <= list.back())) {
        reader.fail("posting list not strictly increasing or out of range");
      }
      list.push_back(e);
    }
    if (list.empty()) reader.fail("empty posting list");
  }
  reader.expect_end();
  return index;
}

inline void save_index(const TmIndex& index, const std::string& path) {
  io::save_file(path, [&](std::ostream& out) { write_index(out, index); });
}

inline TmIndex load_index(const std::string& path) {
  return io::load_file(path, [](std::istream& in) { return read_index(in); });
}

// Retrieval cache, one line per query in query order:
//
//   TMRETR\t1
//   queries\t<N>
//   <entry_id>\t<fms>\t<rank>\t<overlap>     (or a single "-" when no match)
//   end
inline constexpr std::string_view kRetrievalMagic = "TMRETR";
inline constexpr int kRetrievalVersion = 1;

using RetrievalList = std::vector<std::optional<RetrievalResult>>;

inline void write_retrievals(std::ostream& out, const RetrievalList& results) {
  io::write_header(out, kRetrievalMagic, kRetrievalVersion);
  out << "queries\t" << results.size() << '\n';
  for (const auto& r : results) {
    if (!r) {
      out << "-\n";
      continue;
    }
    out << r->entry_id << '\t' << io::format_double(r->fms) << '\t'
        << r->candidate_rank << '\t' << io::format_double(r->overlap) << '\n';
  }
  out << "end\n";
}

inline RetrievalList read_retrievals(std::istream& in) {
  io::LineReader reader(in, "retrieval cache");
  reader.expect_header(kRetrievalMagic, kRetrievalVersion);
  const std::size_t n = reader.count_line("queries");
  RetrievalList out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto line = reader.next();
    if (line == "-") {
      out.emplace_back();
      continue;
    }
    const auto f = io::split_tabs(line);
    if (f.size() != 4) reader.fail("expected 4 fields or '-'");
    RetrievalResult r;
    r.entry_id = reader.number<EntryId>(f[0], "entry id");
    r.fms = reader.number<double>(f[1], "fms");
    r.candidate_rank = reader.number<std::size_t>(f[2], "rank");
    r.overlap = reader.number<double>(f[3], "overlap");
    if (!(r.fms >= 0.0 && r.fms <= 1.0)) reader.fail("fms out of [0, 1]");
    out.push_back(r);
  }
  reader.expect_end();
  return out;
}

inline void save_retrievals(const RetrievalList& results,
                            const std::string& path) {
  io::save_file(path, [&](std::ostream& out) { write_retrievals(out, results); });
}

inline RetrievalList load_retrievals(const std::string& path) {
  return io::load_file(path,
                       [](std::istream& in) { return read_retrievals(in); });
}

}  // namespace tmprompt
