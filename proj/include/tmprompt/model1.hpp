#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "tmprompt/error.hpp"
#include "tmprompt/serialize.hpp"
#include "tmprompt/tm_store.hpp"

namespace tmprompt {

using WordId = std::uint32_t;

// Bidirectional string <-> dense id map.
class WordVocab {
 public:
  WordId intern(const std::string& w) {
    auto [it, inserted] =
        ids_.try_emplace(w, static_cast<WordId>(words_.size()));
    if (inserted) words_.push_back(w);
    return it->second;
  }
  std::optional<WordId> find(std::string_view w) const {
    auto it = ids_.find(std::string(w));
    if (it == ids_.end()) return std::nullopt;
    return it->second;
  }
  const std::string& word(WordId id) const { return words_.at(id); }
  std::size_t size() const { return words_.size(); }

 private:
  std::unordered_map<std::string, WordId> ids_;
  std::vector<std::string> words_;
};

/// Lexical translation table t(target | source) of IBM Model 1. Source id
/// 0 is the NULL word; each source row stores only co-occurring targets.
class Model1Table {
 public:
  static constexpr WordId kNull = 0;

  struct Entry {
    WordId target;
    double prob;
  };

  Model1Table() { rows_.emplace_back(); }

  const WordVocab& source_vocab() const { return source_; }
  const WordVocab& target_vocab() const { return target_; }

  /// Row id of a source word; unknown words map to NULL.
  WordId source_row(std::string_view e) const {
    auto id = source_.find(e);
    return id ? *id + 1 : kNull;
  }
  std::size_t row_count() const { return rows_.size(); }
  const std::vector<Entry>& row(WordId r) const { return rows_.at(r); }

  double prob_row(WordId r, WordId f) const {
    const auto& row = rows_.at(r);
    auto it = std::lower_bound(
        row.begin(), row.end(), f,
        [](const Entry& e, WordId target) { return e.target < target; });
    return (it != row.end() && it->target == f) ? it->prob : 0.0;
  }

  /// t(f | e); out-of-vocabulary source words fall back to NULL.
  double prob(std::string_view f, std::string_view e) const {
    auto fid = target_.find(f);
    return fid ? prob_row(source_row(e), *fid) : 0.0;
  }
  double prob_null(std::string_view f) const {
    auto fid = target_.find(f);
    return fid ? prob_row(kNull, *fid) : 0.0;
  }

  /// Largest |sum_f t(f|e) - 1| over all source rows with mass.
  double max_normalization_error() const {
    double worst = 0.0;
    for (const auto& row : rows_) {
      if (row.empty()) continue;
      double sum = 0.0;
      for (const auto& e : row) sum += e.prob;
      worst = std::max(worst, std::abs(sum - 1.0));
    }
    return worst;
  }

  /// Sets t(f|e) directly; `e` == nullopt addresses the NULL row. Rows
  /// are not renormalized.
  void set(std::optional<std::string_view> e, const std::string& f,
           double p) {
    WordId r = kNull;
    if (e) {
      r = source_.intern(std::string(*e)) + 1;
      if (rows_.size() <= r) rows_.resize(r + 1);
    }
    const WordId fid = target_.intern(f);
    auto& row = rows_[r];
    auto it = std::lower_bound(
        row.begin(), row.end(), fid,
        [](const Entry& x, WordId target) { return x.target < target; });
    if (it != row.end() && it->target == fid) {
      it->prob = p;
    } else {
      row.insert(it, Entry{fid, p});
    }
  }

  friend struct Model1Trainer;

 private:
  WordVocab source_;
  WordVocab target_;
  std::vector<std::vector<Entry>> rows_;  // indexed by source row id
};

struct Model1Trace {
  double initial_log_likelihood = 0.0;
  std::vector<double> log_likelihood;           // after each iteration
  std::vector<double> max_normalization_error;  // after each iteration
};

struct Model1Trainer {
  static Model1Table train(const TmStore& store, int iterations,
                           Model1Trace* trace) {
    if (store.empty()) throw InvalidArgument("cannot train on an empty store");
    if (iterations < 1) throw InvalidArgument("EM iterations must be >= 1");

    Model1Table table;
    struct Sentence {
      std::vector<WordId> rows;  // NULL first
      std::vector<WordId> targets;
    };
    std::vector<Sentence> corpus;
    corpus.reserve(store.size());
    for (const auto& e : store.entries()) {
      Sentence s;
      s.rows.push_back(Model1Table::kNull);
      for (const auto& w : e.source_tokens) {
        s.rows.push_back(table.source_.intern(w) + 1);
      }
      for (const auto& w : e.target_tokens) {
        s.targets.push_back(table.target_.intern(w));
      }
      corpus.push_back(std::move(s));
    }
    const std::size_t rows = table.source_.size() + 1;

    // Sparse parameter slots for every co-occurring (row, target) pair.
    std::unordered_map<std::uint64_t, std::uint32_t> slot_of;
    std::vector<std::pair<WordId, WordId>> slot_pair;
    auto key = [](WordId r, WordId f) {
      return (static_cast<std::uint64_t>(r) << 32) | f;
    };
    for (const auto& s : corpus) {
      for (WordId r : s.rows) {
        for (WordId f : s.targets) {
          auto [it, inserted] = slot_of.try_emplace(
              key(r, f), static_cast<std::uint32_t>(slot_pair.size()));
          if (inserted) slot_pair.emplace_back(r, f);
        }
      }
    }

    const double uniform = 1.0 / static_cast<double>(table.target_.size());
    std::vector<double> t(slot_pair.size(), uniform);
    std::vector<double> counts(slot_pair.size());
    std::vector<double> totals(rows);
    std::vector<std::uint32_t> slots;
    std::vector<double> probs;

    for (int it = 0; it <= iterations; ++it) {
      const bool update = it < iterations;
      std::fill(counts.begin(), counts.end(), 0.0);
      double ll = 0.0;
      for (const auto& s : corpus) {
        const double inv_len = 1.0 / static_cast<double>(s.rows.size());
        for (WordId f : s.targets) {
          slots.clear();
          probs.clear();
          double denom = 0.0;
          for (WordId r : s.rows) {
            const auto slot = slot_of.find(key(r, f))->second;
            slots.push_back(slot);
            probs.push_back(t[slot]);
            denom += t[slot];
          }
          ll += std::log(denom * inv_len);
          if (!update) continue;
          for (std::size_t i = 0; i < slots.size(); ++i) {
            counts[slots[i]] += probs[i] / denom;
          }
        }
      }
      if (trace) {
        if (it == 0) {
          trace->initial_log_likelihood = ll;
        } else {
          trace->log_likelihood.push_back(ll);
        }
      }
      if (!update) break;

      std::fill(totals.begin(), totals.end(), 0.0);
      for (std::size_t k = 0; k < slot_pair.size(); ++k) {
        totals[slot_pair[k].first] += counts[k];
      }
      for (std::size_t k = 0; k < slot_pair.size(); ++k) {
        const double tot = totals[slot_pair[k].first];
        t[k] = tot > 0.0 ? counts[k] / tot : 0.0;
      }
      if (trace) {
        double worst = 0.0;
        std::vector<double> sums(rows, 0.0);
        for (std::size_t k = 0; k < slot_pair.size(); ++k) {
          sums[slot_pair[k].first] += t[k];
        }
        for (std::size_t r = 0; r < rows; ++r) {
          if (totals[r] > 0.0) worst = std::max(worst, std::abs(sums[r] - 1.0));
        }
        trace->max_normalization_error.push_back(worst);
      }
    }

    table.rows_.assign(rows, {});
    for (std::size_t k = 0; k < slot_pair.size(); ++k) {
      table.rows_[slot_pair[k].first].push_back({slot_pair[k].second, t[k]});
    }
    for (auto& row : table.rows_) {
      std::sort(row.begin(), row.end(),
                [](const auto& a, const auto& b) { return a.target < b.target; });
    }
    return table;
  }
};

/// IBM Model 1 EM from a uniform start, NULL word included, learning
/// t(target | source) over the store's pairs.
inline Model1Table train_model1(const TmStore& store, int iterations,
                                Model1Trace* trace = nullptr) {
  return Model1Trainer::train(store, iterations, trace);
}

struct Alignment {
  // (source index, target index), ordered by target index.
  std::vector<std::pair<std::size_t, std::size_t>> links;

  friend bool operator==(const Alignment&, const Alignment&) = default;
};

/// For every target position, all source positions attaining the maximal
/// t(y_j | x_i). Empty when NULL attains (or ties) the maximum.
inline std::vector<std::vector<std::size_t>> viterbi_candidates(
    const Model1Table& table, const Tokens& source, const Tokens& target) {
  std::vector<WordId> rows;
  rows.reserve(source.size());
  for (const auto& e : source) rows.push_back(table.source_row(e));

  std::vector<std::vector<std::size_t>> out(target.size());
  for (std::size_t j = 0; j < target.size(); ++j) {
    auto fid = table.target_vocab().find(target[j]);
    if (!fid) continue;
    double best = table.prob_row(Model1Table::kNull, *fid);
    std::vector<std::size_t> argmax;
    for (std::size_t i = 0; i < source.size(); ++i) {
      if (rows[i] == Model1Table::kNull) continue;
      const double p = table.prob_row(rows[i], *fid);
      if (p > best) {
        best = p;
        argmax.assign(1, i);
      } else if (p == best && !argmax.empty()) {
        argmax.push_back(i);
      }
    }
    out[j] = std::move(argmax);
  }
  return out;
}

/// Each target word links to its most probable source word (smallest
/// position on ties); words best explained by NULL stay unlinked.
inline Alignment align_viterbi(const Model1Table& table, const Tokens& source,
                               const Tokens& target) {
  Alignment a;
  const auto cands = viterbi_candidates(table, source, target);
  for (std::size_t j = 0; j < cands.size(); ++j) {
    if (!cands[j].empty()) a.links.emplace_back(cands[j].front(), j);
  }
  return a;
}

// On-disk layout:
//
//   M1TABLE\t1
//   entries\t<P>
//   null\t<f>\t<prob>            (NULL row)
//   pair\t<e>\t<f>\t<prob>       (P lines total, sorted by e, then f)
//   end
//
// Probabilities use the shortest round-trip decimal representation.
inline constexpr std::string_view kModel1Magic = "M1TABLE";
inline constexpr int kModel1Version = 1;

inline void write_model1_body(std::ostream& out, const Model1Table& table) {
  std::map<std::pair<std::string, std::string>, double> sorted_null;
  std::map<std::pair<std::string, std::string>, double> sorted;
  std::size_t count = 0;
  for (WordId r = 0; r < table.row_count(); ++r) {
    for (const auto& e : table.row(r)) {
      const auto& f = table.target_vocab().word(e.target);
      if (r == Model1Table::kNull) {
        sorted_null[{"", f}] = e.prob;
      } else {
        sorted[{table.source_vocab().word(r - 1), f}] = e.prob;
      }
      ++count;
    }
  }
  out << "entries\t" << count << '\n';
  for (const auto& [k, p] : sorted_null) {
    io::check_field(k.second);
    out << "null\t" << k.second << '\t' << io::format_double(p) << '\n';
  }
  for (const auto& [k, p] : sorted) {
    io::check_field(k.first);
    io::check_field(k.second);
    out << "pair\t" << k.first << '\t' << k.second << '\t'
        << io::format_double(p) << '\n';
  }
}

inline Model1Table read_model1_body(io::LineReader& reader) {
  Model1Table table;
  const std::size_t n = reader.count_line("entries");
  for (std::size_t i = 0; i < n; ++i) {
    auto f = io::split_tabs(reader.next());
    if (f.size() == 3 && f[0] == "null") {
      table.set(std::nullopt, f[1], reader.number<double>(f[2], "probability"));
    } else if (f.size() == 4 && f[0] == "pair") {
      table.set(f[1], f[2], reader.number<double>(f[3], "probability"));
    } else {
      reader.fail("expected 'null' or 'pair' record");
    }
  }
  return table;
}

inline void save_model1(const Model1Table& table, const std::string& path) {
  io::save_file(path, [&](std::ostream& out) {
    io::write_header(out, kModel1Magic, kModel1Version);
    write_model1_body(out, table);
    out << "end\n";
  });
}

inline Model1Table load_model1(const std::string& path) {
  return io::load_file(path, [](std::istream& in) {
    io::LineReader reader(in, "alignment table");
    reader.expect_header(kModel1Magic, kModel1Version);
    auto table = read_model1_body(reader);
    reader.expect_end();
    return table;
  });
}

}  // namespace tmprompt
