#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "tmprompt/error.hpp"

namespace tmprompt {

inline constexpr int kBleuOrder = 4;

struct BleuReport {
  double bleu = 0.0;  // 0..100
  std::array<double, kBleuOrder> precisions{};
  std::array<std::size_t, kBleuOrder> matches{};
  std::array<std::size_t, kBleuOrder> totals{};
  double brevity_penalty = 0.0;
  std::size_t hyp_length = 0;
  std::size_t ref_length = 0;
};

namespace detail {

inline std::map<std::vector<std::string>, std::size_t> ngram_counts(
    const Tokens& s, std::size_t n) {
  std::map<std::vector<std::string>, std::size_t> out;
  for (std::size_t i = 0; i + n <= s.size(); ++i) {
    ++out[std::vector<std::string>(s.begin() + static_cast<long>(i),
                                   s.begin() + static_cast<long>(i + n))];
  }
  return out;
}

// Clipped n-gram matches and hypothesis n-gram totals for one pair.
inline void add_sentence_stats(const Tokens& hyp, const Tokens& ref,
                               BleuReport& r) {
  r.hyp_length += hyp.size();
  r.ref_length += ref.size();
  for (std::size_t n = 1; n <= kBleuOrder; ++n) {
    const auto h = ngram_counts(hyp, n);
    const auto g = ngram_counts(ref, n);
    for (const auto& [gram, c] : h) {
      auto it = g.find(gram);
      if (it != g.end()) r.matches[n - 1] += std::min(c, it->second);
    }
    if (hyp.size() >= n) r.totals[n - 1] += hyp.size() - n + 1;
  }
}

inline double brevity_penalty(std::size_t hyp, std::size_t ref) {
  if (hyp == 0) return 0.0;
  if (hyp > ref) return 1.0;
  return std::exp(1.0 - static_cast<double>(ref) / static_cast<double>(hyp));
}

}  // namespace detail

/// Unsmoothed 4-gram corpus BLEU with brevity penalty (multi-bleu
/// convention): any zero n-gram precision yields 0.
inline BleuReport corpus_bleu(const std::vector<Tokens>& hypotheses,
                              const std::vector<Tokens>& references) {
  if (hypotheses.size() != references.size()) {
    throw InvalidArgument("BLEU needs one reference per hypothesis (" +
                          std::to_string(hypotheses.size()) + " vs " +
                          std::to_string(references.size()) + ")");
  }
  BleuReport r;
  for (std::size_t i = 0; i < hypotheses.size(); ++i) {
    detail::add_sentence_stats(hypotheses[i], references[i], r);
  }
  double log_sum = 0.0;
  bool zero = false;
  for (int n = 0; n < kBleuOrder; ++n) {
    r.precisions[n] = r.totals[n] ? static_cast<double>(r.matches[n]) /
                                        static_cast<double>(r.totals[n])
                                  : 0.0;
    if (r.matches[n] == 0) {
      zero = true;
    } else {
      log_sum += std::log(r.precisions[n]);
    }
  }
  r.brevity_penalty = detail::brevity_penalty(r.hyp_length, r.ref_length);
  r.bleu = zero ? 0.0
                : 100.0 * r.brevity_penalty * std::exp(log_sum / kBleuOrder);
  return r;
}

/// Sentence-level diagnostic BLEU: add-one smoothing on 2..4-gram
/// precisions.
inline double sentence_bleu(const Tokens& hypothesis, const Tokens& reference) {
  BleuReport r;
  detail::add_sentence_stats(hypothesis, reference, r);
  if (r.hyp_length == 0 || r.matches[0] == 0) return 0.0;
  double log_sum = std::log(static_cast<double>(r.matches[0]) /
                            static_cast<double>(r.totals[0]));
  for (int n = 1; n < kBleuOrder; ++n) {
    log_sum += std::log(static_cast<double>(r.matches[n] + 1) /
                        static_cast<double>(r.totals[n] + 1));
  }
  return 100.0 * detail::brevity_penalty(r.hyp_length, r.ref_length) *
         std::exp(log_sum / kBleuOrder);
}

}  // namespace tmprompt
