#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "tmprompt/error.hpp"
#include "tmprompt/templates.hpp"

namespace tmprompt {

using TokenId = std::uint32_t;

/// Target-side vocabulary of a translation model. Id 0 is always EOS.
class TargetVocabulary {
 public:
  static constexpr TokenId kEos = 0;
  static constexpr std::string_view kEosToken = "</s>";

  TargetVocabulary() {
    tokens_.emplace_back(kEosToken);
    ids_.emplace(std::string(kEosToken), kEos);
  }

  TokenId add(const std::string& token) {
    auto [it, inserted] =
        ids_.try_emplace(token, static_cast<TokenId>(tokens_.size()));
    if (inserted) tokens_.push_back(token);
    return it->second;
  }
  std::optional<TokenId> find(std::string_view token) const {
    auto it = ids_.find(std::string(token));
    if (it == ids_.end()) return std::nullopt;
    return it->second;
  }
  const std::string& token(TokenId id) const { return tokens_.at(id); }
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  friend bool operator==(const TargetVocabulary& a, const TargetVocabulary& b) {
    return a.tokens_ == b.tokens_;
  }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> ids_;
};

/// The decoder's view of an autoregressive model: P(y_i | x, y_<i) as a
/// distribution over the target vocabulary (index = token id, EOS at 0).
/// Implementations must be deterministic and safe for concurrent const use.
template <class M>
concept TranslationModel =
    requires(const M& m, std::span<const std::string> source,
             std::span<const TokenId> prefix) {
      { m.vocabulary() } -> std::convertible_to<const TargetVocabulary&>;
      { m.next_distribution(source, prefix) } -> std::convertible_to<std::vector<double>>;
    };

/// Optional fast path: `bind(source)` precomputes everything that depends
/// only on the source and returns an object with next_distribution(prefix).
template <class M>
concept BindableModel =
    TranslationModel<M> &&
    requires(const M& m, std::span<const std::string> source,
             std::span<const TokenId> prefix) {
      { m.bind(source).next_distribution(prefix) } -> std::convertible_to<std::vector<double>>;
    };

inline constexpr double kDistributionTolerance = 1e-6;

struct BeamOptions {
  std::size_t width = 5;
  std::size_t max_len = 200;  // total output steps, forced prefix included
  double alpha = 0.6;         // length-normalization exponent
};

struct DecodeResult {
  Tokens full_output;  // forced prefix ++ generated suffix (EOS included)
  Tokens translation;  // generated suffix without EOS
  std::size_t forced_len = 0;
  double free_log_prob = 0.0;   // log-prob of the generated suffix only
  double score = 0.0;           // length-normalized free_log_prob
  bool finished = false;        // ended with EOS
};

/// ((5 + l) / 6)^alpha, applied to the free suffix of length l.
inline double length_penalty(std::size_t length, double alpha) {
  return std::pow((5.0 + static_cast<double>(length)) / 6.0, alpha);
}

namespace detail {

inline void check_distribution(const std::vector<double>& dist,
                               std::size_t vocab_size) {
  if (dist.size() != vocab_size) {
    throw ModelError("model returned " + std::to_string(dist.size()) +
                     " probabilities for a vocabulary of " +
                     std::to_string(vocab_size));
  }
  double sum = 0.0;
  for (double p : dist) {
    if (!(p >= 0.0) || !std::isfinite(p)) {
      throw ModelError("model returned a negative or non-finite probability");
    }
    sum += p;
  }
  if (std::abs(sum - 1.0) > kDistributionTolerance) {
    throw ModelError("model distribution sums to " + std::to_string(sum));
  }
}

template <TranslationModel M>
class Conditioned {
 public:
  Conditioned(const M& model, std::span<const std::string> source)
      : model_(model), source_(source) {}
  std::vector<double> next_distribution(std::span<const TokenId> prefix) const {
    return model_.next_distribution(source_, prefix);
  }

 private:
  const M& model_;
  std::span<const std::string> source_;
};

template <TranslationModel M>
auto condition(const M& model, std::span<const std::string> source) {
  if constexpr (BindableModel<M>) {
    return model.bind(source);
  } else {
    return Conditioned<M>(model, source);
  }
}

struct Hypothesis {
  std::vector<TokenId> tokens;  // free suffix
  double log_prob = 0.0;
  double score = 0.0;
  bool finished = false;
};

// Beam search continuing after a fixed prefix. Finished hypotheses leave
// the beam and are kept aside; the beam holds at most `width` open ones.
// Candidates are ranked by normalized score; ties keep generation order
// (beam order, then token id), so results are fully deterministic.
template <class Cond>
Hypothesis search_after_prefix(const Cond& cond, std::size_t vocab_size,
                               const std::vector<TokenId>& prefix,
                               std::size_t free_steps,
                               const BeamOptions& opt) {
  std::vector<Hypothesis> beam(1);
  std::vector<Hypothesis> finished;
  std::vector<TokenId> context = prefix;
  std::vector<Hypothesis> candidates;

  for (std::size_t step = 0; step < free_steps && !beam.empty(); ++step) {
    candidates.clear();
    const double lp = length_penalty(step + 1, opt.alpha);
    for (const auto& h : beam) {
      context.resize(prefix.size());
      context.insert(context.end(), h.tokens.begin(), h.tokens.end());
      const auto dist = cond.next_distribution(context);
      check_distribution(dist, vocab_size);
      for (TokenId v = 0; v < vocab_size; ++v) {
        if (dist[v] <= 0.0) continue;
        Hypothesis c;
        c.tokens.reserve(h.tokens.size() + 1);
        c.tokens = h.tokens;
        c.tokens.push_back(v);
        c.log_prob = h.log_prob + std::log(dist[v]);
        c.score = c.log_prob / lp;
        c.finished = v == TargetVocabulary::kEos;
        candidates.push_back(std::move(c));
      }
    }
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const Hypothesis& a, const Hypothesis& b) {
                       return a.score > b.score;
                     });
    if (candidates.size() > opt.width) candidates.resize(opt.width);
    beam.clear();
    for (auto& c : candidates) {
      (c.finished ? finished : beam).push_back(std::move(c));
    }
  }

  const auto& pool = finished.empty() ? beam : finished;
  if (pool.empty()) {
    throw ModelError("model assigns zero probability to every continuation");
  }
  // First maximum: earlier-finished hypotheses win exact ties.
  const Hypothesis* best = &pool.front();
  for (const auto& h : pool) {
    if (h.score > best->score) best = &h;
  }
  return *best;
}

}  // namespace detail

/// Beam search whose first steps are forced to emit `forced_prefix` with
/// probability 1 (log-prob contribution 0); the model still conditions on
/// those tokens. The beam is a single hypothesis during forcing, then an
/// ordinary beam search runs for the remaining max_len - |prefix| steps.
template <TranslationModel M>
DecodeResult forced_beam_search(const M& model,
                                std::span<const std::string> source,
                                const Tokens& forced_prefix,
                                const BeamOptions& opt) {
  if (opt.width < 1) throw InvalidArgument("beam width must be >= 1");
  if (opt.max_len <= forced_prefix.size()) {
    throw InvalidArgument("max_len (" + std::to_string(opt.max_len) +
                          ") must exceed the forced prefix length (" +
                          std::to_string(forced_prefix.size()) + ")");
  }
  const TargetVocabulary& vocab = model.vocabulary();
  std::vector<TokenId> prefix;
  prefix.reserve(forced_prefix.size());
  for (const auto& tok : forced_prefix) {
    auto id = vocab.find(tok);
    if (!id || *id == TargetVocabulary::kEos) {
      throw ModelError("forced token '" + tok +
                       "' is not in the model vocabulary");
    }
    prefix.push_back(*id);
  }

  const auto cond = detail::condition(model, source);
  const auto best = detail::search_after_prefix(
      cond, vocab.size(), prefix, opt.max_len - prefix.size(), opt);

  DecodeResult r;
  r.forced_len = forced_prefix.size();
  r.full_output = forced_prefix;
  for (TokenId t : best.tokens) {
    r.full_output.push_back(vocab.token(t));
    if (t != TargetVocabulary::kEos) r.translation.push_back(vocab.token(t));
  }
  r.free_log_prob = best.log_prob;
  r.score = best.score;
  r.finished = best.finished;
  return r;
}

template <TranslationModel M>
DecodeResult forced_beam_search(const M& model, const PromptedPair& prompt,
                                const BeamOptions& opt) {
  if (prompt.forced_prefix.empty()) {
    throw InvalidArgument("prompted pair has an empty forced prefix");
  }
  return forced_beam_search(model, std::span<const std::string>(prompt.encoder_tokens),
                            prompt.forced_prefix, opt);
}

/// Plain beam search (no forced prefix).
template <TranslationModel M>
DecodeResult beam_search(const M& model, std::span<const std::string> source,
                         const BeamOptions& opt) {
  return forced_beam_search(model, source, Tokens{}, opt);
}

/// The generated part of a decode: everything after the forced prefix,
/// EOS removed. With `prompt`, also checks that the output really starts
/// with its forced prefix.
inline Tokens strip_prompt(const DecodeResult& result,
                           const PromptedPair* prompt = nullptr) {
  if (result.forced_len > result.full_output.size()) {
    throw InvalidArgument("forced length exceeds output length");
  }
  if (prompt) {
    const auto& p = prompt->forced_prefix;
    if (p.size() != result.forced_len ||
        !std::equal(p.begin(), p.end(), result.full_output.begin())) {
      throw InvalidArgument("output does not start with the forced prefix");
    }
  }
  Tokens out;
  for (std::size_t i = result.forced_len; i < result.full_output.size(); ++i) {
    if (result.full_output[i] != TargetVocabulary::kEosToken) {
      out.push_back(result.full_output[i]);
    }
  }
  return out;
}

}  // namespace tmprompt
