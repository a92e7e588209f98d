#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "tmprompt/error.hpp"
#include "tmprompt/tm_store.hpp"

namespace tmprompt {

/// Knobs for a repetitive synthetic parallel corpus: sentences are noisy
/// variants of a fixed set of prototypes, translated word by word through
/// a lexicon in which some source words have two translations. Every
/// prototype commits to one translation per ambiguous word, so a similar
/// TM carries information the input alone does not.
struct SyntheticOptions {
  std::uint64_t seed = 1;
  std::size_t vocab_size = 400;
  std::size_t prototypes = 150;
  std::size_t train_pairs = 2000;
  std::size_t test_pairs = 200;
  std::size_t min_len = 10;
  std::size_t max_len = 14;
  double ambiguous_ratio = 0.3;  // source words with two translations
  std::size_t train_max_edits = 2;
  // Fraction of tokens replaced when deriving a test sentence from a TM
  // sentence, drawn uniformly from [min, max].
  double test_edit_ratio_min = 0.0;
  double test_edit_ratio_max = 0.2;
  // Off by default: a bigram LM that has seen "." only before EOS ends
  // every prompt whose forced prefix closes with ".".
  bool final_punct = false;
  std::string source_lang = "en";
  std::string target_lang = "de";
};

struct SyntheticCorpus {
  TmStore train;
  std::vector<Tokens> test_source;
  std::vector<Tokens> test_reference;
};

namespace detail {

inline std::vector<std::string> make_words(std::mt19937_64& rng,
                                           const std::vector<std::string>& syl,
                                           std::size_t count) {
  std::set<std::string> seen;
  std::vector<std::string> out;
  std::uniform_int_distribution<std::size_t> pick(0, syl.size() - 1);
  std::uniform_int_distribution<int> len(2, 3);
  while (out.size() < count) {
    std::string w;
    for (int i = len(rng); i > 0; --i) w += syl[pick(rng)];
    if (seen.insert(w).second) out.push_back(w);
  }
  return out;
}

struct Lexicon {
  std::vector<std::string> source;
  std::vector<std::vector<std::string>> targets;  // 1 or 2 per source word
  std::discrete_distribution<std::size_t> zipf;
};

struct Sentence {
  std::vector<std::size_t> words;
  std::vector<std::size_t> senses;
};

}  // namespace detail

inline SyntheticCorpus make_synthetic_corpus(const SyntheticOptions& opt) {
  if (opt.vocab_size < 10 || opt.prototypes == 0 || opt.min_len == 0 ||
      opt.min_len > opt.max_len || opt.train_pairs == 0) {
    throw InvalidArgument("invalid synthetic corpus options");
  }
  std::mt19937_64 rng(opt.seed);
  detail::Lexicon lex;
  lex.source = detail::make_words(
      rng, {"ba", "ko", "mi", "te", "su", "ra", "ne", "lo", "pi", "da", "gu",
            "fe", "ho", "vi"},
      opt.vocab_size);
  const auto target_words = detail::make_words(
      rng, {"ach", "ung", "ter", "sch", "ei", "ler", "mon", "gra", "vor", "bel",
            "kin", "dus", "ost", "rei"},
      opt.vocab_size * 2);
  std::bernoulli_distribution ambiguous(opt.ambiguous_ratio);
  for (std::size_t i = 0; i < opt.vocab_size; ++i) {
    lex.targets.push_back({target_words[2 * i]});
    if (ambiguous(rng)) lex.targets.back().push_back(target_words[2 * i + 1]);
  }
  std::vector<double> weights(opt.vocab_size);
  for (std::size_t i = 0; i < weights.size(); ++i) {
    weights[i] = 1.0 / std::pow(static_cast<double>(i + 1), 0.7);
  }
  lex.zipf = std::discrete_distribution<std::size_t>(weights.begin(),
                                                     weights.end());

  auto random_sense = [&](std::size_t w) {
    return std::uniform_int_distribution<std::size_t>(
        0, lex.targets[w].size() - 1)(rng);
  };

  std::vector<detail::Sentence> protos;
  std::uniform_int_distribution<std::size_t> len(opt.min_len, opt.max_len);
  for (std::size_t p = 0; p < opt.prototypes; ++p) {
    detail::Sentence s;
    for (std::size_t i = len(rng); i > 0; --i) {
      const auto w = lex.zipf(rng);
      s.words.push_back(w);
      s.senses.push_back(random_sense(w));
    }
    protos.push_back(std::move(s));
  }

  auto edit = [&](detail::Sentence s, std::size_t edits) {
    std::vector<std::size_t> pos(s.words.size());
    for (std::size_t i = 0; i < pos.size(); ++i) pos[i] = i;
    std::shuffle(pos.begin(), pos.end(), rng);
    for (std::size_t k = 0; k < std::min(edits, pos.size()); ++k) {
      std::size_t w = lex.zipf(rng);
      while (w == s.words[pos[k]]) w = lex.zipf(rng);
      s.words[pos[k]] = w;
      s.senses[pos[k]] = random_sense(w);
    }
    return s;
  };
  const bool final_punct = opt.final_punct;
  auto render = [&](const detail::Sentence& s, Tokens& src, Tokens& tgt) {
    src.clear();
    tgt.clear();
    for (std::size_t i = 0; i < s.words.size(); ++i) {
      src.push_back(lex.source[s.words[i]]);
      tgt.push_back(lex.targets[s.words[i]][s.senses[i]]);
    }
    if (final_punct) src.emplace_back(".");
    if (final_punct) tgt.emplace_back(".");
  };

  SyntheticCorpus out;
  out.train = TmStore(opt.source_lang, opt.target_lang);
  std::vector<detail::Sentence> train;
  std::uniform_int_distribution<std::size_t> proto_pick(0, protos.size() - 1);
  std::uniform_int_distribution<std::size_t> train_edits(0, opt.train_max_edits);
  Tokens src, tgt;
  for (std::size_t i = 0; i < opt.train_pairs; ++i) {
    auto s = edit(protos[i < protos.size() ? i : proto_pick(rng)],
                  train_edits(rng));
    render(s, src, tgt);
    out.train.add(src, tgt);
    train.push_back(std::move(s));
  }

  std::uniform_int_distribution<std::size_t> train_pick(0, train.size() - 1);
  std::uniform_real_distribution<double> ratio(opt.test_edit_ratio_min,
                                               opt.test_edit_ratio_max);
  for (std::size_t i = 0; i < opt.test_pairs; ++i) {
    const auto& base = train[train_pick(rng)];
    const auto edits = static_cast<std::size_t>(
        std::floor(ratio(rng) * static_cast<double>(base.words.size())));
    render(edit(base, edits), src, tgt);
    out.test_source.push_back(src);
    out.test_reference.push_back(tgt);
  }
  return out;
}

}  // namespace tmprompt
