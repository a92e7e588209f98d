#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "tmprompt/decoder.hpp"
#include "tmprompt/error.hpp"
#include "tmprompt/model1.hpp"
#include "tmprompt/serialize.hpp"
#include "tmprompt/templates.hpp"
#include "tmprompt/tm_store.hpp"

namespace tmprompt {

/// Add-k smoothed bigram model over a TargetVocabulary. Contexts are token
/// ids plus a begin-of-sentence context; outcomes are all ids (EOS = 0).
class BigramLm {
 public:
  BigramLm() = default;
  BigramLm(std::size_t vocab_size, double add_k)
      : vocab_size_(vocab_size), add_k_(add_k), rows_(vocab_size + 1),
        totals_(vocab_size + 1, 0) {
    if (!(add_k > 0.0)) throw InvalidArgument("add-k must be positive");
  }

  std::size_t bos() const { return vocab_size_; }
  std::size_t vocab_size() const { return vocab_size_; }
  double add_k() const { return add_k_; }

  void add_count(std::size_t context, TokenId next, std::uint64_t n = 1) {
    auto& row = rows_.at(context);
    auto it = std::lower_bound(
        row.begin(), row.end(), next,
        [](const auto& e, TokenId t) { return e.first < t; });
    if (it != row.end() && it->first == next) {
      it->second += n;
    } else {
      row.insert(it, {next, n});
    }
    totals_[context] += n;
  }

  /// Counts every bigram of BOS w_1 ... w_n EOS.
  void add_sentence(const std::vector<TokenId>& sentence) {
    std::size_t ctx = bos();
    for (TokenId t : sentence) {
      add_count(ctx, t);
      ctx = t;
    }
    add_count(ctx, TargetVocabulary::kEos);
  }

  /// Writes P(. | context) into `out` scaled by `weight`, adding to it.
  void accumulate(std::size_t context, double weight,
                  std::vector<double>& out) const {
    const double denom = static_cast<double>(totals_.at(context)) +
                         add_k_ * static_cast<double>(vocab_size_);
    const double base = weight * add_k_ / denom;
    for (auto& p : out) p += base;
    for (const auto& [t, n] : rows_[context]) {
      out[t] += weight * static_cast<double>(n) / denom;
    }
  }

  std::vector<double> distribution(std::size_t context) const {
    std::vector<double> out(vocab_size_, 0.0);
    accumulate(context, 1.0, out);
    return out;
  }

  const std::vector<std::pair<TokenId, std::uint64_t>>& row(
      std::size_t context) const {
    return rows_.at(context);
  }

 private:
  std::size_t vocab_size_ = 0;
  double add_k_ = 0.1;
  std::vector<std::vector<std::pair<TokenId, std::uint64_t>>> rows_;
  std::vector<std::uint64_t> totals_;
};

/// Mixture parameters of the toy model. With coverage off, copy_weight 0,
/// null_weight 1 and linear combination the model is the plain mixture
///   P(w) = lambda * P_lm(w | last) + (1 - lambda) * P_lex(w | source),
///   P_lex(w | source) = 1/(|source|+1) * sum_{e in source + NULL} t(w|e).
struct ToyParams {
  double lambda = 0.5;       // weight of the target-side (LM + copy) term
  double copy_weight = 0.5;  // share of the target-side term given to copying
  double null_weight = 0.1;  // weight of the NULL row in the lexical term
  bool coverage = true;      // discount source words already translated
  bool geometric = true;     // log-linear instead of linear interpolation
  double jump = 3.0;         // monotone jump prior strength (coverage only)

  static ToyParams plain(double lambda = 0.5) {
    return ToyParams{lambda, 0.0, 1.0, false, false, 0.0};
  }

  void validate() const {
    if (!(lambda >= 0.0 && lambda <= 1.0)) {
      throw InvalidArgument("lambda must be in [0, 1]");
    }
    if (!(copy_weight >= 0.0 && copy_weight <= 1.0)) {
      throw InvalidArgument("copy weight must be in [0, 1]");
    }
    if (!(null_weight > 0.0)) {
      throw InvalidArgument("NULL weight must be positive");
    }
    if (!(jump >= 0.0)) throw InvalidArgument("jump strength must be >= 0");
  }

  friend bool operator==(const ToyParams&, const ToyParams&) = default;
};

struct ToyOptions {
  int em_iterations = 5;
  double add_k = 0.1;
  ToyParams params;
  // Tokens the model must know even if absent from the training targets,
  // typically the template punctuation and conjunctions.
  std::vector<std::string> extra_tokens;
};

/// Punctuation and conjunction tokens any template may force on the
/// target side of `lang`.
inline std::vector<std::string> template_vocabulary(
    const std::string& lang,
    const ConjunctionTable& conjunctions = ConjunctionTable::defaults()) {
  std::vector<std::string> out = {".", ",", ";", "(", ")"};
  if (conjunctions.contains(lang)) {
    const auto& c = conjunctions.at(lang);
    out.push_back(c.word);
    out.push_back(c.comma);
  }
  return out;
}

class ToyModel;

// A ToyModel bound to one source sentence. Holds per-position lexical
// rows, so it is cheap to query for many prefixes. Not thread-safe; bind
// once per decode.
class ToyConditioned {
 public:
  ToyConditioned(const ToyModel& model, std::span<const std::string> source);
  std::vector<double> next_distribution(std::span<const TokenId> prefix) const;

 private:
  const ToyModel* model_;
  std::vector<WordId> rows_;  // lexical row per source position
  std::vector<double> plain_lex_;  // P_lex without coverage
};

/// Self-contained translation model for exercising the prompting
/// pipeline: a bigram target LM, an IBM Model 1 lexical table and two
/// extensions that give it the minimum a real NMT decoder has.
///
///  * Coverage: each prefix token softly consumes the source positions
///    that explain it (Model 1 posterior weighted by what is left); the
///    lexical term only spreads mass over what remains, and EOS gets
///    lexical mass max(0, 1 - remaining).
///  * Jump prior (with coverage): a cursor sits at the expected source
///    position of the last prefix token, and positions are weighted by
///    d_i = exp(-jump |i - cursor - 1|) both when spreading the remaining
///    mass and in the consumption posterior, so the next word is looked
///    for just after the previous one. After a prompt's forced prefix the
///    cursor rests at the end of the TM side.
///  * Copy: when the last prefix token occurred earlier in the prefix, up
///    to copy_weight of the target-side term goes to the tokens that
///    followed it, scaled by how much of their source support is still
///    untranslated.
///
///   P_tgt  = P_lm(w|last) (1 - copied) + P_copy(w|prefix)
///   P(w)   = lambda P_tgt + (1-lambda) P_lex               (linear)
///   P(w)  ~= P_tgt^lambda P_lex^(1-lambda), renormalized   (geometric)
///   P_lex  = (sum_i a_i t(w|x_i) + beta t(w|NULL)) / Z,
///   a_i    = R rem_i d_i / sum_k rem_k d_k,  R = sum_i rem_i
///   P_lex(EOS) = max(0, 1 - sum_i rem_i) / Z   (coverage only)
///
/// Unknown source words behave like NULL: in the plain mixture each one
/// adds a NULL row, with coverage they fold into the single NULL row.
class ToyModel {
 public:
  ToyModel() = default;
  ToyModel(TargetVocabulary vocab, BigramLm lm, Model1Table lex,
           ToyParams params)
      : vocab_(std::move(vocab)), lm_(std::move(lm)), lex_(std::move(lex)),
        params_(params) {
    params_.validate();
    lex_to_vocab_.resize(lex_.target_vocab().size());
    for (WordId f = 0; f < lex_to_vocab_.size(); ++f) {
      auto id = vocab_.find(lex_.target_vocab().word(f));
      if (!id) {
        throw InvalidArgument("lexical table target '" +
                              lex_.target_vocab().word(f) +
                              "' missing from the vocabulary");
      }
      lex_to_vocab_[f] = *id;
    }
    vocab_to_lex_.assign(vocab_.size(), kNoLex);
    for (WordId f = 0; f < lex_to_vocab_.size(); ++f) {
      vocab_to_lex_[lex_to_vocab_[f]] = f;
    }
  }

  const TargetVocabulary& vocabulary() const { return vocab_; }
  const BigramLm& lm() const { return lm_; }
  const Model1Table& lexical_table() const { return lex_; }
  const ToyParams& params() const { return params_; }
  void set_params(const ToyParams& params) {
    params.validate();
    params_ = params;
  }

  ToyConditioned bind(std::span<const std::string> source) const {
    return ToyConditioned(*this, source);
  }

  std::vector<double> next_distribution(std::span<const std::string> source,
                                        std::span<const TokenId> prefix) const {
    return bind(source).next_distribution(prefix);
  }

 private:
  friend class ToyConditioned;
  static constexpr WordId kNoLex = static_cast<WordId>(-1);

  TargetVocabulary vocab_;
  BigramLm lm_;
  Model1Table lex_;
  ToyParams params_;
  std::vector<TokenId> lex_to_vocab_;
  std::vector<WordId> vocab_to_lex_;
};

inline ToyConditioned::ToyConditioned(const ToyModel& model,
                                      std::span<const std::string> source)
    : model_(&model) {
  rows_.reserve(source.size());
  for (const auto& w : source) {
    const WordId r = model.lex_.source_row(w);
    // With coverage the NULL row is already present once; unknown words
    // would only add mass that can never be consumed.
    if (r == Model1Table::kNull && model.params_.coverage) continue;
    rows_.push_back(r);
  }
  if (!model.params_.coverage) {
    plain_lex_.assign(model.vocab_.size(), 0.0);
    auto add_row = [&](WordId r, double weight) {
      for (const auto& e : model.lex_.row(r)) {
        plain_lex_[model.lex_to_vocab_[e.target]] += weight * e.prob;
      }
    };
    add_row(Model1Table::kNull, model.params_.null_weight);
    for (WordId r : rows_) add_row(r, 1.0);
    const double z =
        static_cast<double>(rows_.size()) + model.params_.null_weight;
    for (auto& p : plain_lex_) p /= z;
  }
}

inline std::vector<double> ToyConditioned::next_distribution(
    std::span<const TokenId> prefix) const {
  const auto& m = *model_;
  const auto& prm = m.params_;
  const auto& table = m.lex_;
  const std::size_t vocab = m.vocab_.size();

  // Remaining (untranslated) mass per source position, and the jump
  // prior around the position after the cursor.
  std::vector<double> rem(rows_.size(), 1.0);
  std::vector<double> near(rows_.size(), 1.0);
  auto place = [&](double cursor) {
    if (prm.jump <= 0.0) return;
    for (std::size_t i = 0; i < rows_.size(); ++i) {
      near[i] = std::exp(-prm.jump *
                         std::abs(static_cast<double>(i) - cursor - 1.0));
    }
  };
  if (prm.coverage) {
    place(-1.0);
    std::vector<double> u(rows_.size());
    for (TokenId y : prefix) {
      const WordId f = m.vocab_to_lex_[y];
      if (f == ToyModel::kNoLex) continue;
      double z = 0.0, mean = 0.0;
      for (std::size_t i = 0; i < rows_.size(); ++i) {
        u[i] = rem[i] * near[i] * table.prob_row(rows_[i], f);
        z += u[i];
        mean += u[i] * static_cast<double>(i);
      }
      const double located = z;
      z += prm.null_weight * table.prob_row(Model1Table::kNull, f);
      if (z <= 0.0) continue;
      for (std::size_t i = 0; i < rows_.size(); ++i) {
        rem[i] = std::max(0.0, rem[i] - u[i] / z);
      }
      if (located > 0.0) place(mean / located);
    }
  }

  // Lexical distribution (sums to 1 over the vocabulary, EOS included).
  std::vector<double> lex;
  if (!prm.coverage) {
    lex = plain_lex_;
  } else {
    lex.assign(vocab, 0.0);
    double remaining = 0.0, spread = 0.0;
    for (std::size_t i = 0; i < rows_.size(); ++i) {
      remaining += rem[i];
      spread += rem[i] * near[i];
    }
    const double eos = std::max(0.0, 1.0 - remaining);
    const double scale = 1.0 / (remaining + prm.null_weight + eos);
    auto add_row = [&](WordId r, double weight) {
      if (weight <= 0.0) return;
      for (const auto& e : table.row(r)) {
        lex[m.lex_to_vocab_[e.target]] += scale * weight * e.prob;
      }
    };
    add_row(Model1Table::kNull, prm.null_weight);
    if (spread > 0.0) {
      for (std::size_t i = 0; i < rows_.size(); ++i) {
        add_row(rows_[i], remaining * rem[i] * near[i] / spread);
      }
    }
    lex[TargetVocabulary::kEos] += scale * eos;
  }

  // Target-side distribution. Copy proposals are the tokens that followed
  // earlier occurrences of the last token, each gated by the fraction of
  // its source support still untranslated; ungated mass stays with the
  // bigram LM.
  std::vector<double> tgt(vocab, 0.0);
  double copied = 0.0;
  if (prm.copy_weight > 0.0 && prefix.size() > 1) {
    std::size_t occurrences = 0;
    for (std::size_t k = 0; k + 1 < prefix.size(); ++k) {
      occurrences += prefix[k] == prefix.back();
    }
    for (std::size_t k = 0; k + 1 < prefix.size(); ++k) {
      if (prefix[k] != prefix.back()) continue;
      const TokenId next = prefix[k + 1];
      const WordId f = m.vocab_to_lex_[next];
      if (f == ToyModel::kNoLex) continue;
      double support = 0.0, open = 0.0;
      for (std::size_t i = 0; i < rows_.size(); ++i) {
        const double t = table.prob_row(rows_[i], f);
        support += t;
        open += rem[i] * t;
      }
      if (support <= 0.0) continue;
      const double mass = prm.copy_weight * (open / support) /
                          static_cast<double>(occurrences);
      tgt[next] += mass;
      copied += mass;
    }
  }
  const std::size_t context = prefix.empty() ? m.lm_.bos() : prefix.back();
  m.lm_.accumulate(context, 1.0 - copied, tgt);

  std::vector<double> p(vocab);
  if (prm.geometric) {
    for (std::size_t w = 0; w < vocab; ++w) {
      p[w] = (tgt[w] > 0.0 && lex[w] > 0.0)
                 ? std::exp(prm.lambda * std::log(tgt[w]) +
                            (1.0 - prm.lambda) * std::log(lex[w]))
                 : 0.0;
    }
  } else {
    for (std::size_t w = 0; w < vocab; ++w) {
      p[w] = prm.lambda * tgt[w] + (1.0 - prm.lambda) * lex[w];
    }
  }
  double sum = 0.0;
  for (double v : p) sum += v;
  if (sum > 0.0) {
    for (auto& v : p) v /= sum;
  }
  return p;
}

/// Trains the bigram LM on target sentences and the lexical table with
/// Model 1 EM (target given source).
inline ToyModel train_toy(const TmStore& store, const ToyOptions& opt = {}) {
  if (store.empty()) throw InvalidArgument("cannot train on an empty store");
  TargetVocabulary vocab;
  for (const auto& e : store.entries()) {
    for (const auto& w : e.target_tokens) vocab.add(w);
  }
  for (const auto& w : opt.extra_tokens) vocab.add(w);

  BigramLm lm(vocab.size(), opt.add_k);
  std::vector<TokenId> ids;
  for (const auto& e : store.entries()) {
    ids.clear();
    for (const auto& w : e.target_tokens) ids.push_back(*vocab.find(w));
    lm.add_sentence(ids);
  }
  auto lex = train_model1(store, opt.em_iterations);
  return ToyModel(std::move(vocab), std::move(lm), std::move(lex), opt.params);
}

// On-disk layout:
//
//   TOYMODEL\t1
//   params\t<lambda>\t<add_k>\t<copy_weight>\t<null_weight>\t<coverage 0|1>\t<geometric 0|1>\t<jump>
//   vocab\t<V>                  (V = vocabulary size without EOS)
//   <token>                     (V lines; ids 1..V in order, EOS is id 0)
//   bigrams\t<B>
//   <context>\t<next>\t<count>  (B lines; context V+1 means BOS)
//   lexical
//   entries\t<P> ...            (Model 1 table body, see model1.hpp)
//   end
inline constexpr std::string_view kToyMagic = "TOYMODEL";
inline constexpr int kToyVersion = 1;

inline void save_toy(const ToyModel& model, const std::string& path) {
  io::save_file(path, [&](std::ostream& out) {
    io::write_header(out, kToyMagic, kToyVersion);
    const auto& prm = model.params();
    out << "params\t" << io::format_double(prm.lambda) << '\t'
        << io::format_double(model.lm().add_k()) << '\t'
        << io::format_double(prm.copy_weight) << '\t'
        << io::format_double(prm.null_weight) << '\t'
        << (prm.coverage ? 1 : 0) << '\t' << (prm.geometric ? 1 : 0) << '\t'
        << io::format_double(prm.jump) << '\n';
    const auto& vocab = model.vocabulary();
    out << "vocab\t" << vocab.size() - 1 << '\n';
    for (std::size_t i = 1; i < vocab.size(); ++i) {
      io::check_field(vocab.token(static_cast<TokenId>(i)));
      out << vocab.token(static_cast<TokenId>(i)) << '\n';
    }
    std::size_t count = 0;
    for (std::size_t c = 0; c <= model.lm().bos(); ++c) {
      count += model.lm().row(c).size();
    }
    out << "bigrams\t" << count << '\n';
    for (std::size_t c = 0; c <= model.lm().bos(); ++c) {
      for (const auto& [t, n] : model.lm().row(c)) {
        out << c << '\t' << t << '\t' << n << '\n';
      }
    }
    out << "lexical\n";
    write_model1_body(out, model.lexical_table());
    out << "end\n";
  });
}

inline ToyModel load_toy(const std::string& path) {
  return io::load_file(path, [](std::istream& in) {
    io::LineReader reader(in, "toy model");
    reader.expect_header(kToyMagic, kToyVersion);
    auto f = reader.fields("params", 8);
    ToyParams prm;
    prm.lambda = reader.number<double>(f[1], "lambda");
    const double add_k = reader.number<double>(f[2], "add-k");
    prm.copy_weight = reader.number<double>(f[3], "copy weight");
    prm.null_weight = reader.number<double>(f[4], "NULL weight");
    prm.coverage = reader.number<int>(f[5], "coverage flag") != 0;
    prm.geometric = reader.number<int>(f[6], "geometric flag") != 0;
    prm.jump = reader.number<double>(f[7], "jump strength");
    const std::size_t v = reader.count_line("vocab");
    TargetVocabulary vocab;
    for (std::size_t i = 0; i < v; ++i) {
      auto tok = reader.next();
      if (tok.empty() || vocab.find(tok)) reader.fail("bad vocabulary entry");
      vocab.add(tok);
    }
    BigramLm lm(vocab.size(), add_k);
    const std::size_t b = reader.count_line("bigrams");
    for (std::size_t i = 0; i < b; ++i) {
      auto g = reader.split_next(3);
      const auto c = reader.number<std::size_t>(g[0], "context");
      const auto t = reader.number<TokenId>(g[1], "token");
      const auto n = reader.number<std::uint64_t>(g[2], "count");
      if (c > lm.bos() || t >= vocab.size()) reader.fail("bigram out of range");
      lm.add_count(c, t, n);
    }
    if (reader.next() != "lexical") reader.fail("expected 'lexical'");
    auto lex = read_model1_body(reader);
    reader.expect_end();
    try {
      return ToyModel(std::move(vocab), std::move(lm), std::move(lex), prm);
    } catch (const InvalidArgument& e) {
      reader.fail(e.what());
    }
  });
}

}  // namespace tmprompt
