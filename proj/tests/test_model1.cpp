#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "test_util.hpp"
#include "tmprompt/model1.hpp"
#include "tmprompt/synthetic.hpp"

using namespace tmprompt;

namespace {

TmStore store_of(const std::vector<std::pair<std::string, std::string>>& pairs) {
  TmStore s("en", "de");
  for (const auto& [a, b] : pairs) s.add(tokenize(a), tokenize(b));
  return s;
}

}  // namespace

TEST(Model1, SingleWordCorpusConverges) {
  std::vector<std::pair<std::string, std::string>> pairs(20, {"a", "x"});
  const auto t = train_model1(store_of(pairs), 5);
  EXPECT_NEAR(t.prob("x", "a"), 1.0, 1e-6);
}

// Hand computation, corpus {"a b" -> "y x", "a" -> "x"}, NULL included,
// uniform start t = 1/2 over {x, y}.
// Iteration 1 posteriors: sentence 1 spreads each target over NULL, a, b
// (1/3 each); sentence 2 puts x on NULL and a (1/2 each).
//   c(x|a) = 1/3 + 1/2 = 5/6, c(y|a) = 1/3  ->  t(x|a) = 5/7, t(y|a) = 2/7
//   c(x|b) = c(y|b) = 1/3                   ->  t(x|b) = 1/2
// Iteration 2: NULL and a share the same table, t(.|b) = 1/2.
//   y in s1: denominators 2/7 + 2/7 + 1/2 = 15/14 -> a gets 4/15
//   x in s1: 5/7 + 5/7 + 1/2 = 27/14            -> a gets 10/27, b 7/27
//   x in s2: a gets 1/2
//   t(x|a) = (10/27 + 1/2) / (10/27 + 1/2 + 4/15) = 235/307
//   t(x|b) = (7/27) / (7/27 + 7/15) = 5/14
TEST(Model1, CrossingCorpusMatchesHandEm) {
  const auto store = store_of({{"a b", "y x"}, {"a", "x"}});
  const auto t1 = train_model1(store, 1);
  EXPECT_NEAR(t1.prob("x", "a"), 5.0 / 7.0, 1e-12);
  EXPECT_NEAR(t1.prob("y", "a"), 2.0 / 7.0, 1e-12);
  EXPECT_NEAR(t1.prob("x", "b"), 0.5, 1e-12);
  EXPECT_NEAR(t1.prob_null("x"), 5.0 / 7.0, 1e-12);

  const auto t2 = train_model1(store, 2);
  EXPECT_NEAR(t2.prob("x", "a"), 235.0 / 307.0, 1e-12);
  EXPECT_NEAR(t2.prob("x", "b"), 5.0 / 14.0, 1e-12);
  EXPECT_GT(t2.prob("x", "a"), t2.prob("y", "a"));
}

TEST(Model1, LikelihoodNonDecreasingAndNormalized) {
  SyntheticOptions opt;
  opt.train_pairs = 300;
  opt.test_pairs = 1;
  opt.prototypes = 40;
  opt.vocab_size = 120;
  const auto corpus = make_synthetic_corpus(opt);
  Model1Trace trace;
  const auto t = train_model1(corpus.train, 8, &trace);
  ASSERT_EQ(trace.log_likelihood.size(), 8u);
  double prev = trace.initial_log_likelihood;
  for (double ll : trace.log_likelihood) {
    EXPECT_GE(ll, prev - 1e-9 * std::abs(prev));
    prev = ll;
  }
  for (double err : trace.max_normalization_error) EXPECT_LE(err, 1e-9);
  EXPECT_LE(t.max_normalization_error(), 1e-9);
}

TEST(Model1, Errors) {
  EXPECT_THROW(train_model1(TmStore("en", "de"), 3), InvalidArgument);
  EXPECT_THROW(train_model1(store_of({{"a", "x"}}), 0), InvalidArgument);
}

TEST(Viterbi, CopyLanguageGivesIdentity) {
  const auto store = store_of({{"a b c", "a b c"}, {"b c", "b c"}, {"a c", "a c"},
                               {"c a b", "c a b"}, {"a", "a"}, {"b", "b"}});
  const auto t = train_model1(store, 10);
  const auto al = align_viterbi(t, {"c", "a", "b"}, {"c", "a", "b"});
  EXPECT_EQ(al.links, (std::vector<std::pair<std::size_t, std::size_t>>{
                          {0, 0}, {1, 1}, {2, 2}}));
}

TEST(Viterbi, NullBestLeavesWordUnlinked) {
  Model1Table t;
  t.set(std::nullopt, "der", 0.9);
  t.set(std::string_view("house"), "Haus", 0.8);
  t.set(std::string_view("house"), "der", 0.2);
  const auto al = align_viterbi(t, {"house"}, {"der", "Haus"});
  EXPECT_EQ(al.links,
            (std::vector<std::pair<std::size_t, std::size_t>>{{0, 1}}));
}

TEST(Viterbi, TiesGoToSmallestPosition) {
  Model1Table t;
  t.set(std::string_view("a"), "x", 0.5);
  t.set(std::string_view("b"), "x", 0.5);
  const auto al = align_viterbi(t, {"b", "a", "b"}, {"x"});
  EXPECT_EQ(al.links,
            (std::vector<std::pair<std::size_t, std::size_t>>{{0, 0}}));
}

TEST(Viterbi, OovWordsAlignNowhere) {
  Model1Table t;
  t.set(std::string_view("a"), "x", 1.0);
  const auto al = align_viterbi(t, {"zzz", "a"}, {"x", "unknown"});
  EXPECT_EQ(al.links,
            (std::vector<std::pair<std::size_t, std::size_t>>{{1, 0}}));
}

// Exhaustive argmax over the trained table, positions scanned in order.
TEST(Viterbi, MatchesExhaustiveArgmax) {
  SyntheticOptions opt;
  opt.train_pairs = 200;
  opt.test_pairs = 1;
  opt.prototypes = 30;
  opt.vocab_size = 80;
  const auto corpus = make_synthetic_corpus(opt);
  const auto t = train_model1(corpus.train, 5);
  for (std::size_t k = 0; k < 50; ++k) {
    const auto& e = corpus.train.at(k);
    const auto al = align_viterbi(t, e.source_tokens, e.target_tokens);
    std::vector<std::pair<std::size_t, std::size_t>> expect;
    for (std::size_t j = 0; j < e.target_tokens.size(); ++j) {
      double best = t.prob_null(e.target_tokens[j]);
      long arg = -1;
      for (std::size_t i = 0; i < e.source_tokens.size(); ++i) {
        const double p = t.prob(e.target_tokens[j], e.source_tokens[i]);
        if (p > best) {
          best = p;
          arg = static_cast<long>(i);
        }
      }
      if (arg >= 0) expect.emplace_back(static_cast<std::size_t>(arg), j);
    }
    ASSERT_EQ(al.links, expect);
  }
}

TEST(Model1Format, RoundTrip) {
  const auto store = store_of({{"a b", "y x"}, {"a", "x"}, {"c", "z"}});
  const auto t = train_model1(store, 3);
  testutil::TempDir dir("m1");
  save_model1(t, dir.file("t.m1"));
  const auto u = load_model1(dir.file("t.m1"));
  for (const char* e : {"a", "b", "c"}) {
    for (const char* f : {"x", "y", "z"}) {
      EXPECT_EQ(u.prob(f, e), t.prob(f, e)) << e << " " << f;
    }
  }
  for (const char* f : {"x", "y", "z"}) EXPECT_EQ(u.prob_null(f), t.prob_null(f));
}

TEST(Model1Format, ExactBytes) {
  Model1Table t;
  t.set(std::nullopt, "x", 0.25);
  t.set(std::string_view("b"), "y", 1.0);
  t.set(std::string_view("a"), "x", 0.1);
  std::ostringstream out;
  write_model1_body(out, t);
  EXPECT_EQ(out.str(),
            "entries\t3\nnull\tx\t0.25\npair\ta\tx\t0.1\npair\tb\ty\t1\n");
}

TEST(Model1Format, BadRecordIsFormatError) {
  testutil::TempDir dir("m1");
  std::ofstream(dir.file("bad.m1")) << "M1TABLE\t1\nentries\t1\nrow\ta\tb\n1\nend\n";
  EXPECT_THROW(load_model1(dir.file("bad.m1")), FormatError);
}
