#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "tmprompt/bleu.hpp"
#include "tmprompt/tokenize.hpp"

using namespace tmprompt;

TEST(Bleu, IdenticalIsExactlyHundred) {
  const std::vector<Tokens> h = {tokenize("the cat sat on the mat ."),
                                 tokenize("a dog barked loudly at night")};
  const auto r = corpus_bleu(h, h);
  EXPECT_EQ(r.bleu, 100.0);
  EXPECT_EQ(r.brevity_penalty, 1.0);
}

// Hand count.
//   h1 = "the cat sat on the mat"      r1 = "the cat sat on a mat"
//   h2 = "a dog ran"                   r2 = "a dog ran away"
// unigrams: h1 6 total, matches the cat sat on mat = 5 ("the" x2 clipped
//           to 1); h2 3/3                       -> 8/9
// bigrams:  h1 5 total, matches "the cat" "cat sat" "sat on" = 3;
//           h2 "a dog" "dog ran" = 2/2         -> 5/7
// trigrams: h1 4 total, "the cat sat" "cat sat on" = 2; h2 1/1 -> 3/5
// 4-grams:  h1 3 total, "the cat sat on" = 1; h2 0/0            -> 1/3
// lengths: hyp 9, ref 10 -> BP = exp(1 - 10/9)
TEST(Bleu, TwoSentenceHandExample) {
  const std::vector<Tokens> h = {tokenize("the cat sat on the mat"),
                                 tokenize("a dog ran")};
  const std::vector<Tokens> r = {tokenize("the cat sat on a mat"),
                                 tokenize("a dog ran away")};
  const auto b = corpus_bleu(h, r);
  const double expect = 100.0 * std::exp(1.0 - 10.0 / 9.0) *
                        std::pow((8.0 / 9.0) * (5.0 / 7.0) * (3.0 / 5.0) * (1.0 / 3.0),
                                 0.25);
  EXPECT_NEAR(b.bleu, expect, 1e-6);
  EXPECT_EQ(b.matches[0], 8u);
  EXPECT_EQ(b.totals[3], 3u);
  EXPECT_EQ(b.hyp_length, 9u);
  EXPECT_EQ(b.ref_length, 10u);
}

TEST(Bleu, NoFourGramMatchIsZero) {
  const std::vector<Tokens> h = {tokenize("a b c x d e f")};
  const std::vector<Tokens> r = {tokenize("a b c y d e f")};
  const auto b = corpus_bleu(h, r);
  EXPECT_EQ(b.matches[3], 0u);
  EXPECT_GT(b.matches[2], 0u);
  EXPECT_EQ(b.bleu, 0.0);
}

TEST(Bleu, LongerHypothesisHasNoPenalty) {
  const auto b = corpus_bleu({tokenize("a b c d e")}, {tokenize("a b c d")});
  EXPECT_EQ(b.brevity_penalty, 1.0);
}

TEST(Bleu, EmptyAndMismatched) {
  EXPECT_EQ(corpus_bleu({}, {}).bleu, 0.0);
  EXPECT_EQ(corpus_bleu({{}}, {tokenize("a b c d")}).bleu, 0.0);
  EXPECT_THROW(corpus_bleu({{"a"}}, {}), InvalidArgument);
}

TEST(Bleu, PermutationInvariant) {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> sym(0, 2), len(5, 12);
  std::vector<Tokens> h, r;
  for (int i = 0; i < 40; ++i) {
    Tokens a, b;
    for (int n = len(rng); n > 0; --n) a.push_back(std::string(1, 'a' + sym(rng)));
    for (int n = len(rng); n > 0; --n) b.push_back(std::string(1, 'a' + sym(rng)));
    h.push_back(a);
    r.push_back(b);
  }
  const double base = corpus_bleu(h, r).bleu;
  ASSERT_GT(base, 0.0);
  std::vector<std::size_t> order(h.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (int trial = 0; trial < 5; ++trial) {
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<Tokens> hp, rp;
    for (auto i : order) {
      hp.push_back(h[i]);
      rp.push_back(r[i]);
    }
    EXPECT_EQ(corpus_bleu(hp, rp).bleu, base);
  }
}

TEST(SentenceBleu, SmoothedAndBounded) {
  EXPECT_NEAR(sentence_bleu(tokenize("a b c"), tokenize("a b c")), 100.0, 1e-9);
  EXPECT_GT(sentence_bleu(tokenize("a b x"), tokenize("a b c")), 0.0);
  EXPECT_EQ(sentence_bleu(tokenize("x y"), tokenize("a b")), 0.0);
  EXPECT_EQ(sentence_bleu({}, tokenize("a")), 0.0);
}
