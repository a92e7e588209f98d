#include <gtest/gtest.h>

#include <fstream>

#include "test_util.hpp"
#include "tmprompt/fragment.hpp"
#include "tmprompt/synthetic.hpp"

using namespace tmprompt;
using testutil::random_tokens;

namespace {

bool is_subsequence(const Tokens& s, const Tokens& of) {
  std::size_t j = 0;
  for (const auto& t : of) {
    if (j < s.size() && s[j] == t) ++j;
  }
  return j == s.size();
}

// Longest common subsequence length by enumerating every subsequence of x.
std::size_t enumerate_lcs(const Tokens& x, const Tokens& y) {
  std::size_t best = 0;
  for (std::uint32_t mask = 0; mask < (1u << x.size()); ++mask) {
    Tokens s;
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (mask & (1u << i)) s.push_back(x[i]);
    }
    if (s.size() > best && is_subsequence(s, y)) best = s.size();
  }
  return best;
}

void expect_valid(const CommonSubsequence& c, const Tokens& x, const Tokens& y) {
  ASSERT_EQ(c.positions_in_x.size(), c.size());
  ASSERT_EQ(c.positions_in_xtm.size(), c.size());
  for (std::size_t k = 0; k < c.size(); ++k) {
    ASSERT_EQ(x.at(c.positions_in_x[k]), c.words[k]);
    ASSERT_EQ(y.at(c.positions_in_xtm[k]), c.words[k]);
    if (k > 0) {
      ASSERT_LT(c.positions_in_x[k - 1], c.positions_in_x[k]);
      ASSERT_LT(c.positions_in_xtm[k - 1], c.positions_in_xtm[k]);
    }
  }
}

const Tokens kInput = tokenize("She gave us a full account of the traffic accident .");
const Tokens kSrcTm = tokenize("She gave the police a full account of the incident .");
const Tokens kTgtTm = tokenize(
    "Sie gab der Polizei einen voll@@ ständigen Bericht über den Vorfall .");

Model1Table example_dictionary() {
  Model1Table dict;
  const std::pair<const char*, const char*> links[] = {
      {"She", "Sie"},     {"gave", "gab"},         {"the", "der"},
      {"the", "den"},     {"police", "Polizei"},   {"a", "einen"},
      {"full", "voll@@"}, {"full", "ständigen"},   {"account", "Bericht"},
      {"of", "über"},     {"incident", "Vorfall"}, {".", "."}};
  for (const auto& [e, f] : links) dict.set(std::string_view(e), f, 0.5);
  return dict;
}

}  // namespace

TEST(Lcs, MatchesEnumerationOnRandomPairs) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 500; ++trial) {
    const auto x = random_tokens(rng, 8, 3);
    const auto y = random_tokens(rng, 8, 3);
    const auto c = lcs(x, y);
    expect_valid(c, x, y);
    ASSERT_EQ(c.size(), enumerate_lcs(x, y)) << join(x) << " | " << join(y);
  }
}

TEST(Lcs, LongerPairsAgreeWithLengthTable) {
  std::mt19937_64 rng(22);
  for (int trial = 0; trial < 300; ++trial) {
    const auto x = random_tokens(rng, 12, 4);
    const auto y = random_tokens(rng, 12, 4);
    // Classic forward DP, written independently of the backtrace.
    std::vector<std::vector<std::size_t>> L(x.size() + 1,
                                            std::vector<std::size_t>(y.size() + 1));
    for (std::size_t i = 1; i <= x.size(); ++i) {
      for (std::size_t j = 1; j <= y.size(); ++j) {
        L[i][j] = x[i - 1] == y[j - 1] ? L[i - 1][j - 1] + 1
                                       : std::max(L[i - 1][j], L[i][j - 1]);
      }
    }
    const auto c = lcs(x, y);
    expect_valid(c, x, y);
    ASSERT_EQ(c.size(), L[x.size()][y.size()]);
  }
}

TEST(Lcs, ExamplePair) {
  const auto c = lcs(kInput, kSrcTm);
  EXPECT_EQ(c.size(), enumerate_lcs(kInput, kSrcTm));
  EXPECT_EQ(c.words, (Tokens{"She", "gave", "a", "full", "account", "of", "the", "."}));
}

TEST(Lcs, TrivialCases) {
  const Tokens s{"a", "b", "c"};
  EXPECT_EQ(lcs(s, s).words, s);
  EXPECT_EQ(lcs({"a"}, {"b"}).size(), 0u);
  EXPECT_EQ(lcs({}, s).size(), 0u);
}

TEST(Lcs, PrefersEarliestTmPositions) {
  const auto c = lcs({"a"}, {"a", "a"});
  ASSERT_EQ(c.size(), 1u);
  EXPECT_EQ(c.positions_in_xtm, (std::vector<std::size_t>{0}));
}

TEST(Fragments, ExamplePairFragments) {
  const auto f = build_fragment_tm(kInput, kSrcTm, kTgtTm, example_dictionary(),
                                   StopWords::builtin("en"), StopWords::builtin("de"));
  EXPECT_EQ(f.source_fragments,
            (std::vector<Tokens>{{"She", "gave"},
                                 {"a", "full", "account", "of", "the"}}));
  EXPECT_EQ(f.target_fragments,
            (std::vector<Tokens>{{"Sie", "gab"},
                                 {"einen", "voll@@", "ständigen", "Bericht", "über",
                                  "den"}}));
}

TEST(Fragments, DisjointGivesEmpty) {
  const auto f = build_fragment_tm({"x", "y"}, {"a", "b"}, {"c", "d"},
                                   example_dictionary(), StopWords(), StopWords());
  EXPECT_TRUE(f.empty());
  EXPECT_TRUE(f.source_fragments.empty());
  EXPECT_TRUE(f.target_fragments.empty());
}

TEST(Fragments, SingleStopWordDropped) {
  Model1Table t;
  t.set(std::string_view("the"), "der", 1.0);
  t.set(std::string_view("house"), "Haus", 1.0);
  t.set(std::string_view("big"), "groß", 1.0);
  // Common subsequence "the" + "house" falls into two runs; "the" alone goes.
  const auto f = build_fragment_tm({"the", "red", "house"},
                                   {"the", "big", "house"}, {"der", "groß", "Haus"},
                                   t, StopWords({"the"}), StopWords({"der"}));
  EXPECT_EQ(f.source_fragments, (std::vector<Tokens>{{"house"}}));
  EXPECT_EQ(f.target_fragments, (std::vector<Tokens>{{"Haus"}}));
}

TEST(Fragments, BoundaryPunctuationTrimmed) {
  Model1Table t;
  t.set(std::string_view("a"), "x", 1.0);
  t.set(std::string_view("b"), "y", 1.0);
  t.set(std::string_view(","), ",", 1.0);
  const auto f = build_fragment_tm({",", "a", "b", ","}, {",", "a", "b", ","},
                                   {",", "x", "y", ","}, t, StopWords(), StopWords());
  EXPECT_EQ(f.source_fragments, (std::vector<Tokens>{{"a", "b"}}));
  EXPECT_EQ(f.target_fragments, (std::vector<Tokens>{{"x", "y"}}));
  EXPECT_EQ(f.source_spans, (std::vector<Span>{{1, 3}}));
}

TEST(Fragments, DiscontiguousTargetsSplitInSourceOrder) {
  Model1Table t;
  t.set(std::string_view("a"), "x", 1.0);
  t.set(std::string_view("b"), "y", 1.0);
  t.set(std::string_view("a"), "z", 1.0);
  t.set(std::string_view("c"), "w", 1.0);
  // Source run "a b" maps to target positions 0, 2 and 3 ("x", "y", "z").
  const auto f = build_fragment_tm({"a", "b"}, {"a", "b", "c"},
                                   {"x", "w", "y", "z"}, t, StopWords(), StopWords());
  EXPECT_EQ(f.source_fragments, (std::vector<Tokens>{{"a", "b"}}));
  EXPECT_EQ(f.target_fragments, (std::vector<Tokens>{{"x"}, {"y", "z"}}));
}

TEST(Fragments, StructuralPropertiesOnSyntheticCorpus) {
  SyntheticOptions opt;
  opt.train_pairs = 400;
  opt.test_pairs = 100;
  opt.prototypes = 40;
  opt.vocab_size = 100;
  opt.final_punct = true;
  const auto corpus = make_synthetic_corpus(opt);
  const auto table = train_model1(corpus.train, 5);
  const auto stop_en = StopWords::builtin("en");
  const auto stop_de = StopWords::builtin("de");
  std::size_t nonempty = 0;
  for (std::size_t k = 0; k < corpus.test_source.size(); ++k) {
    const auto& x = corpus.test_source[k];
    const auto& e = corpus.train.at(k * 3 % corpus.train.size());
    const auto f = build_fragment_tm(x, e.source_tokens, e.target_tokens, table,
                                     stop_en, stop_de);
    nonempty += !f.empty();
    Tokens concat;
    ASSERT_EQ(f.source_fragments.size(), f.source_spans.size());
    for (std::size_t i = 0; i < f.source_fragments.size(); ++i) {
      const auto s = f.source_spans[i];
      ASSERT_EQ(f.source_fragments[i],
                Tokens(e.source_tokens.begin() + static_cast<long>(s.begin),
                       e.source_tokens.begin() + static_cast<long>(s.end)));
      ASSERT_FALSE(is_punct_token(f.source_fragments[i].front()));
      ASSERT_FALSE(is_punct_token(f.source_fragments[i].back()));
      concat.insert(concat.end(), f.source_fragments[i].begin(),
                    f.source_fragments[i].end());
    }
    ASSERT_TRUE(is_subsequence(concat, x));
    for (std::size_t i = 0; i < f.target_fragments.size(); ++i) {
      const auto s = f.target_spans[i];
      ASSERT_EQ(f.target_fragments[i],
                Tokens(e.target_tokens.begin() + static_cast<long>(s.begin),
                       e.target_tokens.begin() + static_cast<long>(s.end)));
      ASSERT_FALSE(f.target_fragments[i].size() == 1 &&
                   stop_de.contains(f.target_fragments[i][0]));
    }
  }
  EXPECT_GT(nonempty, 0u);
}

TEST(StopWords, BuiltinAndFile) {
  const auto en = StopWords::builtin("en");
  EXPECT_TRUE(en.contains("the"));
  EXPECT_TRUE(en.contains("The"));
  EXPECT_FALSE(en.contains("accident"));
  EXPECT_EQ(StopWords::builtin("xx").size(), 0u);

  testutil::TempDir dir("stop");
  std::ofstream(dir.file("s.txt")) << "foo bar # comment\n\nBaz\n";
  const auto s = StopWords::from_file(dir.file("s.txt"));
  EXPECT_EQ(s.size(), 3u);
  EXPECT_TRUE(s.contains("baz"));
  EXPECT_THROW(StopWords::from_file(dir.file("none.txt")), IoError);
}
