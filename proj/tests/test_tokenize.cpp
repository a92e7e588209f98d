#include <gtest/gtest.h>

#include <cctype>
#include <random>

#include "tmprompt/tokenize.hpp"
#include "tmprompt/unicode.hpp"

using namespace tmprompt;

TEST(Tokenize, SplitsSentenceFinalPeriod) {
  EXPECT_EQ(tokenize("She gave us a full account of the traffic accident."),
            (Tokens{"She", "gave", "us", "a", "full", "account", "of", "the",
                    "traffic", "accident", "."}));
}

TEST(Tokenize, EmptyAndBlankInput) {
  EXPECT_TRUE(tokenize("").empty());
  EXPECT_TRUE(tokenize(" \t \n").empty());
}

TEST(Tokenize, CommaBetweenWords) {
  EXPECT_EQ(tokenize("a,b"), (Tokens{"a", ",", "b"}));
}

TEST(Tokenize, LeadingAndTrailingPunctuation) {
  EXPECT_EQ(tokenize("(Hello), \"world\"!"),
            (Tokens{"(", "Hello", ")", ",", "\"", "world", "\"", "!"}));
}

TEST(Tokenize, WordInternalJoinersStay) {
  EXPECT_EQ(tokenize("don't e-mail and/or U.S"),
            (Tokens{"don't", "e-mail", "and/or", "U.S"}));
}

TEST(Tokenize, DigitGroupsStay) {
  EXPECT_EQ(tokenize("Resolution 1,325 (2000) costs 3.5."),
            (Tokens{"Resolution", "1,325", "(", "2000", ")", "costs", "3.5",
                    "."}));
}

TEST(Tokenize, BpeMarkerStaysAttached) {
  EXPECT_EQ(tokenize("einen voll@@ ständigen Bericht"),
            (Tokens{"einen", "voll@@", "ständigen", "Bericht"}));
}

TEST(Tokenize, UnicodePunctuation) {
  EXPECT_EQ(tokenize("«Hallo»"), (Tokens{"«", "Hallo", "»"}));
  EXPECT_EQ(tokenize("你好，世界。"), (Tokens{"你好", "，", "世界", "。"}));
}

TEST(Tokenize, RunsOfPunctuationSplitIntoSingles) {
  EXPECT_EQ(tokenize("wait...!"), (Tokens{"wait", ".", ".", ".", "!"}));
}

TEST(Tokenize, IdempotentOnJoinedOutput) {
  const char* samples[] = {
      "She gave the police a full account of the incident.",
      "(a) b, c; d: e! -- f's \"g\" 1,000.5 h/i ...",
      "Sie gab der Polizei einen voll@@ ständigen Bericht über den Vorfall .",
      "«x» — y… z¿ ¡w",
  };
  for (const char* s : samples) {
    const auto once = tokenize(s);
    EXPECT_EQ(tokenize(join(once)), once) << s;
  }
}

TEST(Tokenize, RandomStringsIdempotentAndWhitespaceFree) {
  const std::u32string alphabet = U"ab.,'-()@ \t9ü«»";
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1);
  std::uniform_int_distribution<int> len(0, 20);
  for (int trial = 0; trial < 2000; ++trial) {
    std::u32string s;
    for (int i = len(rng); i > 0; --i) s.push_back(alphabet[pick(rng)]);
    const auto text = unicode::encode(s);
    const auto once = tokenize(text);
    for (const auto& t : once) {
      ASSERT_FALSE(t.empty());
      ASSERT_EQ(t.find_first_of(" \t\n"), std::string::npos) << text;
    }
    ASSERT_EQ(tokenize(join(once)), once) << text;
  }
}

TEST(Normalize, DropsPunctuationAndNumbers) {
  EXPECT_EQ(normalize_for_retrieval({"She", "gave", ".", "42"}),
            (Tokens{"she", "gave"}));
  EXPECT_TRUE(normalize_for_retrieval({}).empty());
  EXPECT_EQ(normalize_for_retrieval({"Resolution", "1325", "(", "2000", ")"}),
            (Tokens{"resolution"}));
}

TEST(Normalize, KeepsMixedTokens) {
  EXPECT_EQ(normalize_for_retrieval({"COVID-19", "3rd", "1,5", "Über"}),
            (Tokens{"covid-19", "3rd", "über"}));
}

// Character-class oracle: a token is dropped iff every character is
// punctuation, or it consists of digits with single separators inside.
TEST(Normalize, MatchesCharacterClassOracle) {
  std::mt19937_64 rng(11);
  const std::string chars = "aZ1.,(";
  std::uniform_int_distribution<std::size_t> pick(0, chars.size() - 1);
  std::uniform_int_distribution<int> len(1, 5);
  for (int trial = 0; trial < 3000; ++trial) {
    std::string t;
    for (int i = len(rng); i > 0; --i) t.push_back(chars[pick(rng)]);
    auto digit = [&](std::size_t i) {
      return std::isdigit(static_cast<unsigned char>(t[i])) != 0;
    };
    bool all_punct = true;
    bool digits_ok = digit(0) && digit(t.size() - 1);
    for (std::size_t i = 0; i < t.size(); ++i) {
      if (std::isalnum(static_cast<unsigned char>(t[i]))) all_punct = false;
      if (!digit(i)) {
        const bool sep = (t[i] == '.' || t[i] == ',') && i > 0 &&
                         i + 1 < t.size() && digit(i - 1) && digit(i + 1);
        if (!sep) digits_ok = false;
      }
    }
    const bool dropped = normalize_for_retrieval({t}).empty();
    ASSERT_EQ(dropped, all_punct || digits_ok) << t;
  }
}

TEST(Normalize, Idempotent) {
  const Tokens t = tokenize("The U.N. adopted Resolution 1325 (2000) on 31 October.");
  const auto n = normalize_for_retrieval(t);
  EXPECT_EQ(normalize_for_retrieval(n), n);
}

TEST(Unicode, LowercaseBeyondAscii) {
  EXPECT_EQ(unicode::to_lower("ÄÖÜ ΣΑΣ Ł"), "äöü σασ ł");
}

TEST(Unicode, InvalidUtf8BecomesReplacement) {
  const auto cps = unicode::decode(std::string("a\xff" "b"));
  ASSERT_EQ(cps.size(), 3u);
  EXPECT_EQ(cps[1], unicode::kReplacement);
}

TEST(Numbers, Recognizer) {
  EXPECT_TRUE(is_number_token("2000"));
  EXPECT_TRUE(is_number_token("1,325"));
  EXPECT_TRUE(is_number_token("3.5"));
  EXPECT_FALSE(is_number_token("3."));
  EXPECT_FALSE(is_number_token(".5"));
  EXPECT_FALSE(is_number_token("1,,2"));
  EXPECT_FALSE(is_number_token("12a"));
  EXPECT_FALSE(is_number_token(""));
}
