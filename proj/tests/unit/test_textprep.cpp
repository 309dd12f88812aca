#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "geoact/errors.hpp"
#include "geoact/textprep.hpp"

using namespace geoact;
using namespace geoact::text;

namespace {

std::string join(const TokenSequence& t) {
    std::string s;
    for (const auto& x : t) {
        if (!s.empty()) s += ' ';
        s += x;
    }
    return s;
}

std::string random_text(std::mt19937_64& rng) {
    static const std::string alphabet = "abcdeHTPS  ..,,!:)(;@#/_-'wx0123456789DDdd";
    std::uniform_int_distribution<std::size_t> len(0, 60), pick(0, alphabet.size() - 1);
    std::string s;
    for (std::size_t n = len(rng); n > 0; --n) s += alphabet[pick(rng)];
    if (rng() % 4 == 0) s += " http://t.co/x";
    if (rng() % 4 == 0) s = "@someone " + s;
    if (rng() % 4 == 0) s += " soooooo :-)";
    return s;
}

}  // namespace

TEST(Normalize, CompressesElongations) {
    EXPECT_EQ(normalize("druuuuuuunk"), TokenSequence{"druunk"});
    EXPECT_EQ(compress_elongations("aaa"), "aa");
    EXPECT_EQ(compress_elongations("aa"), "aa");
    EXPECT_EQ(compress_elongations("\xC3\xA9\xC3\xA9\xC3\xA9!"), "\xC3\xA9\xC3\xA9!");
}

TEST(Normalize, PlaceholdersForMentionsUrlsAndEmoticons) {
    const TokenSequence expected{"#mention", "check", "#url", "#emopos"};
    EXPECT_EQ(normalize("@bob check http://x.co :)"), expected);
    EXPECT_EQ(normalize("so sad :("), (TokenSequence{"so", "sad", "#emoneg"}));
    EXPECT_EQ(normalize("see www.example.com"), (TokenSequence{"see", "#url"}));
}

TEST(Normalize, LowercasesAndSplitsPunctuation) {
    EXPECT_EQ(normalize("Cold BEER, tonight!"), (TokenSequence{"cold", "beer", "tonight"}));
    EXPECT_EQ(normalize("it's"), (TokenSequence{"it", "s"}));
}

TEST(Normalize, KeepsHashtags) {
    EXPECT_EQ(normalize("#TGIF drinks"), (TokenSequence{"#tgif", "drinks"}));
    EXPECT_EQ(normalize("#beer!!"), (TokenSequence{"#beer"}));
}

TEST(Normalize, EmptyAndWhitespace) {
    EXPECT_TRUE(normalize("").empty());
    EXPECT_TRUE(normalize("  \t\n ").empty());
    EXPECT_TRUE(normalize("...!!!").empty());
}

TEST(Normalize, IdempotentOnItsOwnOutput) {
    std::mt19937_64 rng(42);
    for (int i = 0; i < 2000; ++i) {
        const auto text = random_text(rng);
        const auto once = normalize(text);
        EXPECT_EQ(normalize(join(once)), once) << "input: " << text;
    }
}

TEST(Normalize, NoRunOfThreeSurvives) {
    std::mt19937_64 rng(9);
    for (int i = 0; i < 1000; ++i) {
        for (const auto& tok : normalize(random_text(rng) + " aaaaargh")) {
            for (std::size_t k = 2; k < tok.size(); ++k)
                EXPECT_FALSE(tok[k] == tok[k - 1] && tok[k] == tok[k - 2]) << tok;
        }
    }
}

TEST(Ngrams, CountIsThreeKMinusThree) {
    for (std::size_t k = 3; k < 12; ++k) {
        TokenSequence t;
        for (std::size_t i = 0; i < k; ++i) t.push_back("t" + std::to_string(i));
        EXPECT_EQ(extract_ngrams(t).size(), 3 * k - 3) << k;
    }
    EXPECT_EQ(extract_ngrams(TokenSequence{"a", "b"}).size(), 3u);
    EXPECT_EQ(extract_ngrams(TokenSequence{"a"}).size(), 1u);
    EXPECT_TRUE(extract_ngrams(TokenSequence{}).empty());
}

TEST(Ngrams, ContentAndOrder) {
    const TokenSequence t{"cold", "beer", "tonight"};
    const std::vector<std::string> expected{"cold", "beer", "tonight", "cold beer", "beer tonight", "cold beer tonight"};
    EXPECT_EQ(extract_ngrams(t), expected);
    EXPECT_EQ(extract_ngrams(t, 1), (std::vector<std::string>{"cold", "beer", "tonight"}));
}

TEST(Vocab, BudgetIsCeilOfRatio) {
    EXPECT_EQ(vocabulary_budget(8, 0.25), 2u);
    EXPECT_EQ(vocabulary_budget(9, 0.25), 3u);
    EXPECT_EQ(vocabulary_budget(30, 0.1), 3u);
    EXPECT_EQ(vocabulary_budget(0, 0.25), 0u);
}

TEST(Vocab, EightDocsKeepTwo) {
    std::vector<std::vector<std::string>> docs = {
        {"beer", "wine"}, {"beer"}, {"beer", "wine"}, {"tea"}, {"wine"}, {"beer"}, {"coffee"}, {"tea"}};
    const auto v = build_vocab(docs, 0.25);
    ASSERT_EQ(v.size(), 2u);
    EXPECT_EQ(v.ngram(0), "beer");
    EXPECT_EQ(v.ngram(1), "wine");
}

TEST(Vocab, MatchesBruteForceRanking) {
    std::mt19937_64 rng(123);
    std::uniform_int_distribution<int> word(0, 40), len(1, 8);
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<std::vector<std::string>> docs(20 + trial * 3);
        for (auto& d : docs)
            for (int n = len(rng); n > 0; --n) d.push_back("w" + std::to_string(word(rng)));
        const double ratio = 0.1 + 0.05 * (trial % 6);
        const auto v = build_vocab(docs, ratio);

        // Brute force: count documents containing each term, then pick
        // repeatedly the best remaining term.
        std::set<std::string> all;
        for (const auto& d : docs) all.insert(d.begin(), d.end());
        std::map<std::string, int> df;
        for (const auto& term : all)
            for (const auto& d : docs) df[term] += std::find(d.begin(), d.end(), term) != d.end();
        std::vector<std::string> expected;
        const auto budget = static_cast<std::size_t>(std::ceil(ratio * docs.size() - 1e-9));
        while (expected.size() < budget && !df.empty()) {
            auto best = df.begin();
            for (auto it = df.begin(); it != df.end(); ++it)
                if (it->second > best->second) best = it;  // map order already resolves ties
            expected.push_back(best->first);
            df.erase(best);
        }
        EXPECT_EQ(v.entries(), expected) << "trial " << trial;
    }
}

TEST(Vocab, RoundTripsThroughText) {
    const Vocabulary v({"beer", "cold beer", "#url"});
    std::stringstream ss;
    v.write(ss);
    const auto back = Vocabulary::read(ss);
    EXPECT_EQ(back.entries(), v.entries());
    EXPECT_EQ(back.index_of("cold beer"), std::optional<std::uint32_t>(1));
    EXPECT_FALSE(back.index_of("wine"));
}

TEST(Vocab, RejectsBadInput) {
    EXPECT_THROW(build_vocab(std::vector<std::vector<std::string>>{}, 0.25), DataError);
    EXPECT_THROW(Vocabulary({"a", "a"}), DataError);
    std::istringstream gap("0\ta\n2\tb\n");
    EXPECT_THROW(Vocabulary::read(gap), ParseError);
}

TEST(Vectorize, BinaryPresence) {
    const Vocabulary v({"beer", "cold beer", "wine"});
    const auto x = vectorize(TokenSequence{"cold", "beer", "beer"}, v);
    EXPECT_EQ(x, (FeatureVector{{0, 1.0}, {1, 1.0}}));
    EXPECT_TRUE(vectorize(TokenSequence{}, v).empty());
}

TEST(Vectorize, SupportIsVocabIntersection) {
    std::mt19937_64 rng(77);
    std::vector<std::vector<std::string>> docs;
    std::vector<TokenSequence> toks;
    for (int i = 0; i < 200; ++i) {
        toks.push_back(normalize(random_text(rng)));
        docs.push_back(extract_ngrams(toks.back()));
    }
    const auto v = build_vocab(docs, 0.25);
    for (std::size_t i = 0; i < toks.size(); ++i) {
        const auto x = vectorize(toks[i], v);
        std::set<std::uint32_t> expected;
        for (const auto& g : docs[i])
            if (auto idx = v.index_of(g)) expected.insert(*idx);
        std::set<std::uint32_t> got;
        for (const auto& e : x.entries()) {
            got.insert(e.index);
            EXPECT_EQ(e.value, 1.0);
        }
        EXPECT_EQ(got, expected);
    }
}
