#include "nmtadapt/corpus.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

using namespace nmtadapt;

namespace {

LanguageTag latin_tag() {
    LanguageTag t{"en", {}, "latin"};
    for (char32_t c = U'a'; c <= U'z'; ++c) t.alphabet.insert(c);
    return t;
}

LanguageTag upper_tag() {
    LanguageTag t{"hrl", {}, "scriptA"};
    for (char32_t c = U'A'; c <= U'Z'; ++c) t.alphabet.insert(c);
    return t;
}

std::string repeat_word(const std::string& w, int target_chars) {
    std::string out = w;
    while (static_cast<int>(out.size()) < target_chars) out += " " + w;
    return out.substr(0, target_chars);
}

TEST(Filter, ShortSentenceRejectedForLength) {
    Sentence s{repeat_word("abcde", 25)};
    auto r = filter_sentence(s, latin_tag(), {});
    EXPECT_FALSE(r.keep);
    EXPECT_EQ(r.reason, FilterReason::kLength);
}

TEST(Filter, HalfForeignRejectedForAlphabet) {
    // 100 chars, 50% of non-whitespace characters outside the alphabet.
    std::string text;
    for (int i = 0; i < 50; ++i) text += (i % 2 == 0) ? 'a' : 'A';
    text += ' ';
    for (int i = 0; i < 49; ++i) text += (i % 2 == 0) ? 'A' : 'a';
    ASSERT_EQ(text.size(), 100u);
    auto r = filter_sentence(Sentence{text}, latin_tag(), {});
    EXPECT_FALSE(r.keep);
    EXPECT_EQ(r.reason, FilterReason::kAlphabet);
}

TEST(Filter, InAlphabetSentenceKept) {
    Sentence s{repeat_word("abcde", 100)};
    auto r = filter_sentence(s, latin_tag(), {});
    EXPECT_TRUE(r.keep);
}

TEST(Filter, BoundaryLengthsKept) {
    FilterConfig cfg;
    EXPECT_TRUE(filter_sentence(Sentence{repeat_word("ab", 30)}, latin_tag(), cfg).keep);
    EXPECT_TRUE(filter_sentence(Sentence{repeat_word("ab", 200)}, latin_tag(), cfg).keep);
    EXPECT_FALSE(filter_sentence(Sentence{repeat_word("ab", 201)}, latin_tag(), cfg).keep);
}

TEST(Filter, ForeignRatioCountsNonWhitespaceOnly) {
    // 4 in-alphabet + 2 foreign letters = 33% foreign regardless of spacing.
    Sentence s{"aa AA aa"};
    FilterConfig cfg;
    cfg.min_chars = 1;
    EXPECT_TRUE(filter_sentence(s, latin_tag(), cfg).keep);
    cfg.max_foreign_ratio = 0.30;
    EXPECT_FALSE(filter_sentence(s, latin_tag(), cfg).keep);
}

TEST(Filter, Idempotent) {
    Sentence s{repeat_word("abc", 60)};
    auto r1 = filter_sentence(s, latin_tag(), {});
    auto r2 = filter_sentence(s, latin_tag(), {});
    EXPECT_EQ(r1.keep, r2.keep);
    EXPECT_EQ(r1.reason, r2.reason);
}

MonolingualCorpus mono(const std::string& lang, std::vector<std::string> lines) {
    MonolingualCorpus c;
    c.lang = lang;
    for (auto& l : lines) c.sentences.push_back(Sentence{std::move(l)});
    return c;
}

TEST(Vocab, WordLevelEnumeration) {
    auto c = mono("en", {"a b", "b c"});
    auto v = build_vocab({&c}, {}, {latin_tag()});
    EXPECT_EQ(v.size(), v.n_specials() + 3);
    EXPECT_TRUE(v.contains("a"));
    EXPECT_TRUE(v.contains("b"));
    EXPECT_TRUE(v.contains("c"));
    EXPECT_EQ(v.surface(Vocabulary::kPad), "<pad>");
    EXPECT_EQ(v.surface(v.lang_token("en")), "[en]");
}

TEST(Vocab, DeterministicAcrossRuns) {
    auto c1 = mono("en", {"b a", "c b"});
    auto c2 = mono("en", {"c b", "b a"});  // different order, same token set
    auto v1 = build_vocab({&c1}, {}, {latin_tag()});
    auto v2 = build_vocab({&c2}, {}, {latin_tag()});
    EXPECT_EQ(v1.serialize(), v2.serialize());
}

TEST(Vocab, ScriptMetadataMatchesCharClassOracle) {
    auto c = mono("en", {"abc ABC aBc", "zz QQ"});
    auto langs = std::vector<LanguageTag>{latin_tag(), upper_tag()};
    auto v = build_vocab({&c}, {}, langs);
    ScriptRegistry oracle;
    for (const auto& l : langs) oracle.add_language(l);
    for (int id = v.n_specials(); id < v.size(); ++id) {
        std::set<std::string> classes;
        for (char32_t ch : utf8::decode(v.surface(id)))
            classes.insert(oracle.classify_char(ch));
        std::string expect = classes.size() == 1 ? *classes.begin() : "mixed";
        EXPECT_EQ(v.script_of(id), expect) << v.surface(id);
    }
    EXPECT_EQ(v.script_of(v.id("abc")), "latin");
    EXPECT_EQ(v.script_of(v.id("ABC")), "scriptA");
    EXPECT_EQ(v.script_of(v.id("aBc")), "mixed");
}

TEST(Vocab, EmptyCorporaRejected) {
    EXPECT_THROW(build_vocab({}, {}, {latin_tag()}), std::invalid_argument);
}

TEST(Vocab, SerializeRoundTrip) {
    auto c = mono("en", {"a b c", "d aBc"});
    auto v = build_vocab({&c}, {}, {latin_tag(), upper_tag()});
    auto v2 = Vocabulary::deserialize(v.serialize());
    EXPECT_EQ(v.serialize(), v2.serialize());
    EXPECT_EQ(v2.lang_token("hrl"), v.lang_token("hrl"));
    EXPECT_EQ(v2.n_specials(), v.n_specials());
}

TEST(Tokenize, RoundTrip) {
    auto c = mono("en", {"a b"});
    auto v = build_vocab({&c}, {}, {latin_tag()});
    auto t = tokenize(Sentence{"a b"}, v, "en");
    EXPECT_EQ(t.tokens, (std::vector<int>{v.id("a"), v.id("b")}));
    EXPECT_EQ(detokenize(t, v).text, "a b");
}

TEST(Tokenize, EmptyString) {
    auto c = mono("en", {"a"});
    auto v = build_vocab({&c}, {}, {latin_tag()});
    EXPECT_TRUE(tokenize(Sentence{""}, v, "en").tokens.empty());
}

TEST(Tokenize, UnknownWordBecomesUnk) {
    auto c = mono("en", {"a b"});
    auto v = build_vocab({&c}, {}, {latin_tag()});
    auto t = tokenize(Sentence{"a zebra b"}, v, "en");
    ASSERT_EQ(t.tokens.size(), 3u);
    EXPECT_EQ(t.tokens[1], Vocabulary::kUnk);
    EXPECT_EQ(detokenize(t, v).text, std::string("a ") + kUnkSurface + " b");
}

TEST(Tokenize, CharModeRoundTrip) {
    auto c = mono("en", {"ab ba"});
    VocabConfig vc;
    vc.mode = TokenizeMode::kChar;
    auto v = build_vocab({&c}, {}, {latin_tag()}, vc);
    auto t = tokenize(Sentence{"ab ba"}, v, "en", TokenizeMode::kChar);
    EXPECT_EQ(detokenize(t, v, TokenizeMode::kChar).text, "ab ba");
}

class CorpusFiles : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = std::filesystem::temp_directory_path() / "nmtadapt_corpus_test";
        std::filesystem::create_directories(dir_);
    }
    void TearDown() override { std::filesystem::remove_all(dir_); }
    std::filesystem::path write(const std::string& name, const std::string& content) {
        auto p = dir_ / name;
        std::ofstream(p) << content;
        return p;
    }
    std::filesystem::path dir_;
};

TEST_F(CorpusFiles, TwoFileParallelLoads) {
    auto a = write("src.txt", "one\ntwo\nthree\n");
    auto b = write("tgt.txt", "ONE\nTWO\nTHREE\n");
    auto c = load_parallel_two_files(a, b, "en", "hrl");
    ASSERT_EQ(c.pairs.size(), 3u);
    EXPECT_EQ(c.pairs[2].first.text, "three");
    EXPECT_EQ(c.pairs[2].second.text, "THREE");
}

TEST_F(CorpusFiles, SideLengthMismatchFails) {
    auto a = write("src.txt", "1\n2\n3\n");
    auto b = write("tgt.txt", "1\n2\n3\n4\n");
    EXPECT_THROW(load_parallel_two_files(a, b, "en", "hrl"), std::runtime_error);
}

TEST_F(CorpusFiles, EmbeddedTabIsMalformed) {
    auto p = write("pairs.tsv", "a\tb\nc\td\te\nf\tg\n");
    try {
        load_parallel_tsv(p, "en", "hrl");
        FAIL() << "expected malformed-line error";
    } catch (const std::runtime_error& e) {
        EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
    }
}

TEST_F(CorpusFiles, MonoSaveLoadRoundTrip) {
    MonolingualCorpus c = mono("en", {"alpha beta", "gamma"});
    save_mono(dir_ / "m.txt", c);
    auto c2 = load_mono(dir_ / "m.txt", "en");
    ASSERT_EQ(c2.sentences.size(), 2u);
    EXPECT_EQ(c2.sentences[1].text, "gamma");
}

TEST_F(CorpusFiles, ParallelTsvSaveLoadRoundTrip) {
    ParallelCorpus c;
    c.src_lang = "en";
    c.tgt_lang = "hrl";
    c.pairs = {{Sentence{"a b"}, Sentence{"A B"}}, {Sentence{"c"}, Sentence{"C"}}};
    save_parallel_tsv(dir_ / "p.tsv", c);
    auto c2 = load_parallel_tsv(dir_ / "p.tsv", "en", "hrl");
    ASSERT_EQ(c2.pairs.size(), 2u);
    EXPECT_EQ(c2.pairs[0].second.text, "A B");
}

}  // namespace
