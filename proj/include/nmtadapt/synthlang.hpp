#pragma once

// Synthetic related-language family: English from a small probabilistic
// template grammar, a high-resource relative as a word-level bijection of the
// English vocabulary, and a low-resource relative derived from the HRL by a
// dialect lexicon, spelling noise and an optional script remap.

#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include "nmtadapt/corpus.hpp"
#include "nmtadapt/rng.hpp"
#include "nmtadapt/utf8.hpp"

namespace nmtadapt {

struct FamilyConfig {
    std::uint64_t seed = 1;
    int vocab_size = 80;        // English content-word types
    int n_parallel = 2000;      // En-HRL pairs
    int n_mono_lrl = 2000;
    int n_mono_hrl = 0;         // 0 -> same as n_mono_lrl
    int n_mono_en = 0;          // 0 -> same as n_mono_lrl
    double lex_sub_rate = 0.3;  // fraction of word types with a dialect variant
    double spell_noise_rate = 0.1;
    bool script_remap = false;  // write the LRL in a disjoint script
    int n_test = 500;

    void validate() const {
        if (vocab_size < 20) throw std::invalid_argument("family: vocab_size too small");
        if (n_parallel <= 0 || n_mono_lrl <= 0 || n_test <= 0)
            throw std::invalid_argument("family: counts must be positive");
        if (lex_sub_rate < 0 || lex_sub_rate > 1 || spell_noise_rate < 0 || spell_noise_rate > 1)
            throw std::invalid_argument("family: rates must be in [0,1]");
    }
};

struct DatasetBundle {
    ParallelCorpus en_hrl;
    std::map<std::string, MonolingualCorpus> mono;  // "en", "hrl", "lrl"
    ParallelCorpus test_en_lrl;
    std::vector<LanguageTag> languages;             // en, hrl, lrl tags
};

class SynthFamily {
public:
    explicit SynthFamily(const FamilyConfig& cfg) : cfg_(cfg) {
        cfg.validate();
        build_lexicons();
    }

    const FamilyConfig& config() const { return cfg_; }

    LanguageTag en_tag() const {
        LanguageTag t{"en", {}, "latin"};
        for (char32_t c = U'a'; c <= U'z'; ++c) t.alphabet.insert(c);
        return t;
    }

    LanguageTag hrl_tag() const {
        LanguageTag t{"hrl", {}, "scriptA"};
        for (char32_t c = U'A'; c <= U'Z'; ++c) t.alphabet.insert(c);
        return t;
    }

    LanguageTag lrl_tag() const {
        if (!cfg_.script_remap) {
            LanguageTag t = hrl_tag();
            t.id = "lrl";
            return t;
        }
        LanguageTag t{"lrl", {}, "scriptB"};
        for (int k = 0; k < 26; ++k) t.alphabet.insert(static_cast<char32_t>(U'α' + k));
        return t;
    }

    // Word-for-word translation En -> HRL; the reference for every test pair.
    Sentence en_to_hrl(const Sentence& s) const {
        std::string out;
        for (const auto& w : split_words(s.text)) {
            if (!out.empty()) out += ' ';
            auto it = en_to_hrl_.find(w);
            if (it == en_to_hrl_.end()) throw std::logic_error("unknown En word: " + w);
            out += it->second;
        }
        return Sentence{out};
    }

    // Dialect transform. Word count is preserved: substitution is word for
    // word and spelling noise never deletes a character.
    Sentence hrl_to_lrl(const Sentence& s, std::mt19937_64& rng) const {
        std::string out;
        for (const auto& w : split_words(s.text)) {
            if (!out.empty()) out += ' ';
            std::string word = w;
            auto it = dialect_lexicon_.find(word);
            if (it != dialect_lexicon_.end()) word = it->second;
            if (cfg_.spell_noise_rate > 0 && uniform01(rng) < cfg_.spell_noise_rate)
                word = spell_perturb(word, rng);
            if (cfg_.script_remap) word = remap_script(word);
            out += word;
        }
        return Sentence{out};
    }

    Sentence generate_en(std::mt19937_64& rng) const {
        std::string out;
        auto emit = [&](const std::string& w) {
            if (!out.empty()) out += ' ';
            out += w;
        };
        auto pick = [&](const std::vector<std::string>& pool) -> const std::string& {
            return pool[uniform_below(rng, pool.size())];
        };
        auto noun_phrase = [&]() {
            emit(pick(determiners_));
            if (uniform01(rng) < 0.5) emit(pick(adjectives_));
            emit(pick(nouns_));
        };
        noun_phrase();
        emit(pick(verbs_));
        noun_phrase();
        if (uniform01(rng) < 0.5) emit(pick(adverbs_));
        if (uniform01(rng) < 0.25) {
            emit(conjunction_);
            noun_phrase();
            emit(pick(verbs_));
            noun_phrase();
        }
        return Sentence{out};
    }

    const std::map<std::string, std::string>& dialect_lexicon() const { return dialect_lexicon_; }
    const std::map<std::string, std::string>& en_hrl_lexicon() const { return en_to_hrl_; }

    DatasetBundle generate() const {
        DatasetBundle b;
        b.languages = {en_tag(), hrl_tag(), lrl_tag()};
        const int n_mono_hrl = cfg_.n_mono_hrl > 0 ? cfg_.n_mono_hrl : cfg_.n_mono_lrl;
        const int n_mono_en = cfg_.n_mono_en > 0 ? cfg_.n_mono_en : cfg_.n_mono_lrl;

        // One RNG stream per sentence index so generation order never
        // influences content.
        std::uint64_t index = 0;
        std::unordered_set<std::string> train_en;
        auto next_en = [&]() {
            for (;;) {
                auto g = make_stream(cfg_.seed, index++);
                Sentence s = generate_en(g);
                const std::size_t len = utf8::length(s.text);
                if (len >= 30 && len <= 200) return s;
            }
        };

        b.en_hrl.src_lang = "en";
        b.en_hrl.tgt_lang = "hrl";
        for (int i = 0; i < cfg_.n_parallel; ++i) {
            Sentence en = next_en();
            train_en.insert(en.text);
            b.en_hrl.pairs.emplace_back(en, en_to_hrl(en));
        }

        auto& mono_hrl = b.mono["hrl"];
        mono_hrl.lang = "hrl";
        for (int i = 0; i < n_mono_hrl; ++i) {
            Sentence en = next_en();
            train_en.insert(en.text);
            mono_hrl.sentences.push_back(en_to_hrl(en));
        }

        auto& mono_lrl = b.mono["lrl"];
        mono_lrl.lang = "lrl";
        for (int i = 0; i < cfg_.n_mono_lrl; ++i) {
            Sentence en = next_en();
            train_en.insert(en.text);
            auto g = make_stream(cfg_.seed ^ 0x1717ULL, index);
            mono_lrl.sentences.push_back(hrl_to_lrl(en_to_hrl(en), g));
        }

        auto& mono_en = b.mono["en"];
        mono_en.lang = "en";
        for (int i = 0; i < n_mono_en; ++i) {
            Sentence en = next_en();
            train_en.insert(en.text);
            mono_en.sentences.push_back(en);
        }

        b.test_en_lrl.src_lang = "en";
        b.test_en_lrl.tgt_lang = "lrl";
        while (static_cast<int>(b.test_en_lrl.pairs.size()) < cfg_.n_test) {
            Sentence en = next_en();
            if (train_en.count(en.text)) continue;  // keep the test set disjoint
            auto g = make_stream(cfg_.seed ^ 0x2929ULL, index);
            b.test_en_lrl.pairs.emplace_back(en, hrl_to_lrl(en_to_hrl(en), g));
        }
        return b;
    }

private:
    static std::string make_word(std::mt19937_64& g, const char* consonants, const char* vowels,
                                 int n_syllables) {
        const std::size_t nc = std::string(consonants).size();
        const std::size_t nv = std::string(vowels).size();
        std::string w;
        for (int s = 0; s < n_syllables; ++s) {
            w += consonants[uniform_below(g, nc)];
            w += vowels[uniform_below(g, nv)];
            if (uniform01(g) < 0.3) w += consonants[uniform_below(g, nc)];
        }
        return w;
    }

    void build_lexicons() {
        const char* en_c = "bcdfghjklmnprstvz";
        const char* en_v = "aeiou";
        const char* hrl_c = "BCDFGHJKLMNPRSTVZ";
        const char* hrl_v = "AEIOU";

        auto gen_pool = [&](std::uint64_t salt, int count, const char* cs, const char* vs,
                            std::set<std::string>& used) {
            std::vector<std::string> pool;
            auto g = make_stream(cfg_.seed ^ salt, 0);
            while (static_cast<int>(pool.size()) < count) {
                std::string w = make_word(g, cs, vs, 2 + static_cast<int>(uniform_below(g, 2)));
                if (used.insert(w).second) pool.push_back(std::move(w));
            }
            return pool;
        };

        std::set<std::string> used_en, used_hrl;
        const int v = cfg_.vocab_size;
        const int n_nouns = std::max(4, v * 2 / 5);
        const int n_verbs = std::max(3, v / 4);
        const int n_adj = std::max(3, v / 5);
        const int n_adv = std::max(2, v - n_nouns - n_verbs - n_adj - 5);
        determiners_ = gen_pool(0xD1ULL, 4, en_c, en_v, used_en);
        nouns_ = gen_pool(0xD2ULL, n_nouns, en_c, en_v, used_en);
        verbs_ = gen_pool(0xD3ULL, n_verbs, en_c, en_v, used_en);
        adjectives_ = gen_pool(0xD4ULL, n_adj, en_c, en_v, used_en);
        adverbs_ = gen_pool(0xD5ULL, n_adv, en_c, en_v, used_en);
        conjunction_ = gen_pool(0xD6ULL, 1, en_c, en_v, used_en)[0];

        std::vector<std::string> all_en(used_en.begin(), used_en.end());
        auto hrl_words = gen_pool(0xE1ULL, static_cast<int>(all_en.size()), hrl_c, hrl_v, used_hrl);
        for (std::size_t i = 0; i < all_en.size(); ++i) en_to_hrl_[all_en[i]] = hrl_words[i];

        // Dialect lexicon: each HRL type gets a variant with probability
        // lex_sub_rate; membership is a property of the family, so the
        // divergence between HRL and LRL is systematic and learnable.
        auto lex_g = make_stream(cfg_.seed ^ 0xF1ULL, 0);
        auto var_g = make_stream(cfg_.seed ^ 0xF2ULL, 0);
        for (const auto& w : hrl_words) {
            if (uniform01(lex_g) < cfg_.lex_sub_rate) {
                std::string variant;
                do {
                    variant = make_word(var_g, hrl_c, hrl_v, 2 + static_cast<int>(uniform_below(var_g, 2)));
                } while (!used_hrl.insert(variant).second);
                dialect_lexicon_[w] = variant;
            }
        }
    }

    // Single-character substitution from a fixed confusion map (the next
    // letter in the HRL alphabet), at a random position.
    std::string spell_perturb(const std::string& w, std::mt19937_64& rng) const {
        std::string out = w;
        const std::size_t pos = uniform_below(rng, out.size());
        char c = out[pos];
        if (c >= 'A' && c <= 'Z') out[pos] = static_cast<char>('A' + (c - 'A' + 1) % 26);
        return out;
    }

    std::string remap_script(const std::string& w) const {
        // Bijection: 'A' + k -> U+03B1 + k, 26 consecutive Greek codepoints.
        std::string out;
        for (char c : w) {
            if (c >= 'A' && c <= 'Z') {
                utf8::append(out, static_cast<char32_t>(U'α' + (c - 'A')));
            } else {
                out.push_back(c);
            }
        }
        return out;
    }

    FamilyConfig cfg_;
    std::vector<std::string> determiners_, nouns_, verbs_, adjectives_, adverbs_;
    std::string conjunction_;
    std::map<std::string, std::string> en_to_hrl_;
    std::map<std::string, std::string> dialect_lexicon_;
};

inline DatasetBundle gen_family(const FamilyConfig& cfg) { return SynthFamily(cfg).generate(); }

}  // namespace nmtadapt
