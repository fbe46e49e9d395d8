#pragma once

// Text ingestion, filtering, tokenization and the on-disk data model for
// parallel and monolingual corpora.

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "nmtadapt/io.hpp"
#include "nmtadapt/utf8.hpp"

namespace nmtadapt {

inline constexpr const char* kUnkSurface = "⟨unk⟩";  // ⟨unk⟩

struct LanguageTag {
    std::string id;                    // e.g. "en", "hrl", "lrl"
    std::set<char32_t> alphabet;       // characters considered in-alphabet
    std::string script_class;          // e.g. "latin", "scriptA", "scriptB"
};

struct Sentence {
    std::string text;  // UTF-8, no newlines

    bool operator==(const Sentence&) const = default;
};

struct TokenSequence {
    std::vector<int> tokens;
    std::string lang;  // LanguageTag id
};

struct MonolingualCorpus {
    std::string lang;
    std::vector<Sentence> sentences;
};

struct ParallelCorpus {
    std::string src_lang;
    std::string tgt_lang;
    std::vector<std::pair<Sentence, Sentence>> pairs;
};

// Maps characters to script classes; built from the declared language tags.
class ScriptRegistry {
public:
    void add_language(const LanguageTag& lang) {
        for (char32_t c : lang.alphabet) classes_[c] = lang.script_class;
        known_classes_.insert(lang.script_class);
    }

    std::string classify_char(char32_t c) const {
        auto it = classes_.find(c);
        return it == classes_.end() ? "other" : it->second;
    }

    // Single class if the token is script-uniform, "mixed" otherwise;
    // characters outside every declared alphabet count as "other".
    std::string classify_token(std::string_view token) const {
        std::set<std::string> seen;
        for (char32_t c : utf8::decode(token)) seen.insert(classify_char(c));
        if (seen.empty()) return "other";
        if (seen.size() == 1) return *seen.begin();
        return "mixed";
    }

    bool known(const std::string& cls) const {
        return cls == "other" || known_classes_.count(cls) > 0;
    }

private:
    std::map<char32_t, std::string> classes_;
    std::set<std::string> known_classes_;
};

// ---------------------------------------------------------------------------
// Filtering
// ---------------------------------------------------------------------------

struct FilterConfig {
    double max_foreign_ratio = 0.40;
    int min_chars = 30;
    int max_chars = 200;
};

enum class FilterReason { kKeep, kLength, kAlphabet };

struct FilterResult {
    bool keep = false;
    FilterReason reason = FilterReason::kKeep;
};

// Length bounds apply to raw codepoint count; the foreign-character ratio is
// taken over non-whitespace characters only.
inline FilterResult filter_sentence(const Sentence& s, const LanguageTag& lang,
                                    const FilterConfig& cfg) {
    const auto cps = utf8::decode(s.text);
    const int n = static_cast<int>(cps.size());
    if (n < cfg.min_chars || n > cfg.max_chars) return {false, FilterReason::kLength};
    int considered = 0, foreign = 0;
    for (char32_t c : cps) {
        if (c == U' ' || c == U'\t') continue;
        ++considered;
        if (!lang.alphabet.count(c)) ++foreign;
    }
    if (considered > 0 &&
        static_cast<double>(foreign) / considered > cfg.max_foreign_ratio)
        return {false, FilterReason::kAlphabet};
    return {true, FilterReason::kKeep};
}

// ---------------------------------------------------------------------------
// Vocabulary
// ---------------------------------------------------------------------------

enum class TokenizeMode { kWord, kChar };

struct VocabConfig {
    TokenizeMode mode = TokenizeMode::kWord;
};

inline std::vector<std::string> split_words(std::string_view text) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && (text[i] == ' ' || text[i] == '\t')) ++i;
        std::size_t start = i;
        while (i < text.size() && text[i] != ' ' && text[i] != '\t') ++i;
        if (i > start) out.emplace_back(text.substr(start, i - start));
    }
    return out;
}

inline std::vector<std::string> split_tokens(std::string_view text, TokenizeMode mode) {
    if (mode == TokenizeMode::kWord) return split_words(text);
    std::vector<std::string> out;
    for (char32_t c : utf8::decode(text)) {
        std::string s;
        utf8::append(s, c);
        out.push_back(std::move(s));
    }
    return out;
}

class Vocabulary {
public:
    static constexpr int kPad = 0;
    static constexpr int kBos = 1;
    static constexpr int kEos = 2;
    static constexpr int kMask = 3;
    static constexpr int kUnk = 4;

    Vocabulary() = default;

    // Specials first (fixed ids), then one language token per declared
    // language, then regular tokens sorted bytewise so that id assignment is
    // deterministic for a given input set.
    Vocabulary(const std::vector<std::string>& language_ids,
               const std::set<std::string>& tokens, const ScriptRegistry& scripts) {
        add_special("<pad>");
        add_special("<bos>");
        add_special("<eos>");
        add_special("<mask>");
        add_special(kUnkSurface);
        for (const auto& lid : language_ids) {
            lang_token_ids_[lid] = static_cast<int>(surfaces_.size());
            add_special("[" + lid + "]");
        }
        for (const auto& tok : tokens) {
            if (id_of_.count(tok)) continue;  // surface collides with a special
            id_of_[tok] = static_cast<int>(surfaces_.size());
            surfaces_.push_back(tok);
            script_of_.push_back(scripts.classify_token(tok));
        }
    }

    int size() const { return static_cast<int>(surfaces_.size()); }
    int n_specials() const { return n_specials_; }

    bool is_special(int id) const { return id < n_specials_; }

    int lang_token(const std::string& lang_id) const {
        auto it = lang_token_ids_.find(lang_id);
        if (it == lang_token_ids_.end())
            throw std::invalid_argument("unknown language id: " + lang_id);
        return it->second;
    }

    const std::string& surface(int id) const { return surfaces_.at(id); }
    const std::string& script_of(int id) const { return script_of_.at(id); }

    int id(const std::string& token) const {
        auto it = id_of_.find(token);
        return it == id_of_.end() ? kUnk : it->second;
    }

    bool contains(const std::string& token) const { return id_of_.count(token) > 0; }

    const std::vector<std::string>& language_ids_in_order() const { return lang_ids_; }

    std::string serialize() const {
        std::ostringstream out;
        out << "nmtadapt-vocab\tv1\t" << size() << "\n";
        for (int i = 0; i < size(); ++i)
            out << surfaces_[i] << "\t" << i << "\t" << script_of_[i] << "\n";
        return out.str();
    }

    static Vocabulary deserialize(const std::string& text) {
        Vocabulary v;
        std::istringstream in(text);
        std::string header;
        std::getline(in, header);
        if (header.rfind("nmtadapt-vocab\tv1\t", 0) != 0)
            throw std::runtime_error("bad vocabulary header");
        std::string line;
        int next = 0;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            const auto t1 = line.find('\t');
            const auto t2 = line.find('\t', t1 + 1);
            if (t1 == std::string::npos || t2 == std::string::npos)
                throw std::runtime_error("bad vocabulary line: " + line);
            std::string tok = line.substr(0, t1);
            const int id = std::stoi(line.substr(t1 + 1, t2 - t1 - 1));
            if (id != next++) throw std::runtime_error("non-contiguous vocabulary ids");
            v.surfaces_.push_back(tok);
            v.script_of_.push_back(line.substr(t2 + 1));
            v.id_of_[tok] = id;
            if (tok.size() > 2 && tok.front() == '[' && tok.back() == ']' && id >= 5 &&
                v.script_of_.back() == "special") {
                std::string lid = tok.substr(1, tok.size() - 2);
                v.lang_token_ids_[lid] = id;
                v.lang_ids_.push_back(lid);
            }
        }
        v.n_specials_ = 5 + static_cast<int>(v.lang_token_ids_.size());
        return v;
    }

private:
    void add_special(const std::string& surface) {
        id_of_[surface] = static_cast<int>(surfaces_.size());
        surfaces_.push_back(surface);
        script_of_.push_back("special");
        ++n_specials_;
        if (surface.size() > 2 && surface.front() == '[' && surface.back() == ']')
            lang_ids_.push_back(surface.substr(1, surface.size() - 2));
    }

    std::vector<std::string> surfaces_;
    std::vector<std::string> script_of_;
    std::unordered_map<std::string, int> id_of_;
    std::map<std::string, int> lang_token_ids_;
    std::vector<std::string> lang_ids_;
    int n_specials_ = 0;
};

// Deterministic vocabulary over a set of corpora. Token order inside the
// corpora does not matter; the surface set does.
inline Vocabulary build_vocab(const std::vector<const MonolingualCorpus*>& monos,
                              const std::vector<const ParallelCorpus*>& parallels,
                              const std::vector<LanguageTag>& languages,
                              const VocabConfig& cfg = {}) {
    if (monos.empty() && parallels.empty())
        throw std::invalid_argument("build_vocab: no corpora given");
    ScriptRegistry scripts;
    std::vector<std::string> lang_ids;
    for (const auto& l : languages) {
        scripts.add_language(l);
        lang_ids.push_back(l.id);
    }
    std::set<std::string> tokens;
    auto add_text = [&](const std::string& text) {
        for (auto& tok : split_tokens(text, cfg.mode)) tokens.insert(std::move(tok));
    };
    for (const auto* m : monos)
        for (const auto& s : m->sentences) add_text(s.text);
    for (const auto* p : parallels)
        for (const auto& [a, b] : p->pairs) {
            add_text(a.text);
            add_text(b.text);
        }
    return Vocabulary(lang_ids, tokens, scripts);
}

// ---------------------------------------------------------------------------
// Tokenization
// ---------------------------------------------------------------------------

inline TokenSequence tokenize(const Sentence& s, const Vocabulary& v, const std::string& lang,
                              TokenizeMode mode = TokenizeMode::kWord) {
    TokenSequence out;
    out.lang = lang;
    for (const auto& tok : split_tokens(s.text, mode)) out.tokens.push_back(v.id(tok));
    return out;
}

inline Sentence detokenize(const TokenSequence& t, const Vocabulary& v,
                           TokenizeMode mode = TokenizeMode::kWord) {
    std::string text;
    for (std::size_t i = 0; i < t.tokens.size(); ++i) {
        if (mode == TokenizeMode::kWord && i > 0) text += ' ';
        text += v.surface(t.tokens[i]);
    }
    return Sentence{text};
}

// ---------------------------------------------------------------------------
// Corpus files
// ---------------------------------------------------------------------------

inline MonolingualCorpus load_mono(const io::fs::path& path, const std::string& lang) {
    MonolingualCorpus out;
    out.lang = lang;
    auto lines = io::read_lines(path);
    if (!lines.empty() && lines.back().empty()) lines.pop_back();
    for (auto& line : lines) out.sentences.push_back(Sentence{std::move(line)});
    return out;
}

inline ParallelCorpus load_parallel_two_files(const io::fs::path& src_path,
                                              const io::fs::path& tgt_path,
                                              const std::string& src_lang,
                                              const std::string& tgt_lang) {
    auto src = load_mono(src_path, src_lang);
    auto tgt = load_mono(tgt_path, tgt_lang);
    if (src.sentences.size() != tgt.sentences.size())
        throw std::runtime_error("parallel side length mismatch: " +
                                 std::to_string(src.sentences.size()) + " vs " +
                                 std::to_string(tgt.sentences.size()));
    ParallelCorpus out;
    out.src_lang = src_lang;
    out.tgt_lang = tgt_lang;
    out.pairs.reserve(src.sentences.size());
    for (std::size_t i = 0; i < src.sentences.size(); ++i)
        out.pairs.emplace_back(std::move(src.sentences[i]), std::move(tgt.sentences[i]));
    return out;
}

inline ParallelCorpus load_parallel_tsv(const io::fs::path& path, const std::string& src_lang,
                                        const std::string& tgt_lang) {
    ParallelCorpus out;
    out.src_lang = src_lang;
    out.tgt_lang = tgt_lang;
    auto lines = io::read_lines(path);
    if (!lines.empty() && lines.back().empty()) lines.pop_back();
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const std::string& line = lines[i];
        const auto tab = line.find('\t');
        if (tab == std::string::npos || line.find('\t', tab + 1) != std::string::npos)
            throw std::runtime_error("malformed TSV line " + std::to_string(i + 1) + " in " +
                                     path.string());
        out.pairs.emplace_back(Sentence{line.substr(0, tab)}, Sentence{line.substr(tab + 1)});
    }
    return out;
}

inline void save_mono(const io::fs::path& path, const MonolingualCorpus& corpus) {
    std::string text;
    for (const auto& s : corpus.sentences) {
        text += s.text;
        text += '\n';
    }
    io::atomic_write(path, text);
}

inline void save_parallel_tsv(const io::fs::path& path, const ParallelCorpus& corpus) {
    std::string text;
    for (const auto& [a, b] : corpus.pairs) {
        text += a.text;
        text += '\t';
        text += b.text;
        text += '\n';
    }
    io::atomic_write(path, text);
}

}  // namespace nmtadapt
