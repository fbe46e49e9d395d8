#pragma once

// Backtranslation synthesis, script-ban masks, the iterative adaptation
// loop, and the monolingual-size ablation.

#include <optional>
#include <set>
#include <sstream>
#include <unordered_set>

#include "json.hpp"
#include "nmtadapt/eval.hpp"
#include "nmtadapt/synthlang.hpp"
#include "nmtadapt/trainer.hpp"

namespace nmtadapt {

// ---------------------------------------------------------------------------
// Ban mask
// ---------------------------------------------------------------------------

// A vocabulary id is banned iff its surface contains at least one character
// of a banned script class. Specials (PAD/EOS/language tokens/...) survive.
inline std::vector<char> build_ban_mask(const Vocabulary& vocab, const ScriptRegistry& scripts,
                                        const std::set<std::string>& banned_classes) {
    for (const auto& cls : banned_classes)
        if (!scripts.known(cls))
            throw std::invalid_argument("ban mask: unknown script class: " + cls);
    std::vector<char> mask(vocab.size(), 0);
    for (int id = vocab.n_specials(); id < vocab.size(); ++id) {
        for (char32_t c : utf8::decode(vocab.surface(id))) {
            if (banned_classes.count(scripts.classify_char(c))) {
                mask[id] = 1;
                break;
            }
        }
    }
    return mask;
}

// ---------------------------------------------------------------------------
// Backtranslation datasets
// ---------------------------------------------------------------------------

struct BTMetadata {
    std::string producer;     // id of the model that generated the pairs
    std::string decode;       // "greedy" | "beam"
    int iteration = 0;
    long dropped = 0;         // inputs that yielded empty or excluded output
};

struct BTDataset {
    ParallelCorpus pairs;     // src = synthesized side, tgt = genuine side
    Direction trains;         // direction these pairs are training data for
    BTMetadata meta;
};

namespace detail {

inline std::vector<std::vector<int>> tokenize_all(const std::vector<Sentence>& sentences,
                                                  const Vocabulary& vocab,
                                                  const std::string& lang) {
    std::vector<std::vector<int>> out;
    for (const auto& s : sentences) out.push_back(tokenize(s, vocab, lang).tokens);
    return out;
}

inline std::vector<std::vector<int>> generate_in_chunks(
    const TranslationModel& model, const std::vector<std::vector<int>>& src, int src_tok,
    int tgt_tok, const GenerateConfig& cfg, const std::vector<char>* ban) {
    std::vector<std::vector<int>> out;
    const std::size_t chunk = 64;
    for (std::size_t i = 0; i < src.size(); i += chunk) {
        std::vector<std::vector<int>> part(
            src.begin() + i, src.begin() + std::min(src.size(), i + chunk));
        auto gen = model.generate(part, src_tok, tgt_tok, cfg, ban);
        for (auto& g : gen) out.push_back(std::move(g));
    }
    return out;
}

}  // namespace detail

// Shared synthesis core: translate every genuine sentence, pair the output
// with the original, and drop pairs whose generation is empty or collides
// with an excluded (test) sentence.
inline BTDataset synthesize_bt(const TranslationModel& model, const Vocabulary& vocab,
                               const std::vector<Sentence>& genuine,
                               const std::string& genuine_lang, int encode_lang_token,
                               int target_lang_token, const std::string& synth_lang,
                               Direction trains, const GenerateConfig& decode,
                               const std::vector<char>* ban,
                               const std::unordered_set<std::string>* excluded) {
    BTDataset out;
    out.trains = trains;
    out.meta.decode = decode.mode == GenerateConfig::Mode::kGreedy ? "greedy" : "beam";
    out.pairs.src_lang = synth_lang;
    out.pairs.tgt_lang = genuine_lang;
    if (genuine.empty()) return out;

    auto src_tokens = detail::tokenize_all(genuine, vocab, genuine_lang);
    auto gen = detail::generate_in_chunks(model, src_tokens, encode_lang_token,
                                          target_lang_token, decode, ban);
    for (std::size_t i = 0; i < genuine.size(); ++i) {
        if (gen[i].empty()) {
            ++out.meta.dropped;
            continue;
        }
        TokenSequence t;
        t.tokens = gen[i];
        t.lang = synth_lang;
        Sentence synth = detokenize(t, vocab);
        if (excluded && (excluded->count(synth.text) || excluded->count(genuine[i].text))) {
            ++out.meta.dropped;
            continue;
        }
        out.pairs.pairs.emplace_back(synth, genuine[i]);
    }
    return out;
}

// (Y_En, X_LRL) pairs from low-resource monolingual text, produced by the
// LRL->En model; LRL input is encoded under the high-resource token.
inline BTDataset synthesize_bt_for_en2lrl(const TranslationModel& lrl2en_model,
                                          const Vocabulary& vocab,
                                          const MonolingualCorpus& mono_lrl,
                                          const GenerateConfig& decode, int iteration,
                                          const std::string& producer,
                                          const std::unordered_set<std::string>* excluded =
                                              nullptr) {
    auto out = synthesize_bt(lrl2en_model, vocab, mono_lrl.sentences, "lrl",
                             vocab.lang_token("hrl"), vocab.lang_token("en"), "en",
                             Direction::kEn2Lrl, decode, nullptr, excluded);
    out.meta.iteration = iteration;
    out.meta.producer = producer;
    return out;
}

// (Y_LRL, X_En) pairs from the English side of the parallel corpus, produced
// by the En->LRL model; the script ban applies to generation when active.
inline BTDataset synthesize_bt_for_lrl2en(const TranslationModel& en2lrl_model,
                                          const Vocabulary& vocab,
                                          const std::vector<Sentence>& en_side,
                                          const GenerateConfig& decode,
                                          const std::vector<char>* ban, int iteration,
                                          const std::string& producer,
                                          const std::unordered_set<std::string>* excluded =
                                              nullptr) {
    auto out = synthesize_bt(en2lrl_model, vocab, en_side, "en", vocab.lang_token("en"),
                             vocab.lang_token("lrl"), "lrl", Direction::kLrl2En, decode, ban,
                             excluded);
    out.meta.iteration = iteration;
    out.meta.producer = producer;
    return out;
}

inline void save_bt_dataset(const io::fs::path& dir, const std::string& name,
                            const BTDataset& d) {
    save_parallel_tsv(dir / (name + ".tsv"), d.pairs);
    nlohmann::json meta;
    meta["producer"] = d.meta.producer;
    meta["decode"] = d.meta.decode;
    meta["iteration"] = d.meta.iteration;
    meta["dropped"] = d.meta.dropped;
    meta["pairs"] = d.pairs.pairs.size();
    meta["trains"] = d.trains == Direction::kEn2Lrl ? "en2lrl" : "lrl2en";
    io::atomic_write(dir / (name + ".meta.json"), meta.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Iteration loop
// ---------------------------------------------------------------------------

struct PipelineConfig {
    int k_max = 3;
    double eps_bleu = 0.2;
    ModelDims dims;
    CriticDims critic_dims{64, 16};  // desk-scale override of the full widths
    int pretrain_epochs = 3;
    int supervised_epochs = 6;       // iteration-0 HRL->En
    int epochs_iter1_en2lrl = 20;
    int epochs_iter1_lrl2en = 10;
    int epochs_later = 10;
    TrainConfig train;               // shared optimizer/batching settings
    GenerateConfig decode;           // BT + evaluation decoding
    std::optional<bool> ban_override;  // default: auto by script disjointness
    std::uint64_t seed = 1;
    io::fs::path out_dir;
};

struct IterationRecord {
    int k = 0;
    double dev_bleu_en2lrl = 0, dev_bleu_lrl2en = 0;
    double test_bleu_en2lrl = 0, test_bleu_lrl2en = 0;
};

struct IterationState {
    int k = 0;  // last completed iteration
    bool ban_active = false;
    std::vector<IterationRecord> history;
    std::map<std::string, io::fs::path> checkpoints;
    std::map<std::string, std::string> artifact_hashes;
    io::fs::path manifest_path;
};

namespace detail {

inline std::vector<std::string> translate_corpus(const TranslationModel& model,
                                                 const Vocabulary& vocab,
                                                 const std::vector<Sentence>& src,
                                                 const std::string& src_lang, int src_tok,
                                                 int tgt_tok, const GenerateConfig& cfg,
                                                 const std::vector<char>* ban) {
    auto tokens = tokenize_all(src, vocab, src_lang);
    auto gen = generate_in_chunks(model, tokens, src_tok, tgt_tok, cfg, ban);
    std::vector<std::string> out;
    for (auto& g : gen) {
        TokenSequence t;
        t.tokens = std::move(g);
        out.push_back(detokenize(t, vocab).text);
    }
    return out;
}

inline void record_artifact(IterationState& st, const std::string& name,
                            const io::fs::path& path) {
    st.artifact_hashes[name] = io::file_sha256(path);
}

}  // namespace detail

// The full adaptation recipe. Iteration 0 trains the supervised HRL->En
// model; each following iteration regenerates both backtranslation datasets
// and retrains both directions from the pretrained initialization.
inline IterationState run_iterations(const DatasetBundle& bundle, const PipelineConfig& cfg) {
    if (cfg.k_max < 0) throw std::invalid_argument("pipeline: k_max must be >= 0");
    io::DirLock lock(cfg.out_dir);
    IterationState st;

    ScriptRegistry scripts;
    for (const auto& lang : bundle.languages) scripts.add_language(lang);
    std::vector<const MonolingualCorpus*> monos;
    for (const auto& [id, m] : bundle.mono) monos.push_back(&m);
    Vocabulary vocab = build_vocab(monos, {&bundle.en_hrl}, bundle.languages);
    const std::string vocab_hash = Sha256::hex(vocab.serialize());
    io::atomic_write(cfg.out_dir / "vocab.tsv", vocab.serialize());
    detail::record_artifact(st, "vocab", cfg.out_dir / "vocab.tsv");

    const int en_tok = vocab.lang_token("en");
    const int hrl_tok = vocab.lang_token("hrl");
    const int lrl_tok = vocab.lang_token("lrl");

    // Script ban: auto-enabled when the high- and low-resource scripts are
    // disjoint classes (so any HRL/En token in LRL output is detectable).
    std::string hrl_class, lrl_class, en_class;
    for (const auto& lang : bundle.languages) {
        if (lang.id == "hrl") hrl_class = lang.script_class;
        if (lang.id == "lrl") lrl_class = lang.script_class;
        if (lang.id == "en") en_class = lang.script_class;
    }
    st.ban_active = cfg.ban_override ? *cfg.ban_override : (hrl_class != lrl_class);
    std::vector<char> ban_mask;
    if (st.ban_active)
        ban_mask = build_ban_mask(vocab, scripts, std::set<std::string>{en_class, hrl_class});
    const std::vector<char>* ban = st.ban_active ? &ban_mask : nullptr;

    // Dev/test split of the held-out pairs; both are embargoed from BT data.
    const auto& test_pairs = bundle.test_en_lrl.pairs;
    const std::size_t n_dev = test_pairs.size() / 2;
    std::vector<Sentence> dev_en, dev_lrl, test_en, test_lrl;
    std::unordered_set<std::string> embargo;
    for (std::size_t i = 0; i < test_pairs.size(); ++i) {
        (i < n_dev ? dev_en : test_en).push_back(test_pairs[i].first);
        (i < n_dev ? dev_lrl : test_lrl).push_back(test_pairs[i].second);
        embargo.insert(test_pairs[i].first.text);
        embargo.insert(test_pairs[i].second.text);
    }
    if (dev_en.empty() || test_en.empty())
        throw std::invalid_argument("pipeline: test set too small to split");

    // Tokenized streams reused across phases.
    auto tok_mono = [&](const std::string& lang) {
        return detail::tokenize_all(bundle.mono.at(lang).sentences, vocab, lang);
    };
    auto mono_en_toks = tok_mono("en");
    auto mono_hrl_toks = tok_mono("hrl");
    auto mono_lrl_toks = tok_mono("lrl");
    std::vector<Sentence> par_en, par_hrl;
    for (const auto& [e, h] : bundle.en_hrl.pairs) {
        par_en.push_back(e);
        par_hrl.push_back(h);
    }
    auto par_en_toks = detail::tokenize_all(par_en, vocab, "en");
    auto par_hrl_toks = detail::tokenize_all(par_hrl, vocab, "hrl");

    auto bilingual = [](std::vector<std::vector<int>> src, std::vector<std::vector<int>> tgt) {
        BilingualData d;
        d.src = std::move(src);
        d.tgt = std::move(tgt);
        return d;
    };
    auto bt_tokens = [&](const BTDataset& d, const std::string& src_lang,
                         const std::string& tgt_lang) {
        BilingualData out;
        for (const auto& [s, t] : d.pairs.pairs) {
            out.src.push_back(tokenize(s, vocab, src_lang).tokens);
            out.tgt.push_back(tokenize(t, vocab, tgt_lang).tokens);
        }
        return out;
    };

    auto save_ckpt = [&](const TranslationModel& m, const std::string& name) {
        const auto path = cfg.out_dir / (name + ".ckpt");
        m.save(path, vocab_hash);
        st.checkpoints[name] = path;
        detail::record_artifact(st, name, path);
    };

    std::string metrics_jsonl;
    auto log_metrics = [&](int k, const IterationRecord& rec) {
        MetricsRecord r;
        r.run = "iterate";
        r.step = k;
        r.set("iteration", k);
        r.set("bleu_dev", rec.dev_bleu_lrl2en);
        r.set("bleu_test", rec.test_bleu_lrl2en);
        metrics_jsonl += r.to_jsonl() + "\n";
    };
    std::string train_jsonl;
    auto log_train = [&](const std::string& phase, const TrainLog& tl) {
        for (const auto& u : tl.updates) {
            MetricsRecord r;
            r.run = phase;
            r.step = u.update;
            r.set("loss_translation", u.report.l_t);
            r.set("loss_denoising", u.report.l_da);
            r.set("loss_backtranslation", u.report.l_bt);
            r.set("loss_adv_pair", u.report.l_adv1);
            r.set("loss_adv_english", u.report.l_adv2);
            r.set("loss_adv", u.report.l_adv);
            r.set("generator_total", u.report.generator_total);
            r.set("critic1_total", u.report.critic1_total);
            r.set("critic2_total", u.report.critic2_total);
            train_jsonl += r.to_jsonl() + "\n";
        }
    };

    // --- pretraining (shared initialization for every later phase) ---
    TranslationModel pretrained(vocab, cfg.dims, cfg.seed);
    {
        TrainConfig tc = cfg.train;
        tc.epochs = cfg.pretrain_epochs;
        tc.seed = cfg.seed + 1;
        if (tc.epochs > 0)
            log_train("pretrain", pretrain_denoising(pretrained, vocab, mono_en_toks,
                                                     mono_hrl_toks, mono_lrl_toks, tc));
    }
    save_ckpt(pretrained, "pretrained");
    const auto pretrained_path = cfg.out_dir / "pretrained.ckpt";

    auto fresh_model = [&]() { return TranslationModel::load(pretrained_path, vocab); };

    auto eval_en2lrl = [&](const TranslationModel& m, const std::vector<Sentence>& src_en,
                           const std::vector<Sentence>& ref_lrl) {
        auto hyps = detail::translate_corpus(m, vocab, src_en, "en", en_tok, lrl_tok,
                                             cfg.decode, ban);
        std::vector<std::string> refs;
        for (const auto& s : ref_lrl) refs.push_back(s.text);
        return bleu(hyps, refs);
    };
    auto eval_lrl2en = [&](const TranslationModel& m, const std::vector<Sentence>& src_lrl,
                           const std::vector<Sentence>& ref_en) {
        // LRL input is read under the high-resource token throughout.
        auto hyps = detail::translate_corpus(m, vocab, src_lrl, "lrl", hrl_tok, en_tok,
                                             cfg.decode, nullptr);
        std::vector<std::string> refs;
        for (const auto& s : ref_en) refs.push_back(s.text);
        return bleu(hyps, refs);
    };

    // --- iteration 0: supervised HRL -> En ---
    TranslationModel lrl2en = fresh_model();
    {
        TrainConfig tc = cfg.train;
        tc.direction = Direction::kLrl2En;
        tc.epochs = cfg.supervised_epochs;
        tc.seed = cfg.seed + 2;
        Trainer tr(lrl2en, vocab, tc);
        TrainData data;
        data.parallel = bilingual(par_hrl_toks, par_en_toks);
        log_train("iter0_lrl2en", tr.run(data, /*use_denoising=*/false));
    }
    save_ckpt(lrl2en, "m_lrl2en_iter0");
    {
        IterationRecord rec;
        rec.k = 0;
        rec.dev_bleu_lrl2en = eval_lrl2en(lrl2en, dev_lrl, dev_en);
        rec.test_bleu_lrl2en = eval_lrl2en(lrl2en, test_lrl, test_en);
        st.history.push_back(rec);
        log_metrics(0, rec);
    }

    std::optional<TranslationModel> en2lrl;
    for (int k = 1; k <= cfg.k_max; ++k) {
        IterationRecord rec;
        rec.k = k;

        // -- synthesize (Y_En, X_LRL) with the latest LRL->En model --
        auto bt1 = synthesize_bt_for_en2lrl(lrl2en, vocab, bundle.mono.at("lrl"), cfg.decode, k,
                                            k == 1 ? "m_lrl2en_iter0"
                                                   : "m_lrl2en_iter" + std::to_string(k - 1),
                                            &embargo);
        save_bt_dataset(cfg.out_dir, "bt_en2lrl_iter" + std::to_string(k), bt1);
        detail::record_artifact(st, "bt_en2lrl_iter" + std::to_string(k),
                                cfg.out_dir / ("bt_en2lrl_iter" + std::to_string(k) + ".tsv"));

        // -- train En -> LRL --
        en2lrl.emplace(fresh_model());
        Critic pair_critic(cfg.dims.d_model, cfg.critic_dims, cfg.seed + 10 * k, "pair");
        Critic en_critic(cfg.dims.d_model, cfg.critic_dims, cfg.seed + 10 * k + 1, "en");
        {
            TrainConfig tc = cfg.train;
            tc.epochs = k == 1 ? cfg.epochs_iter1_en2lrl : cfg.epochs_later;
            tc.seed = cfg.seed + 100 * k;
            TrainData data;
            data.parallel = bilingual(par_en_toks, par_hrl_toks);
            data.bt = bt_tokens(bt1, "en", "lrl");
            data.denoise_hrl = mono_hrl_toks;
            data.denoise_lrl = mono_lrl_toks;
            data.adv_hrl = mono_hrl_toks;
            data.adv_lrl = mono_lrl_toks;
            // English critic pool: genuine English plus synthesized English.
            data.adv_en = par_en_toks;
            for (const auto& s : data.bt.src) data.adv_en.push_back(s);
            log_train("iter" + std::to_string(k) + "_en2lrl",
                      train_en2lrl(*en2lrl, pair_critic, en_critic, vocab, data, tc));
            if (!data.bt.empty()) {
                TrainConfig ftc = tc;
                ftc.seed = tc.seed + 1;
                finetune_bt(*en2lrl, vocab, data.bt, Direction::kEn2Lrl, st.ban_active, ftc);
            }
        }
        save_ckpt(*en2lrl, "m_en2lrl_iter" + std::to_string(k));
        rec.dev_bleu_en2lrl = eval_en2lrl(*en2lrl, dev_en, dev_lrl);
        rec.test_bleu_en2lrl = eval_en2lrl(*en2lrl, test_en, test_lrl);

        // -- synthesize (Y_LRL, X_En) with the new En -> LRL model --
        auto bt2 = synthesize_bt_for_lrl2en(*en2lrl, vocab, par_en, cfg.decode, ban, k,
                                            "m_en2lrl_iter" + std::to_string(k), &embargo);
        save_bt_dataset(cfg.out_dir, "bt_lrl2en_iter" + std::to_string(k), bt2);
        detail::record_artifact(st, "bt_lrl2en_iter" + std::to_string(k),
                                cfg.out_dir / ("bt_lrl2en_iter" + std::to_string(k) + ".tsv"));

        // -- train LRL -> En --
        lrl2en = fresh_model();
        Critic pair_critic2(cfg.dims.d_model, cfg.critic_dims, cfg.seed + 10 * k + 2, "pair");
        {
            TrainConfig tc = cfg.train;
            tc.epochs = k == 1 ? cfg.epochs_iter1_lrl2en : cfg.epochs_later;
            tc.seed = cfg.seed + 100 * k + 1;
            TrainData data;
            data.parallel = bilingual(par_hrl_toks, par_en_toks);
            data.bt = bt_tokens(bt2, "lrl", "en");
            data.adv_hrl = mono_hrl_toks;
            data.adv_lrl = mono_lrl_toks;
            log_train("iter" + std::to_string(k) + "_lrl2en",
                      train_lrl2en(lrl2en, pair_critic2, vocab, data, tc));
            if (!data.bt.empty()) {
                TrainConfig ftc = tc;
                ftc.seed = tc.seed + 1;
                finetune_bt(lrl2en, vocab, data.bt, Direction::kLrl2En, false, ftc);
            }
        }
        save_ckpt(lrl2en, "m_lrl2en_iter" + std::to_string(k));
        rec.dev_bleu_lrl2en = eval_lrl2en(lrl2en, dev_lrl, dev_en);
        rec.test_bleu_lrl2en = eval_lrl2en(lrl2en, test_lrl, test_en);

        st.history.push_back(rec);
        log_metrics(k, rec);
        st.k = k;

        // Converged: both directions improved by less than eps.
        if (k >= 2) {
            const auto& prev = st.history[st.history.size() - 2];
            const bool flat_e2l = rec.dev_bleu_en2lrl - prev.dev_bleu_en2lrl < cfg.eps_bleu;
            const bool flat_l2e = rec.dev_bleu_lrl2en - prev.dev_bleu_lrl2en < cfg.eps_bleu;
            if (flat_e2l && flat_l2e) break;
        }
    }

    // JSONL streams carry wall-clock timestamps; hash them with "ts"
    // stripped so identical runs yield identical manifests.
    auto normalized_hash = [](const std::string& jsonl) {
        std::string canon;
        std::istringstream in(jsonl);
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            auto j = nlohmann::json::parse(line);
            j.erase("ts");
            canon += j.dump() + "\n";
        }
        return Sha256::hex(canon);
    };
    io::atomic_write(cfg.out_dir / "metrics.jsonl", metrics_jsonl);
    st.artifact_hashes["metrics"] = normalized_hash(metrics_jsonl);
    io::atomic_write(cfg.out_dir / "train_logs.jsonl", train_jsonl);
    st.artifact_hashes["train_logs"] = normalized_hash(train_jsonl);

    nlohmann::json manifest;
    manifest["iterations_completed"] = st.k;
    manifest["ban_active"] = st.ban_active;
    for (const auto& [name, hash] : st.artifact_hashes) manifest["artifacts"][name] = hash;
    for (const auto& [name, path] : st.checkpoints)
        manifest["checkpoints"][name] = path.filename().string();
    for (const auto& rec : st.history) {
        nlohmann::json j;
        j["k"] = rec.k;
        j["dev_bleu_en2lrl"] = rec.dev_bleu_en2lrl;
        j["dev_bleu_lrl2en"] = rec.dev_bleu_lrl2en;
        j["test_bleu_en2lrl"] = rec.test_bleu_en2lrl;
        j["test_bleu_lrl2en"] = rec.test_bleu_lrl2en;
        manifest["history"].push_back(j);
    }
    st.manifest_path = cfg.out_dir / "manifest.json";
    io::atomic_write(st.manifest_path, manifest.dump(2) + "\n");
    return st;
}

// ---------------------------------------------------------------------------
// Monolingual-size ablation
// ---------------------------------------------------------------------------

// One iteration-1 En->LRL run per monolingual size, everything else fixed.
// Returns (size, test BLEU) rows and writes "size,bleu" CSV.
inline std::vector<std::pair<long, double>> run_mono_ablation(const DatasetBundle& bundle,
                                                              const std::vector<long>& sizes,
                                                              PipelineConfig cfg) {
    const long available = static_cast<long>(bundle.mono.at("lrl").sentences.size());
    long prev = -1;
    for (long s : sizes) {
        if (s <= 0 || s > available)
            throw std::invalid_argument("ablation: size " + std::to_string(s) +
                                        " exceeds available monolingual data");
        if (s < prev) throw std::invalid_argument("ablation: sizes must be ascending");
        prev = s;
    }
    std::vector<std::pair<long, double>> rows;
    std::string csv = "size,bleu\n";
    const io::fs::path root = cfg.out_dir;
    for (std::size_t i = 0; i < sizes.size(); ++i) {
        DatasetBundle cut = bundle;
        auto& mono = cut.mono.at("lrl").sentences;
        mono.resize(static_cast<std::size_t>(sizes[i]));
        PipelineConfig run_cfg = cfg;
        run_cfg.k_max = 1;
        run_cfg.out_dir = root / ("size_" + std::to_string(sizes[i]) + "_row" + std::to_string(i));
        auto st = run_iterations(cut, run_cfg);
        const double score = st.history.back().test_bleu_en2lrl;
        rows.emplace_back(sizes[i], score);
        csv += std::to_string(sizes[i]) + "," + std::to_string(score) + "\n";
    }
    io::fs::create_directories(root);
    io::atomic_write(root / "ablation.csv", csv);
    return rows;
}

}  // namespace nmtadapt
