#pragma once

// Command implementations behind the nmt-adapt binary. Each command maps to
// one library operation; artifacts live under the configured output
// directory and every command either succeeds or fails cleanly.

#include <iostream>
#include <sstream>

#include "nmtadapt/config.hpp"

namespace nmtadapt {

// Missing input artifact (e.g. iterate before synth-data). Exit code 3.
struct PrerequisiteError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace cli {

inline io::fs::path data_dir(const RunConfig& c) { return c.out_dir / "data"; }
inline io::fs::path prepared_dir(const RunConfig& c) { return c.out_dir / "prepared"; }

inline void require(bool ok, const std::string& what) {
    if (!ok) throw PrerequisiteError("missing prerequisite: " + what);
}

inline void echo_effective_config(const RunConfig& cfg) {
    io::fs::create_directories(cfg.out_dir);
    io::atomic_write(cfg.out_dir / "effective_config.json",
                     effective_config_json(cfg).dump(2) + "\n");
}

// --- data persistence -------------------------------------------------------

inline void save_languages(const io::fs::path& path, const std::vector<LanguageTag>& langs) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& l : langs) {
        nlohmann::json t;
        t["id"] = l.id;
        t["script_class"] = l.script_class;
        std::vector<long> cps;
        for (char32_t c : l.alphabet) cps.push_back(static_cast<long>(c));
        t["alphabet"] = cps;
        j.push_back(t);
    }
    io::atomic_write(path, j.dump(2) + "\n");
}

inline std::vector<LanguageTag> load_languages(const io::fs::path& path) {
    auto j = nlohmann::json::parse(io::read_file(path));
    std::vector<LanguageTag> out;
    for (const auto& t : j) {
        LanguageTag l;
        l.id = t.at("id").get<std::string>();
        l.script_class = t.at("script_class").get<std::string>();
        for (long c : t.at("alphabet").get<std::vector<long>>())
            l.alphabet.insert(static_cast<char32_t>(c));
        out.push_back(std::move(l));
    }
    return out;
}

inline void save_bundle(const io::fs::path& dir, const DatasetBundle& b) {
    io::fs::create_directories(dir);
    save_parallel_tsv(dir / "parallel_en_hrl.tsv", b.en_hrl);
    save_parallel_tsv(dir / "test_en_lrl.tsv", b.test_en_lrl);
    for (const auto& [id, m] : b.mono) save_mono(dir / ("mono_" + id + ".txt"), m);
    save_languages(dir / "languages.json", b.languages);
}

inline DatasetBundle load_bundle(const io::fs::path& dir) {
    require(io::fs::exists(dir / "languages.json"), dir.string() + "/languages.json");
    DatasetBundle b;
    b.languages = load_languages(dir / "languages.json");
    b.en_hrl = load_parallel_tsv(dir / "parallel_en_hrl.tsv", "en", "hrl");
    b.test_en_lrl = load_parallel_tsv(dir / "test_en_lrl.tsv", "en", "lrl");
    for (const auto& id : {"en", "hrl", "lrl"})
        b.mono[id] = load_mono(dir / (std::string("mono_") + id + ".txt"), id);
    return b;
}

// Prepared (filtered) data when present, otherwise the raw synthesis.
inline DatasetBundle load_best_bundle(const RunConfig& cfg) {
    if (io::fs::exists(prepared_dir(cfg) / "languages.json"))
        return load_bundle(prepared_dir(cfg));
    require(io::fs::exists(data_dir(cfg) / "languages.json"), "data (run synth-data first)");
    return load_bundle(data_dir(cfg));
}

inline Vocabulary bundle_vocabulary(const DatasetBundle& b) {
    std::vector<const MonolingualCorpus*> monos;
    for (const auto& [id, m] : b.mono) monos.push_back(&m);
    return build_vocab(monos, {&b.en_hrl}, b.languages);
}

// --- commands ---------------------------------------------------------------

inline void cmd_synth_data(const RunConfig& cfg) {
    auto bundle = gen_family(cfg.family);
    save_bundle(data_dir(cfg), bundle);
}

inline void cmd_prepare(const RunConfig& cfg) {
    auto bundle = load_bundle(data_dir(cfg));
    std::map<std::string, LanguageTag> tags;
    for (const auto& l : bundle.languages) tags[l.id] = l;
    nlohmann::json stats;
    auto filter_mono = [&](MonolingualCorpus& m) {
        std::vector<Sentence> kept;
        for (const auto& s : m.sentences)
            if (filter_sentence(s, tags.at(m.lang), cfg.filter).keep) kept.push_back(s);
        stats["mono_" + m.lang] = {{"in", m.sentences.size()}, {"kept", kept.size()}};
        m.sentences = std::move(kept);
    };
    for (auto& [id, m] : bundle.mono) filter_mono(m);
    std::vector<std::pair<Sentence, Sentence>> kept;
    for (const auto& [e, h] : bundle.en_hrl.pairs)
        if (filter_sentence(e, tags.at("en"), cfg.filter).keep &&
            filter_sentence(h, tags.at("hrl"), cfg.filter).keep)
            kept.emplace_back(e, h);
    stats["parallel"] = {{"in", bundle.en_hrl.pairs.size()}, {"kept", kept.size()}};
    bundle.en_hrl.pairs = std::move(kept);
    // The held-out evaluation pairs are never filtered.

    save_bundle(prepared_dir(cfg), bundle);
    auto vocab = bundle_vocabulary(bundle);
    io::atomic_write(prepared_dir(cfg) / "vocab.tsv", vocab.serialize());
    stats["vocab_size"] = vocab.size();
    io::atomic_write(prepared_dir(cfg) / "stats.json", stats.dump(2) + "\n");
}

inline void cmd_pretrain(const RunConfig& cfg) {
    auto bundle = load_best_bundle(cfg);
    auto vocab = bundle_vocabulary(bundle);
    auto toks = [&](const std::string& lang) {
        std::vector<std::vector<int>> out;
        for (const auto& s : bundle.mono.at(lang).sentences)
            out.push_back(tokenize(s, vocab, lang).tokens);
        return out;
    };
    TranslationModel model(vocab, cfg.dims, cfg.seed);
    TrainConfig tc = cfg.train;
    tc.epochs = cfg.pipeline.pretrain_epochs;
    tc.seed = cfg.seed + 1;
    pretrain_denoising(model, vocab, toks("en"), toks("hrl"), toks("lrl"), tc);
    model.save(cfg.out_dir / "pretrained.ckpt", Sha256::hex(vocab.serialize()));
}

namespace impl {

struct Loaded {
    DatasetBundle bundle;
    Vocabulary vocab;
    TranslationModel model;
};

inline Loaded load_model_on_bundle(const RunConfig& cfg, const io::fs::path& ckpt) {
    require(io::fs::exists(ckpt), ckpt.filename().string());
    auto bundle = load_best_bundle(cfg);
    auto vocab = bundle_vocabulary(bundle);
    auto model = TranslationModel::load(ckpt, vocab);
    return Loaded{std::move(bundle), std::move(vocab), std::move(model)};
}

inline std::vector<std::vector<int>> tokenize_side(const std::vector<Sentence>& ss,
                                                   const Vocabulary& v,
                                                   const std::string& lang) {
    std::vector<std::vector<int>> out;
    for (const auto& s : ss) out.push_back(tokenize(s, v, lang).tokens);
    return out;
}

inline std::optional<std::vector<char>> active_ban(const RunConfig& cfg,
                                                   const DatasetBundle& bundle,
                                                   const Vocabulary& vocab) {
    std::string en_class, hrl_class, lrl_class;
    ScriptRegistry reg;
    for (const auto& l : bundle.languages) {
        reg.add_language(l);
        if (l.id == "en") en_class = l.script_class;
        if (l.id == "hrl") hrl_class = l.script_class;
        if (l.id == "lrl") lrl_class = l.script_class;
    }
    const bool active =
        cfg.pipeline.ban_override ? *cfg.pipeline.ban_override : hrl_class != lrl_class;
    if (!active) return std::nullopt;
    return build_ban_mask(vocab, reg, std::set<std::string>{en_class, hrl_class});
}

inline TrainData standalone_data(const RunConfig& cfg, const DatasetBundle& bundle,
                                 const Vocabulary& vocab, Direction dir) {
    TrainData d;
    std::vector<Sentence> en_side, hrl_side;
    for (const auto& [e, h] : bundle.en_hrl.pairs) {
        en_side.push_back(e);
        hrl_side.push_back(h);
    }
    auto en_toks = tokenize_side(en_side, vocab, "en");
    auto hrl_toks = tokenize_side(hrl_side, vocab, "hrl");
    if (dir == Direction::kEn2Lrl) {
        d.parallel.src = en_toks;
        d.parallel.tgt = hrl_toks;
        d.denoise_hrl = tokenize_side(bundle.mono.at("hrl").sentences, vocab, "hrl");
        d.denoise_lrl = tokenize_side(bundle.mono.at("lrl").sentences, vocab, "lrl");
    } else {
        d.parallel.src = hrl_toks;
        d.parallel.tgt = en_toks;
    }
    d.adv_hrl = tokenize_side(bundle.mono.at("hrl").sentences, vocab, "hrl");
    d.adv_lrl = tokenize_side(bundle.mono.at("lrl").sentences, vocab, "lrl");
    d.adv_en = en_toks;

    const char* bt_file = dir == Direction::kEn2Lrl ? "bt_en2lrl.tsv" : "bt_lrl2en.tsv";
    if (io::fs::exists(cfg.out_dir / bt_file)) {
        const bool to_lrl = dir == Direction::kEn2Lrl;
        auto bt = load_parallel_tsv(cfg.out_dir / bt_file, to_lrl ? "en" : "lrl",
                                    to_lrl ? "lrl" : "en");
        for (const auto& [s, t] : bt.pairs) {
            d.bt.src.push_back(tokenize(s, vocab, bt.src_lang).tokens);
            d.bt.tgt.push_back(tokenize(t, vocab, bt.tgt_lang).tokens);
        }
    }
    return d;
}

}  // namespace impl

inline void cmd_train_en2lrl(const RunConfig& cfg) {
    auto L = impl::load_model_on_bundle(cfg, cfg.out_dir / "pretrained.ckpt");
    auto data = impl::standalone_data(cfg, L.bundle, L.vocab, Direction::kEn2Lrl);
    Critic pair_critic(cfg.dims.d_model, cfg.critic_dims, cfg.seed + 10, "pair");
    Critic en_critic(cfg.dims.d_model, cfg.critic_dims, cfg.seed + 11, "en");
    TrainConfig tc = cfg.train;
    tc.seed = cfg.seed + 100;
    train_en2lrl(L.model, pair_critic, en_critic, L.vocab, data, tc);
    if (!data.bt.empty()) {
        const bool ban = impl::active_ban(cfg, L.bundle, L.vocab).has_value();
        finetune_bt(L.model, L.vocab, data.bt, Direction::kEn2Lrl, ban, tc);
    }
    L.model.save(cfg.out_dir / "m_en2lrl.ckpt", Sha256::hex(L.vocab.serialize()));
}

inline void cmd_train_lrl2en(const RunConfig& cfg) {
    auto L = impl::load_model_on_bundle(cfg, cfg.out_dir / "pretrained.ckpt");
    auto data = impl::standalone_data(cfg, L.bundle, L.vocab, Direction::kLrl2En);
    Critic pair_critic(cfg.dims.d_model, cfg.critic_dims, cfg.seed + 12, "pair");
    TrainConfig tc = cfg.train;
    tc.seed = cfg.seed + 101;
    train_lrl2en(L.model, pair_critic, L.vocab, data, tc);
    if (!data.bt.empty()) finetune_bt(L.model, L.vocab, data.bt, Direction::kLrl2En, false, tc);
    L.model.save(cfg.out_dir / "m_lrl2en.ckpt", Sha256::hex(L.vocab.serialize()));
}

inline void cmd_backtranslate(const RunConfig& cfg) {
    const auto l2e_ckpt = cfg.out_dir / "m_lrl2en.ckpt";
    const auto e2l_ckpt = cfg.out_dir / "m_en2lrl.ckpt";
    require(io::fs::exists(l2e_ckpt) || io::fs::exists(e2l_ckpt),
            "a trained checkpoint (run train-lrl2en or train-en2lrl first)");
    auto bundle = load_best_bundle(cfg);
    auto vocab = bundle_vocabulary(bundle);
    if (io::fs::exists(l2e_ckpt)) {
        auto model = TranslationModel::load(l2e_ckpt, vocab);
        auto d = synthesize_bt_for_en2lrl(model, vocab, bundle.mono.at("lrl"), cfg.decode, 0,
                                          "m_lrl2en");
        save_bt_dataset(cfg.out_dir, "bt_en2lrl", d);
    }
    if (io::fs::exists(e2l_ckpt)) {
        auto model = TranslationModel::load(e2l_ckpt, vocab);
        auto ban = impl::active_ban(cfg, bundle, vocab);
        std::vector<Sentence> en_side;
        for (const auto& [e, h] : bundle.en_hrl.pairs) en_side.push_back(e);
        auto d = synthesize_bt_for_lrl2en(model, vocab, en_side, cfg.decode,
                                          ban ? &*ban : nullptr, 0, "m_en2lrl");
        save_bt_dataset(cfg.out_dir, "bt_lrl2en", d);
    }
}

inline void cmd_iterate(const RunConfig& cfg) {
    auto bundle = load_best_bundle(cfg);
    run_iterations(bundle, cfg.resolved_pipeline());
}

inline void cmd_evaluate(const RunConfig& cfg) {
    const auto e2l_ckpt = cfg.out_dir / "m_en2lrl.ckpt";
    const auto l2e_ckpt = cfg.out_dir / "m_lrl2en.ckpt";
    require(io::fs::exists(e2l_ckpt) || io::fs::exists(l2e_ckpt),
            "a trained checkpoint (run train-en2lrl or train-lrl2en first)");
    auto bundle = load_best_bundle(cfg);
    auto vocab = bundle_vocabulary(bundle);
    std::vector<Sentence> test_en, test_lrl;
    for (const auto& [e, l] : bundle.test_en_lrl.pairs) {
        test_en.push_back(e);
        test_lrl.push_back(l);
    }
    nlohmann::json out;
    if (io::fs::exists(e2l_ckpt)) {
        auto model = TranslationModel::load(e2l_ckpt, vocab);
        auto ban = impl::active_ban(cfg, bundle, vocab);
        auto src = impl::tokenize_side(test_en, vocab, "en");
        auto hyp_toks = model.generate(src, vocab.lang_token("en"), vocab.lang_token("lrl"),
                                       cfg.decode, ban ? &*ban : nullptr);
        std::vector<std::string> hyps, refs;
        for (auto& h : hyp_toks) {
            TokenSequence t;
            t.tokens = std::move(h);
            hyps.push_back(detokenize(t, vocab).text);
        }
        for (const auto& s : test_lrl) refs.push_back(s.text);
        out["bleu_en2lrl"] = bleu(hyps, refs, cfg.bleu_cfg);
        std::string lrl_class;
        for (const auto& l : bundle.languages)
            if (l.id == "lrl") lrl_class = l.script_class;
        std::vector<std::vector<int>> retok;
        for (const auto& h : hyps) retok.push_back(tokenize(Sentence{h}, vocab, "lrl").tokens);
        out["script_purity_en2lrl"] = script_purity(retok, vocab, lrl_class);
    }
    if (io::fs::exists(l2e_ckpt)) {
        auto model = TranslationModel::load(l2e_ckpt, vocab);
        auto src = impl::tokenize_side(test_lrl, vocab, "lrl");
        auto hyp_toks = model.generate(src, vocab.lang_token("hrl"), vocab.lang_token("en"),
                                       cfg.decode, nullptr);
        std::vector<std::string> hyps, refs;
        for (auto& h : hyp_toks) {
            TokenSequence t;
            t.tokens = std::move(h);
            hyps.push_back(detokenize(t, vocab).text);
        }
        for (const auto& s : test_en) refs.push_back(s.text);
        out["bleu_lrl2en"] = bleu(hyps, refs, cfg.bleu_cfg);
    }
    io::atomic_write(cfg.out_dir / "eval.json", out.dump(2) + "\n");
}

inline void cmd_ablate(const RunConfig& cfg) {
    auto bundle = load_best_bundle(cfg);
    PipelineConfig p = cfg.resolved_pipeline();
    p.out_dir = cfg.out_dir / "ablation";
    run_mono_ablation(bundle, cfg.ablation_sizes, p);
}

// --- report -----------------------------------------------------------------

namespace impl {

// Minimal standalone SVG line chart: one polyline per series, axis labels,
// linear scales, no external dependencies.
inline std::string svg_line_chart(const std::string& title,
                                  const std::vector<std::pair<
                                      std::string, std::vector<std::pair<double, double>>>>&
                                      series,
                                  const std::string& x_label, const std::string& y_label) {
    const double W = 640, H = 420, ml = 70, mr = 20, mt = 40, mb = 50;
    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (const auto& [name, pts] : series)
        for (const auto& [x, y] : pts) {
            xmin = std::min(xmin, x);
            xmax = std::max(xmax, x);
            ymin = std::min(ymin, y);
            ymax = std::max(ymax, y);
        }
    if (xmin > xmax) xmin = 0, xmax = 1;
    if (ymin > ymax) ymin = 0, ymax = 1;
    if (xmax == xmin) xmax = xmin + 1;
    if (ymax == ymin) ymax = ymin + 1;
    auto X = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * (W - ml - mr); };
    auto Y = [&](double y) { return H - mb - (y - ymin) / (ymax - ymin) * (H - mt - mb); };
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};

    std::ostringstream s;
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    s << "<text x=\"" << W / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"16\">"
      << title << "</text>\n";
    s << "<line x1=\"" << ml << "\" y1=\"" << H - mb << "\" x2=\"" << W - mr << "\" y2=\""
      << H - mb << "\" stroke=\"black\"/>\n";
    s << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << H - mb
      << "\" stroke=\"black\"/>\n";
    s << "<text x=\"" << (ml + W - mr) / 2 << "\" y=\"" << H - 12
      << "\" text-anchor=\"middle\">" << x_label << "</text>\n";
    s << "<text x=\"16\" y=\"" << (mt + H - mb) / 2 << "\" text-anchor=\"middle\" transform=\""
      << "rotate(-90 16 " << (mt + H - mb) / 2 << ")\">" << y_label << "</text>\n";
    for (int tick = 0; tick <= 4; ++tick) {
        const double xv = xmin + tick * (xmax - xmin) / 4;
        const double yv = ymin + tick * (ymax - ymin) / 4;
        s << "<text x=\"" << X(xv) << "\" y=\"" << H - mb + 16 << "\" text-anchor=\"middle\">"
          << xv << "</text>\n";
        s << "<text x=\"" << ml - 6 << "\" y=\"" << Y(yv) + 4 << "\" text-anchor=\"end\">" << yv
          << "</text>\n";
    }
    int si = 0;
    for (const auto& [name, pts] : series) {
        const char* col = colors[si % 5];
        s << "<polyline fill=\"none\" stroke=\"" << col << "\" stroke-width=\"2\" points=\"";
        for (const auto& [x, y] : pts) s << X(x) << "," << Y(y) << " ";
        s << "\"/>\n";
        s << "<text x=\"" << W - mr - 6 << "\" y=\"" << mt + 14 * (si + 1)
          << "\" text-anchor=\"end\" fill=\"" << col << "\">" << name << "</text>\n";
        ++si;
    }
    s << "</svg>\n";
    return s.str();
}

}  // namespace impl

inline void cmd_report(const RunConfig& cfg) {
    const auto run_dir = cfg.out_dir / "run";
    require(io::fs::exists(run_dir / "manifest.json"), "run/manifest.json (run iterate first)");
    const auto report_dir = cfg.out_dir / "report";
    io::fs::create_directories(report_dir);

    auto manifest = nlohmann::json::parse(io::read_file(run_dir / "manifest.json"));
    std::vector<std::pair<double, double>> e2l, l2e;
    for (const auto& h : manifest.at("history")) {
        const double k = h.at("k").get<double>();
        if (k >= 1) e2l.emplace_back(k, h.at("test_bleu_en2lrl").get<double>());
        l2e.emplace_back(k, h.at("test_bleu_lrl2en").get<double>());
    }
    io::atomic_write(report_dir / "bleu_vs_iteration.svg",
                     impl::svg_line_chart("Test BLEU by iteration",
                                          {{"en->lrl", e2l}, {"lrl->en", l2e}}, "iteration",
                                          "BLEU"));

    // Generator loss per update, one series per training phase.
    std::map<std::string, std::vector<std::pair<double, double>>> phases;
    std::istringstream in(io::read_file(run_dir / "train_logs.jsonl"));
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto j = nlohmann::json::parse(line);
        phases[j.at("run").get<std::string>()].emplace_back(
            j.at("step").get<double>(), j.at("generator_total").get<double>());
    }
    std::vector<std::pair<std::string, std::vector<std::pair<double, double>>>> loss_series(
        phases.begin(), phases.end());
    io::atomic_write(report_dir / "loss_curves.svg",
                     impl::svg_line_chart("Generator loss by update", loss_series, "update",
                                          "loss"));

    const auto csv_path = cfg.out_dir / "ablation" / "ablation.csv";
    if (io::fs::exists(csv_path)) {
        std::vector<std::pair<double, double>> pts;
        std::istringstream csv(io::read_file(csv_path));
        std::getline(csv, line);  // header
        while (std::getline(csv, line)) {
            const auto comma = line.find(',');
            if (comma == std::string::npos) continue;
            pts.emplace_back(std::stod(line.substr(0, comma)), std::stod(line.substr(comma + 1)));
        }
        io::atomic_write(report_dir / "bleu_vs_mono.svg",
                         impl::svg_line_chart("Test BLEU by monolingual size",
                                              {{"en->lrl", pts}}, "monolingual sentences",
                                              "BLEU"));
    }
}

// --- dispatch ---------------------------------------------------------------

inline const std::vector<std::string>& command_names() {
    static const std::vector<std::string> names{
        "synth-data", "prepare",       "pretrain", "train-en2lrl", "train-lrl2en",
        "backtranslate", "iterate",    "evaluate", "ablate",       "report"};
    return names;
}

inline void run_command(const std::string& command, const RunConfig& cfg) {
    bool known = false;
    for (const auto& name : command_names()) known |= name == command;
    if (!known) throw std::invalid_argument("unknown command: " + command);
    // One command at a time per output directory.
    io::DirLock lock(cfg.out_dir);
    echo_effective_config(cfg);
    if (command == "synth-data") return cmd_synth_data(cfg);
    if (command == "prepare") return cmd_prepare(cfg);
    if (command == "pretrain") return cmd_pretrain(cfg);
    if (command == "train-en2lrl") return cmd_train_en2lrl(cfg);
    if (command == "train-lrl2en") return cmd_train_lrl2en(cfg);
    if (command == "backtranslate") return cmd_backtranslate(cfg);
    if (command == "iterate") return cmd_iterate(cfg);
    if (command == "evaluate") return cmd_evaluate(cfg);
    if (command == "ablate") return cmd_ablate(cfg);
    if (command == "report") return cmd_report(cfg);
    throw std::invalid_argument("unknown command: " + command);
}

// Exit codes: 0 success, 2 config/usage error, 3 missing prerequisite,
// 4 runtime failure.
inline int execute(const std::string& command, const RunConfig& cfg, bool quiet = false) {
    try {
        run_command(command, cfg);
        return 0;
    } catch (const PrerequisiteError& e) {
        if (!quiet) std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::invalid_argument& e) {
        if (!quiet) std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        if (!quiet) std::cerr << "error: " << e.what() << "\n";
        return 4;
    }
}

}  // namespace cli
}  // namespace nmtadapt
