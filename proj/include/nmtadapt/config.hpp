#pragma once

// Declarative run configuration: JSON in, fully validated RunConfig out,
// with strict unknown-key rejection and an effective-config echo.

#include <set>
#include <string>

#include "json.hpp"
#include "nmtadapt/io.hpp"
#include "nmtadapt/pipeline.hpp"

namespace nmtadapt {

struct RunConfig {
    std::uint64_t seed = 1;
    io::fs::path out_dir = "run";
    FamilyConfig family;
    FilterConfig filter;
    ModelDims dims{16, 2, 1, 1, 32, 64};
    CriticDims critic_dims{64, 16};
    TrainConfig train;
    PipelineConfig pipeline;  // dims/critic/train/seed/out_dir filled from above
    GenerateConfig decode;
    BleuConfig bleu_cfg;
    std::vector<long> ablation_sizes{500, 1000, 2000};

    // The pipeline substructure resolved against the global fields.
    PipelineConfig resolved_pipeline() const {
        PipelineConfig p = pipeline;
        p.dims = dims;
        p.critic_dims = critic_dims;
        p.train = train;
        p.decode = decode;
        p.seed = seed;
        p.out_dir = out_dir / "run";
        return p;
    }
};

namespace cfgdetail {

using nlohmann::json;

[[noreturn]] inline void bad(const std::string& path, const std::string& what) {
    throw std::invalid_argument("config: " + path + ": " + what);
}

inline void expect_keys(const json& j, const std::string& path,
                        const std::set<std::string>& allowed) {
    if (!j.is_object()) bad(path, "expected an object");
    for (const auto& [key, value] : j.items())
        if (!allowed.count(key)) bad(path.empty() ? key : path + "." + key, "unknown key");
}

template <typename T>
void get(const json& j, const std::string& path, const char* key, T& out) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception&) {
        bad(path + "." + key, "wrong type");
    }
}

inline void parse_family(const json& j, FamilyConfig& f) {
    expect_keys(j, "family",
                {"seed", "vocab_size", "n_parallel", "n_mono_lrl", "n_mono_hrl", "n_mono_en",
                 "lex_sub_rate", "spell_noise_rate", "script_remap", "n_test"});
    get(j, "family", "seed", f.seed);
    get(j, "family", "vocab_size", f.vocab_size);
    get(j, "family", "n_parallel", f.n_parallel);
    get(j, "family", "n_mono_lrl", f.n_mono_lrl);
    get(j, "family", "n_mono_hrl", f.n_mono_hrl);
    get(j, "family", "n_mono_en", f.n_mono_en);
    get(j, "family", "lex_sub_rate", f.lex_sub_rate);
    get(j, "family", "spell_noise_rate", f.spell_noise_rate);
    get(j, "family", "script_remap", f.script_remap);
    get(j, "family", "n_test", f.n_test);
    f.validate();
}

inline void parse_filter(const json& j, FilterConfig& f) {
    expect_keys(j, "filter", {"max_foreign_ratio", "min_chars", "max_chars"});
    get(j, "filter", "max_foreign_ratio", f.max_foreign_ratio);
    get(j, "filter", "min_chars", f.min_chars);
    get(j, "filter", "max_chars", f.max_chars);
}

inline void parse_model(const json& j, ModelDims& d, CriticDims& c) {
    expect_keys(j, "model",
                {"d_model", "n_heads", "enc_layers", "dec_layers", "d_ff", "max_len",
                 "critic_fc", "critic_gru"});
    get(j, "model", "d_model", d.d_model);
    get(j, "model", "n_heads", d.n_heads);
    get(j, "model", "enc_layers", d.enc_layers);
    get(j, "model", "dec_layers", d.dec_layers);
    get(j, "model", "d_ff", d.d_ff);
    get(j, "model", "max_len", d.max_len);
    get(j, "model", "critic_fc", c.fc);
    get(j, "model", "critic_gru", c.gru);
    d.validate();
}

inline void parse_train(const json& j, TrainConfig& t) {
    expect_keys(j, "train",
                {"epochs", "accumulation", "critic_cadence", "gen_adv_cadence", "model_lr",
                 "warmup_updates", "critic_lr", "critic_clip", "batch_tokens", "weights",
                 "noise"});
    get(j, "train", "epochs", t.epochs);
    get(j, "train", "accumulation", t.accumulation);
    get(j, "train", "critic_cadence", t.critic_cadence);
    get(j, "train", "gen_adv_cadence", t.gen_adv_cadence);
    get(j, "train", "model_lr", t.model_lr);
    get(j, "train", "warmup_updates", t.warmup_updates);
    get(j, "train", "critic_lr", t.critic_lr);
    get(j, "train", "critic_clip", t.critic_clip);
    get(j, "train", "batch_tokens", t.batch_tokens);
    if (j.contains("weights")) {
        const auto& w = j.at("weights");
        expect_keys(w, "train.weights",
                    {"translation", "denoising", "backtranslation", "adv_multiplier"});
        get(w, "train.weights", "translation", t.weights.translation);
        get(w, "train.weights", "denoising", t.weights.denoising);
        get(w, "train.weights", "backtranslation", t.weights.backtranslation);
        get(w, "train.weights", "adv_multiplier", t.weights.adv_multiplier);
    }
    if (j.contains("noise")) {
        const auto& n = j.at("noise");
        expect_keys(n, "train.noise", {"max_shift", "p_mask"});
        get(n, "train.noise", "max_shift", t.noise.max_shift);
        get(n, "train.noise", "p_mask", t.noise.p_mask);
    }
    t.validate();
}

inline void parse_pipeline(const json& j, PipelineConfig& p) {
    expect_keys(j, "pipeline",
                {"k_max", "eps_bleu", "pretrain_epochs", "supervised_epochs",
                 "epochs_iter1_en2lrl", "epochs_iter1_lrl2en", "epochs_later", "ban"});
    get(j, "pipeline", "k_max", p.k_max);
    get(j, "pipeline", "eps_bleu", p.eps_bleu);
    get(j, "pipeline", "pretrain_epochs", p.pretrain_epochs);
    get(j, "pipeline", "supervised_epochs", p.supervised_epochs);
    get(j, "pipeline", "epochs_iter1_en2lrl", p.epochs_iter1_en2lrl);
    get(j, "pipeline", "epochs_iter1_lrl2en", p.epochs_iter1_lrl2en);
    get(j, "pipeline", "epochs_later", p.epochs_later);
    if (j.contains("ban") && !j.at("ban").is_null()) {
        bool b = false;
        get(j, "pipeline", "ban", b);
        p.ban_override = b;
    }
    if (p.k_max < 0) bad("pipeline.k_max", "must be >= 0");
}

inline void parse_decode(const json& j, GenerateConfig& g) {
    expect_keys(j, "decode", {"mode", "beam_k", "max_len"});
    if (j.contains("mode")) {
        std::string mode;
        get(j, "decode", "mode", mode);
        if (mode == "greedy")
            g.mode = GenerateConfig::Mode::kGreedy;
        else if (mode == "beam")
            g.mode = GenerateConfig::Mode::kBeam;
        else
            bad("decode.mode", "must be \"greedy\" or \"beam\"");
    }
    get(j, "decode", "beam_k", g.beam_k);
    get(j, "decode", "max_len", g.max_len);
    if (g.beam_k < 1 || g.max_len < 2) bad("decode", "beam_k >= 1 and max_len >= 2 required");
}

inline void parse_eval(const json& j, BleuConfig& b) {
    expect_keys(j, "eval", {"bleu_max_order", "bleu_smoothing"});
    get(j, "eval", "bleu_max_order", b.max_order);
    if (j.contains("bleu_smoothing")) {
        std::string s;
        get(j, "eval", "bleu_smoothing", s);
        if (s == "add_one")
            b.smoothing = BleuConfig::Smoothing::kAddOneHigherOrders;
        else if (s == "exact")
            b.smoothing = BleuConfig::Smoothing::kExact;
        else
            bad("eval.bleu_smoothing", "must be \"add_one\" or \"exact\"");
    }
    b.validate();
}

}  // namespace cfgdetail

inline RunConfig parse_run_config(const nlohmann::json& j) {
    using namespace cfgdetail;
    RunConfig cfg;
    expect_keys(j, "",
                {"seed", "out_dir", "family", "filter", "model", "train", "pipeline", "decode",
                 "eval", "ablation_sizes"});
    get(j, "", "seed", cfg.seed);
    std::string out;
    get(j, "", "out_dir", out);
    if (!out.empty()) cfg.out_dir = out;
    if (j.contains("family")) parse_family(j.at("family"), cfg.family);
    if (j.contains("filter")) parse_filter(j.at("filter"), cfg.filter);
    if (j.contains("model")) parse_model(j.at("model"), cfg.dims, cfg.critic_dims);
    if (j.contains("train")) parse_train(j.at("train"), cfg.train);
    if (j.contains("pipeline")) parse_pipeline(j.at("pipeline"), cfg.pipeline);
    if (j.contains("decode")) parse_decode(j.at("decode"), cfg.decode);
    if (j.contains("eval")) parse_eval(j.at("eval"), cfg.bleu_cfg);
    get(j, "", "ablation_sizes", cfg.ablation_sizes);
    cfg.train.seed = cfg.seed;
    return cfg;
}

// Empty or whitespace-only files parse as an all-defaults configuration.
inline RunConfig parse_config(const io::fs::path& path) {
    const std::string text = io::read_file(path);
    bool blank = true;
    for (char c : text) blank &= std::isspace(static_cast<unsigned char>(c)) != 0;
    if (blank) return RunConfig{};
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("config: not valid JSON: ") + e.what());
    }
    return parse_run_config(j);
}

// Fully resolved configuration with every default made explicit.
inline nlohmann::json effective_config_json(const RunConfig& c) {
    nlohmann::json j;
    j["seed"] = c.seed;
    j["out_dir"] = c.out_dir.string();
    auto& f = j["family"];
    f["seed"] = c.family.seed;
    f["vocab_size"] = c.family.vocab_size;
    f["n_parallel"] = c.family.n_parallel;
    f["n_mono_lrl"] = c.family.n_mono_lrl;
    f["n_mono_hrl"] = c.family.n_mono_hrl;
    f["n_mono_en"] = c.family.n_mono_en;
    f["lex_sub_rate"] = c.family.lex_sub_rate;
    f["spell_noise_rate"] = c.family.spell_noise_rate;
    f["script_remap"] = c.family.script_remap;
    f["n_test"] = c.family.n_test;
    auto& fl = j["filter"];
    fl["max_foreign_ratio"] = c.filter.max_foreign_ratio;
    fl["min_chars"] = c.filter.min_chars;
    fl["max_chars"] = c.filter.max_chars;
    auto& m = j["model"];
    m["d_model"] = c.dims.d_model;
    m["n_heads"] = c.dims.n_heads;
    m["enc_layers"] = c.dims.enc_layers;
    m["dec_layers"] = c.dims.dec_layers;
    m["d_ff"] = c.dims.d_ff;
    m["max_len"] = c.dims.max_len;
    m["critic_fc"] = c.critic_dims.fc;
    m["critic_gru"] = c.critic_dims.gru;
    auto& t = j["train"];
    t["epochs"] = c.train.epochs;
    t["accumulation"] = c.train.accumulation;
    t["critic_cadence"] = c.train.critic_cadence;
    t["gen_adv_cadence"] = c.train.gen_adv_cadence;
    t["model_lr"] = c.train.model_lr;
    t["warmup_updates"] = c.train.warmup_updates;
    t["critic_lr"] = c.train.critic_lr;
    t["critic_clip"] = c.train.critic_clip;
    t["batch_tokens"] = c.train.batch_tokens;
    t["weights"]["translation"] = c.train.weights.translation;
    t["weights"]["denoising"] = c.train.weights.denoising;
    t["weights"]["backtranslation"] = c.train.weights.backtranslation;
    t["weights"]["adv_multiplier"] = c.train.weights.adv_multiplier;
    t["noise"]["max_shift"] = c.train.noise.max_shift;
    t["noise"]["p_mask"] = c.train.noise.p_mask;
    auto& p = j["pipeline"];
    p["k_max"] = c.pipeline.k_max;
    p["eps_bleu"] = c.pipeline.eps_bleu;
    p["pretrain_epochs"] = c.pipeline.pretrain_epochs;
    p["supervised_epochs"] = c.pipeline.supervised_epochs;
    p["epochs_iter1_en2lrl"] = c.pipeline.epochs_iter1_en2lrl;
    p["epochs_iter1_lrl2en"] = c.pipeline.epochs_iter1_lrl2en;
    p["epochs_later"] = c.pipeline.epochs_later;
    if (c.pipeline.ban_override)
        p["ban"] = *c.pipeline.ban_override;
    else
        p["ban"] = nullptr;
    auto& d = j["decode"];
    d["mode"] = c.decode.mode == GenerateConfig::Mode::kGreedy ? "greedy" : "beam";
    d["beam_k"] = c.decode.beam_k;
    d["max_len"] = c.decode.max_len;
    auto& e = j["eval"];
    e["bleu_max_order"] = c.bleu_cfg.max_order;
    e["bleu_smoothing"] =
        c.bleu_cfg.smoothing == BleuConfig::Smoothing::kAddOneHigherOrders ? "add_one" : "exact";
    j["ablation_sizes"] = c.ablation_sizes;
    return j;
}

}  // namespace nmtadapt
