#include "nmtadapt/pipeline.hpp"

#include <gtest/gtest.h>

#include <fstream>

using namespace nmtadapt;

namespace {

// ---------------------------------------------------------------------------
// Ban mask
// ---------------------------------------------------------------------------

struct ScriptedFixture {
    ScriptRegistry reg;
    Vocabulary vocab;
};

ScriptedFixture scripted_fixture() {
    LanguageTag latin{"hrl", {}, "latin"};
    for (char c = 'a'; c <= 'z'; ++c) latin.alphabet.insert(static_cast<char32_t>(c));
    LanguageTag greekish{"lrl", {}, "scriptB"};
    for (int k = 0; k < 26; ++k) greekish.alphabet.insert(static_cast<char32_t>(0x3B1 + k));
    ScriptRegistry reg;
    reg.add_language(latin);
    reg.add_language(greekish);
    std::string kl, ak;
    utf8::append(kl, 0x3BA);
    utf8::append(kl, 0x3BB);
    ak = "a";
    utf8::append(ak, 0x3BA);
    Vocabulary v({"hrl", "lrl"}, {"ab", kl, ak}, reg);
    return {reg, v};
}

TEST(BanMask, MatchesPerCharacterOracle) {
    auto fx = scripted_fixture();
    std::string kl, ak;
    utf8::append(kl, 0x3BA);
    utf8::append(kl, 0x3BB);
    ak = "a";
    utf8::append(ak, 0x3BA);

    auto mask = build_ban_mask(fx.vocab, fx.reg, {"latin"});
    // Oracle: banned iff any character classifies into a banned class.
    for (int id = 0; id < fx.vocab.size(); ++id) {
        bool expect = false;
        if (!fx.vocab.is_special(id))
            for (char32_t c : utf8::decode(fx.vocab.surface(id)))
                if (fx.reg.classify_char(c) == "latin") expect = true;
        EXPECT_EQ(static_cast<bool>(mask[id]), expect) << "id " << id;
    }
    EXPECT_TRUE(mask[fx.vocab.id("ab")]);
    EXPECT_TRUE(mask[fx.vocab.id(ak)]);  // mixed token contains a banned char
    EXPECT_FALSE(mask[fx.vocab.id(kl)]);
}

TEST(BanMask, SpecialsAreNeverBanned) {
    auto fx = scripted_fixture();
    auto mask = build_ban_mask(fx.vocab, fx.reg, {"latin", "scriptB"});
    for (int id = 0; id < fx.vocab.n_specials(); ++id) EXPECT_FALSE(mask[id]);
    for (const auto& lang : {"hrl", "lrl"}) EXPECT_FALSE(mask[fx.vocab.lang_token(lang)]);
}

TEST(BanMask, EmptyBanSetBansNothing) {
    auto fx = scripted_fixture();
    auto mask = build_ban_mask(fx.vocab, fx.reg, {});
    for (char b : mask) EXPECT_FALSE(b);
}

TEST(BanMask, UnknownClassIsRejected) {
    auto fx = scripted_fixture();
    EXPECT_THROW(build_ban_mask(fx.vocab, fx.reg, {"runic"}), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// Backtranslation synthesis
// ---------------------------------------------------------------------------

FamilyConfig tiny_family(bool remap = false) {
    FamilyConfig f;
    f.seed = 5;
    f.vocab_size = 20;
    f.n_parallel = 24;
    f.n_mono_lrl = 20;
    f.n_test = 8;
    f.script_remap = remap;
    return f;
}

ModelDims tiny_dims() {
    ModelDims d;
    d.d_model = 8;
    d.n_heads = 2;
    d.enc_layers = 1;
    d.dec_layers = 1;
    d.d_ff = 16;
    d.max_len = 64;
    return d;
}

Vocabulary bundle_vocab(const DatasetBundle& b) {
    std::vector<const MonolingualCorpus*> monos;
    for (const auto& [id, m] : b.mono) monos.push_back(&m);
    return build_vocab(monos, {&b.en_hrl}, b.languages);
}

GenerateConfig fast_decode() {
    GenerateConfig g;
    g.max_len = 12;
    return g;
}

TEST(BtSynthesis, EmptyMonoYieldsNoPairs) {
    auto bundle = gen_family(tiny_family());
    auto vocab = bundle_vocab(bundle);
    TranslationModel model(vocab, tiny_dims(), 7);
    MonolingualCorpus empty;
    empty.lang = "lrl";
    auto d = synthesize_bt_for_en2lrl(model, vocab, empty, fast_decode(), 1, "m0");
    EXPECT_TRUE(d.pairs.pairs.empty());
    EXPECT_EQ(d.meta.dropped, 0);
    EXPECT_EQ(d.trains, Direction::kEn2Lrl);
}

TEST(BtSynthesis, PairCountPlusDroppedEqualsInputCount) {
    auto bundle = gen_family(tiny_family());
    auto vocab = bundle_vocab(bundle);
    TranslationModel model(vocab, tiny_dims(), 7);
    auto d = synthesize_bt_for_en2lrl(model, vocab, bundle.mono.at("lrl"), fast_decode(), 2,
                                      "m_lrl2en_iter1");
    EXPECT_EQ(d.pairs.pairs.size() + static_cast<std::size_t>(d.meta.dropped),
              bundle.mono.at("lrl").sentences.size());
    EXPECT_EQ(d.meta.iteration, 2);
    EXPECT_EQ(d.meta.producer, "m_lrl2en_iter1");
    EXPECT_EQ(d.meta.decode, "greedy");
    // Genuine side must be the original monolingual sentences, in order.
    std::size_t j = 0;
    for (const auto& s : bundle.mono.at("lrl").sentences) {
        if (j < d.pairs.pairs.size() && d.pairs.pairs[j].second.text == s.text) ++j;
    }
    EXPECT_EQ(j, d.pairs.pairs.size());
}

TEST(BtSynthesis, ExcludedSentencesAreDropped) {
    auto bundle = gen_family(tiny_family());
    auto vocab = bundle_vocab(bundle);
    TranslationModel model(vocab, tiny_dims(), 7);
    std::unordered_set<std::string> embargo;
    for (const auto& s : bundle.mono.at("lrl").sentences) embargo.insert(s.text);
    auto d = synthesize_bt_for_en2lrl(model, vocab, bundle.mono.at("lrl"), fast_decode(), 1,
                                      "m0", &embargo);
    EXPECT_TRUE(d.pairs.pairs.empty());
    EXPECT_EQ(static_cast<std::size_t>(d.meta.dropped),
              bundle.mono.at("lrl").sentences.size());
}

TEST(BtSynthesis, Lrl2EnDirectionUsesParallelEnglishSide) {
    auto bundle = gen_family(tiny_family());
    auto vocab = bundle_vocab(bundle);
    TranslationModel model(vocab, tiny_dims(), 7);
    std::vector<Sentence> en_side;
    for (const auto& [e, h] : bundle.en_hrl.pairs) en_side.push_back(e);
    auto d = synthesize_bt_for_lrl2en(model, vocab, en_side, fast_decode(), nullptr, 1, "m1");
    EXPECT_EQ(d.trains, Direction::kLrl2En);
    EXPECT_EQ(d.pairs.pairs.size() + static_cast<std::size_t>(d.meta.dropped), en_side.size());
    for (const auto& [synth, genuine] : d.pairs.pairs) {
        bool found = false;
        for (const auto& s : en_side) found |= s.text == genuine.text;
        EXPECT_TRUE(found);
    }
}

TEST(BtSynthesis, BanMaskKeepsSynthesizedOutputInScript) {
    auto bundle = gen_family(tiny_family(/*remap=*/true));
    auto vocab = bundle_vocab(bundle);
    ScriptRegistry reg;
    std::string en_class, hrl_class, lrl_class;
    for (const auto& lang : bundle.languages) {
        reg.add_language(lang);
        if (lang.id == "en") en_class = lang.script_class;
        if (lang.id == "hrl") hrl_class = lang.script_class;
        if (lang.id == "lrl") lrl_class = lang.script_class;
    }
    ASSERT_NE(en_class, lrl_class);
    ASSERT_NE(hrl_class, lrl_class);
    auto mask = build_ban_mask(vocab, reg, {en_class, hrl_class});
    TranslationModel model(vocab, tiny_dims(), 7);
    std::vector<Sentence> en_side;
    for (const auto& [e, h] : bundle.en_hrl.pairs) en_side.push_back(e);
    auto d = synthesize_bt_for_lrl2en(model, vocab, en_side, fast_decode(), &mask, 1, "m1");
    for (const auto& [synth, genuine] : d.pairs.pairs) {
        for (int id : tokenize(synth, vocab, "lrl").tokens)
            if (!vocab.is_special(id)) EXPECT_EQ(vocab.script_of(id), lrl_class);
    }
}

// ---------------------------------------------------------------------------
// Iteration loop
// ---------------------------------------------------------------------------

PipelineConfig fast_pipeline(const io::fs::path& out_dir) {
    PipelineConfig cfg;
    cfg.dims = tiny_dims();
    cfg.critic_dims = CriticDims{8, 4};
    cfg.pretrain_epochs = 1;
    cfg.supervised_epochs = 1;
    cfg.epochs_iter1_en2lrl = 1;
    cfg.epochs_iter1_lrl2en = 1;
    cfg.epochs_later = 1;
    cfg.train.accumulation = 1;
    cfg.train.batch_tokens = 64;
    cfg.train.warmup_updates = 4;
    cfg.decode = fast_decode();
    cfg.seed = 21;
    cfg.out_dir = out_dir;
    return cfg;
}

io::fs::path fresh_dir(const std::string& name) {
    auto p = io::fs::temp_directory_path() / ("nmtadapt_pipe_" + name);
    io::fs::remove_all(p);
    return p;
}

TEST(Pipeline, KMaxZeroProducesOnlyIterationZeroArtifacts) {
    auto bundle = gen_family(tiny_family());
    auto cfg = fast_pipeline(fresh_dir("k0"));
    cfg.k_max = 0;
    auto st = run_iterations(bundle, cfg);
    EXPECT_EQ(st.k, 0);
    ASSERT_EQ(st.history.size(), 1u);
    EXPECT_EQ(st.history[0].k, 0);
    EXPECT_TRUE(st.checkpoints.count("pretrained"));
    EXPECT_TRUE(st.checkpoints.count("m_lrl2en_iter0"));
    EXPECT_FALSE(st.checkpoints.count("m_en2lrl_iter1"));
    EXPECT_TRUE(io::fs::exists(st.manifest_path));
    EXPECT_FALSE(io::fs::exists(cfg.out_dir / "bt_en2lrl_iter1.tsv"));
}

TEST(Pipeline, ManifestListsAllCheckpointsAndHashesVerify) {
    auto bundle = gen_family(tiny_family());
    auto cfg = fast_pipeline(fresh_dir("k2"));
    cfg.k_max = 2;
    cfg.eps_bleu = -1.0;  // never converge early
    auto st = run_iterations(bundle, cfg);
    EXPECT_EQ(st.k, 2);
    for (const char* name : {"pretrained", "m_lrl2en_iter0", "m_en2lrl_iter1",
                             "m_lrl2en_iter1", "m_en2lrl_iter2", "m_lrl2en_iter2"})
        EXPECT_TRUE(st.checkpoints.count(name)) << name;
    // Every recorded artifact hash must match a re-hash of the file on disk.
    auto manifest = nlohmann::json::parse(io::read_file(st.manifest_path));
    EXPECT_EQ(manifest["iterations_completed"], 2);
    for (const auto& [name, path] : st.checkpoints)
        EXPECT_EQ(manifest["artifacts"][name], io::file_sha256(path)) << name;
    // Metric streams are hashed with timestamps stripped, so only presence
    // (not the raw file hash) is asserted here.
    EXPECT_TRUE(manifest["artifacts"].contains("metrics"));
    EXPECT_TRUE(manifest["artifacts"].contains("train_logs"));
    EXPECT_TRUE(io::fs::exists(cfg.out_dir / "train_logs.jsonl"));
    // Sidecar metadata accompanies every synthesized dataset.
    for (int k = 1; k <= 2; ++k)
        for (const char* stem : {"bt_en2lrl_iter", "bt_lrl2en_iter"}) {
            auto base = std::string(stem) + std::to_string(k);
            EXPECT_TRUE(io::fs::exists(cfg.out_dir / (base + ".tsv"))) << base;
            EXPECT_TRUE(io::fs::exists(cfg.out_dir / (base + ".meta.json"))) << base;
        }
}

TEST(Pipeline, NoHeldOutSentenceEntersBtData) {
    auto bundle = gen_family(tiny_family());
    auto cfg = fast_pipeline(fresh_dir("embargo"));
    cfg.k_max = 1;
    auto st = run_iterations(bundle, cfg);
    std::unordered_set<std::string> held;
    for (const auto& [e, l] : bundle.test_en_lrl.pairs) {
        held.insert(e.text);
        held.insert(l.text);
    }
    for (const auto& name : {"bt_en2lrl_iter1.tsv", "bt_lrl2en_iter1.tsv"}) {
        std::ifstream in(cfg.out_dir / name);
        ASSERT_TRUE(in.good()) << name;
        std::string line;
        while (std::getline(in, line)) {
            auto tab = line.find('\t');
            ASSERT_NE(tab, std::string::npos);
            EXPECT_FALSE(held.count(line.substr(0, tab))) << name;
            EXPECT_FALSE(held.count(line.substr(tab + 1))) << name;
        }
    }
    (void)st;
}

TEST(Pipeline, BanAutoEnabledOnlyWhenScriptsAreDisjoint) {
    auto same = gen_family(tiny_family(false));
    auto same_cfg = fast_pipeline(fresh_dir("ban_off"));
    same_cfg.k_max = 0;
    EXPECT_FALSE(run_iterations(same, same_cfg).ban_active);

    auto disjoint = gen_family(tiny_family(true));
    auto dis_cfg = fast_pipeline(fresh_dir("ban_on"));
    dis_cfg.k_max = 0;
    EXPECT_TRUE(run_iterations(disjoint, dis_cfg).ban_active);

    auto forced_cfg = fast_pipeline(fresh_dir("ban_forced_off"));
    forced_cfg.k_max = 0;
    forced_cfg.ban_override = false;
    EXPECT_FALSE(run_iterations(disjoint, forced_cfg).ban_active);
}

TEST(Pipeline, DeterministicGivenSeed) {
    auto bundle = gen_family(tiny_family());
    auto c1 = fast_pipeline(fresh_dir("det_a"));
    c1.k_max = 1;
    auto c2 = fast_pipeline(fresh_dir("det_b"));
    c2.k_max = 1;
    auto s1 = run_iterations(bundle, c1);
    auto s2 = run_iterations(bundle, c2);
    ASSERT_EQ(s1.artifact_hashes.size(), s2.artifact_hashes.size());
    for (const auto& [name, hash] : s1.artifact_hashes)
        EXPECT_EQ(hash, s2.artifact_hashes.at(name)) << name;
    // Timestamp-stripped hashing makes the whole manifest byte-identical.
    EXPECT_EQ(io::read_file(s1.manifest_path), io::read_file(s2.manifest_path));
    ASSERT_EQ(s1.history.size(), s2.history.size());
    for (std::size_t i = 0; i < s1.history.size(); ++i) {
        EXPECT_EQ(s1.history[i].dev_bleu_en2lrl, s2.history[i].dev_bleu_en2lrl);
        EXPECT_EQ(s1.history[i].dev_bleu_lrl2en, s2.history[i].dev_bleu_lrl2en);
    }
}

TEST(Pipeline, LockedOutputDirectoryIsRejected) {
    auto bundle = gen_family(tiny_family());
    auto dir = fresh_dir("locked");
    io::fs::create_directories(dir);
    io::atomic_write(dir / ".lock", "held\n");
    auto cfg = fast_pipeline(dir);
    cfg.k_max = 0;
    EXPECT_THROW(run_iterations(bundle, cfg), std::runtime_error);
}

// ---------------------------------------------------------------------------
// Monolingual ablation
// ---------------------------------------------------------------------------

TEST(Ablation, DuplicateSizesGiveIdenticalScoresAndCsvIsWritten) {
    auto bundle = gen_family(tiny_family());
    auto cfg = fast_pipeline(fresh_dir("ablate"));
    auto rows = run_mono_ablation(bundle, {10, 10}, cfg);
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_EQ(rows[0].first, 10);
    EXPECT_EQ(rows[0].second, rows[1].second);
    std::string csv = io::read_file(cfg.out_dir / "ablation.csv");
    EXPECT_EQ(csv.rfind("size,bleu\n", 0), 0u);
    EXPECT_NE(csv.find("10,"), std::string::npos);
}

TEST(Ablation, RejectsBadSizes) {
    auto bundle = gen_family(tiny_family());
    auto cfg = fast_pipeline(fresh_dir("ablate_bad"));
    const long n = static_cast<long>(bundle.mono.at("lrl").sentences.size());
    EXPECT_THROW(run_mono_ablation(bundle, {n + 1}, cfg), std::invalid_argument);
    EXPECT_THROW(run_mono_ablation(bundle, {0}, cfg), std::invalid_argument);
    EXPECT_THROW(run_mono_ablation(bundle, {10, 5}, cfg), std::invalid_argument);
}

}  // namespace
