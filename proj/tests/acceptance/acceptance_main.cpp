// Acceptance harness: one line of output per criterion, PASS or FAIL, with
// the measured numbers. Runs everything by default; pass criterion numbers
// as arguments to run a subset (e.g. `acceptance 1 3 4`).

#include <chrono>
#include <cmath>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>
#include <unordered_map>

#include "nmtadapt/cli.hpp"

using namespace nmtadapt;
using Clock = std::chrono::steady_clock;

namespace {

int g_failures = 0;

void report(int n, const std::string& name, bool pass, const std::string& detail,
            double seconds) {
    std::ostringstream line;
    line << (pass ? "PASS" : "FAIL") << "  " << std::setw(2) << n << ". " << name << " — "
         << detail << "  [" << std::fixed << std::setprecision(1) << seconds << "s]";
    std::cout << line.str() << std::endl;
    if (!pass) ++g_failures;
}

double elapsed(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

// ---------------------------------------------------------------------------
// 1. Noise model bounds
// ---------------------------------------------------------------------------

void criterion_1() {
    auto t0 = Clock::now();
    NoiseParams params;  // defaults: max_shift 3, p_mask 0.1
    auto rng = make_stream(41, 0);
    long total = 0, masked = 0, violations = 0;
    const int seq_len = 40;
    while (total < 100000) {
        TokenSequence seq;
        // Unique ids per position so displacement is observable.
        for (int i = 0; i < seq_len; ++i) seq.tokens.push_back(100 + i);
        auto noised = apply_noise(seq, params, rng);
        for (int i = 0; i < seq_len; ++i) {
            ++total;
            if (noised.tokens[i] == Vocabulary::kMask) {
                ++masked;
                continue;
            }
            const int orig = noised.tokens[i] - 100;
            if (std::abs(orig - i) > params.max_shift) ++violations;
        }
    }
    const double frac = static_cast<double>(masked) / total;
    const double secs = elapsed(t0);
    std::ostringstream d;
    d << total << " tokens, " << violations << " displacement violations, masked fraction "
      << std::setprecision(4) << frac;
    report(1, "noise model bounds", violations == 0 && frac >= 0.095 && frac <= 0.105 &&
                                        secs < 5.0,
           d.str(), secs);
}

// ---------------------------------------------------------------------------
// 2. Gradient correctness (finite differences, all six losses)
// ---------------------------------------------------------------------------

Vocabulary tiny_vocab() {
    std::set<std::string> toks;
    for (char c = 'a'; c <= 'l'; ++c) toks.insert(std::string(1, c));
    return Vocabulary({"en", "hrl", "lrl"}, toks, ScriptRegistry{});
}

void criterion_2() {
    auto t0 = Clock::now();
    auto vocab = tiny_vocab();  // 20 ids <= 37
    ModelDims dims{8, 2, 1, 1, 12, 16};
    TranslationModel model(vocab, dims, 3);
    Critic c1(dims.d_model, CriticDims{6, 3}, 4, "pair");
    Critic c2(dims.d_model, CriticDims{6, 3}, 5, "en");

    const int a = vocab.id("a"), b = vocab.id("b"), c = vocab.id("c"), d = vocab.id("d");
    const int hrl = vocab.lang_token("hrl"), lrl = vocab.lang_token("lrl"),
              en = vocab.lang_token("en");

    auto batch = [&](TaskKind kind, Provenance prov, int src_tok, int tgt_tok) {
        TaskBatch tb;
        tb.kind = kind;
        tb.provenance = prov;
        tb.src = {{a, b, c}, {d, b}};
        tb.tgt = {{c, a}, {b, d, a}};
        tb.src_lang_token = src_tok;
        tb.tgt_lang_token = tgt_tok;
        return tb;
    };
    const std::vector<std::vector<int>> hrl_seqs{{a, b}, {c, d, a}};
    const std::vector<std::vector<int>> lrl_seqs{{b, c, d}, {a, d}};
    const std::vector<std::vector<int>> en_seqs{{c, b}, {d, a, b}};

    using Builder = std::function<Tensor(Tape&)>;
    auto adv1 = [&](Tape& t) {
        auto zh = detail::encode_adv(t, model, hrl_seqs, hrl);
        auto zl = detail::encode_adv(t, model, lrl_seqs, hrl);
        return loss_adv_pair(t, c1, zh, zl, Bind::kTrainable);
    };
    auto adv2 = [&](Tape& t) {
        auto non_en = hrl_seqs;
        non_en.insert(non_en.end(), lrl_seqs.begin(), lrl_seqs.end());
        auto zn = detail::encode_adv(t, model, non_en, hrl);
        auto ze = detail::encode_adv(t, model, en_seqs, en);
        return loss_adv_english(t, c2, zn, ze, Bind::kTrainable);
    };
    std::vector<std::pair<std::string, Builder>> losses{
        {"L_t",
         [&](Tape& t) {
             return loss_translation(t, model,
                                     batch(TaskKind::kTranslation, Provenance::kReal, en, hrl));
         }},
        {"L_da",
         [&](Tape& t) {
             return loss_denoising(t, model,
                                   batch(TaskKind::kDenoising, Provenance::kReal, hrl, hrl),
                                   batch(TaskKind::kDenoising, Provenance::kReal, hrl, lrl));
         }},
        {"L_bt",
         [&](Tape& t) {
             return loss_backtranslation(
                 t, model, batch(TaskKind::kBacktranslation, Provenance::kSynthesized, en, lrl));
         }},
        {"L_adv1", adv1},
        {"L_adv2", adv2},
        {"L_adv", [&](Tape& t) { return ad::add(adv1(t), adv2(t)); }},
    };

    std::vector<ad::Param*> params = model.params().all();
    for (auto* p : c1.params().all()) params.push_back(p);
    for (auto* p : c2.params().all()) params.push_back(p);

    double max_err = 0.0;
    long n_checked = 0;
    bool ok = true;
    for (auto& [name, build] : losses) {
        for (auto* p : params) p->grad.setZero();
        {
            Tape t(true);
            t.backward(build(t));
        }
        const double h = 1e-5;
        long n_this_loss = 0;
        for (auto* p : params) {
            for (long i = 0; i < p->value.size(); i += 31) {
                double* v = p->value.data() + i;
                const double orig = *v;
                *v = orig + h;
                double up, dn;
                {
                    Tape t(false);
                    up = build(t).val()(0, 0);
                }
                *v = orig - h;
                {
                    Tape t(false);
                    dn = build(t).val()(0, 0);
                }
                *v = orig;
                const double fd = (up - dn) / (2 * h);
                const double ana = *(p->grad.data() + i);
                const double err =
                    std::abs(ana - fd) / std::max({1.0, std::abs(ana), std::abs(fd)});
                max_err = std::max(max_err, err);
                ++n_checked;
                ++n_this_loss;
                if (err >= 1e-4) ok = false;
            }
        }
        if (n_this_loss < 100) ok = false;
    }
    const double secs = elapsed(t0);
    std::ostringstream det;
    det << n_checked << " sampled entries across 6 losses, max relative error "
        << std::scientific << std::setprecision(2) << max_err;
    report(2, "analytic gradients vs finite differences", ok && secs < 60.0, det.str(), secs);
}

// ---------------------------------------------------------------------------
// 3. Loss identities
// ---------------------------------------------------------------------------

void criterion_3() {
    auto t0 = Clock::now();
    auto vocab = tiny_vocab();
    ModelDims dims{8, 2, 1, 1, 12, 16};
    TranslationModel model(vocab, dims, 6);
    // Zero output projection -> uniform logits -> CE = ln V.
    model.params().by_name("out_w").value.setZero();
    model.params().by_name("out_b").value.setZero();
    TaskBatch tb;
    tb.kind = TaskKind::kTranslation;
    tb.src = {{vocab.id("a"), vocab.id("b")}};
    tb.tgt = {{vocab.id("c")}};
    tb.src_lang_token = vocab.lang_token("en");
    tb.tgt_lang_token = vocab.lang_token("hrl");
    Tape t(true);
    const double ce = loss_translation(t, model, tb).val()(0, 0);
    const double lnv = std::log(static_cast<double>(vocab.size()));
    const bool ce_ok = std::abs(ce - lnv) < 1e-9;

    // Constant critic (all parameters zero) -> score gap exactly 0.
    Critic c1(dims.d_model, CriticDims{6, 3}, 7, "pair");
    for (auto* p : c1.params().all()) p->value.setZero();
    auto zh = detail::encode_adv(t, model, {{vocab.id("a")}}, vocab.lang_token("hrl"));
    auto zl = detail::encode_adv(t, model, {{vocab.id("b")}}, vocab.lang_token("hrl"));
    const double gap = critic_gap(t, c1, zh, zl, Bind::kFrozen).val()(0, 0);
    const bool gap_ok = gap == 0.0;

    // Generator objective: only adv1 = 0.5 active, default multiplier -60.
    GenLossTerms terms;
    terms.adv1 = t.constant(ad::MatrixXd::Constant(1, 1, 0.5));
    const double composed = compose_generator(t, terms, TaskWeights{}).val()(0, 0);
    const bool comp_ok = composed == -30.0;

    std::ostringstream d;
    d << "uniform CE " << std::setprecision(12) << ce << " vs ln V " << lnv << "; zero-critic gap "
      << gap << "; -60 x 0.5 = " << composed;
    report(3, "loss identities", ce_ok && gap_ok && comp_ok, d.str(), elapsed(t0));
}

// ---------------------------------------------------------------------------
// 4. BLEU oracle equivalence
// ---------------------------------------------------------------------------

double bleu_oracle(const std::vector<std::string>& hyps, const std::vector<std::string>& refs) {
    const int N = 4;
    double log_p = 0.0;
    long hlen = 0, rlen = 0;
    for (int n = 1; n <= N; ++n) {
        long match = 0, total = 0;
        for (std::size_t s = 0; s < hyps.size(); ++s) {
            auto hw = split_words(hyps[s]);
            auto rw = split_words(refs[s]);
            if (n == 1) {
                hlen += static_cast<long>(hw.size());
                rlen += static_cast<long>(rw.size());
            }
            std::unordered_map<std::string, long> rc, hc;
            for (std::size_t i = 0; i + n <= rw.size(); ++i) {
                std::string key;
                for (int j = 0; j < n; ++j) key += rw[i + j] + "\x1f";
                ++rc[key];
            }
            for (std::size_t i = 0; i + n <= hw.size(); ++i) {
                std::string key;
                for (int j = 0; j < n; ++j) key += hw[i + j] + "\x1f";
                ++hc[key];
            }
            for (const auto& [key, cnt] : hc) {
                total += cnt;
                auto it = rc.find(key);
                if (it != rc.end()) match += std::min(cnt, it->second);
            }
        }
        if (n >= 2) {
            ++match;
            ++total;
        }
        if (total == 0) continue;
        if (match == 0) return 0.0;
        log_p += std::log(static_cast<double>(match) / total) / N;
    }
    if (hlen == 0) return 0.0;
    const double bp = hlen >= rlen ? 1.0 : std::exp(1.0 - static_cast<double>(rlen) / hlen);
    return 100.0 * bp * std::exp(log_p);
}

void criterion_4() {
    auto t0 = Clock::now();
    static const char* words[] = {"da", "lo", "mi", "ra", "tu", "ke"};
    auto g = make_stream(42, 0);
    auto corpus = [&](int n_sents) {
        std::vector<std::string> out;
        for (int s = 0; s < n_sents; ++s) {
            const int len = 1 + static_cast<int>(uniform_below(g, 8));
            std::string line;
            for (int i = 0; i < len; ++i) {
                if (i) line += ' ';
                line += words[uniform_below(g, 6)];
            }
            out.push_back(line);
        }
        return out;
    };
    double max_diff = 0.0;
    bool ok = true;
    for (int rep = 0; rep < 50; ++rep) {
        const int n = 2 + static_cast<int>(uniform_below(g, 5));
        auto hyps = corpus(n);
        auto refs = corpus(n);
        const double diff = std::abs(bleu(hyps, refs) - bleu_oracle(hyps, refs));
        max_diff = std::max(max_diff, diff);
        if (diff >= 1e-6) ok = false;
        if (bleu(hyps, hyps) != 100.0) ok = false;
    }
    std::ostringstream d;
    d << "50 corpora, max |bleu - oracle| " << std::scientific << std::setprecision(2)
      << max_diff << ", self-BLEU always 100";
    report(4, "BLEU oracle equivalence", ok, d.str(), elapsed(t0));
}

// ---------------------------------------------------------------------------
// Shared heavy fixture for criteria 5-9
// ---------------------------------------------------------------------------

struct Fixture {
    DatasetBundle bundle;
    Vocabulary vocab;
    ModelDims dims;
    std::vector<std::vector<int>> par_en, par_hrl, mono_en, mono_hrl, mono_lrl;
    std::vector<Sentence> par_en_sents;
    std::vector<std::string> ref_en, ref_lrl;
    std::vector<std::vector<int>> test_en_toks, test_lrl_toks;
    GenerateConfig decode;
    std::uint64_t seed;

    Fixture(FamilyConfig fam, ModelDims d, std::uint64_t s)
        : bundle(gen_family(fam)), vocab(make_vocab(bundle)), dims(d), seed(s) {
        decode.max_len = 24;
        for (const auto& [e, h] : bundle.en_hrl.pairs) {
            par_en.push_back(tokenize(e, vocab, "en").tokens);
            par_hrl.push_back(tokenize(h, vocab, "hrl").tokens);
            par_en_sents.push_back(e);
        }
        auto toks = [&](const std::string& lang) {
            std::vector<std::vector<int>> out;
            for (const auto& sent : bundle.mono.at(lang).sentences)
                out.push_back(tokenize(sent, vocab, lang).tokens);
            return out;
        };
        mono_en = toks("en");
        mono_hrl = toks("hrl");
        mono_lrl = toks("lrl");
        for (const auto& [e, l] : bundle.test_en_lrl.pairs) {
            ref_en.push_back(e.text);
            ref_lrl.push_back(l.text);
            test_en_toks.push_back(tokenize(e, vocab, "en").tokens);
            test_lrl_toks.push_back(tokenize(l, vocab, "lrl").tokens);
        }
    }

    static Vocabulary make_vocab(const DatasetBundle& b) {
        std::vector<const MonolingualCorpus*> monos;
        for (const auto& [id, m] : b.mono) monos.push_back(&m);
        return build_vocab(monos, {&b.en_hrl}, b.languages);
    }

    TrainConfig base_cfg(int epochs, std::uint64_t salt) const {
        TrainConfig tc;
        tc.epochs = epochs;
        tc.seed = seed + salt;
        return tc;
    }

    TranslationModel pretrained_model(int epochs) const {
        TranslationModel m(vocab, dims, seed);
        auto tc = base_cfg(epochs, 1);
        pretrain_denoising(m, vocab, mono_en, mono_hrl, mono_lrl, tc);
        return m;
    }

    std::vector<std::string> translate(const TranslationModel& m,
                                       const std::vector<std::vector<int>>& src, int src_tok,
                                       int tgt_tok, const std::vector<char>* ban = nullptr) const {
        std::vector<std::string> out;
        const std::size_t chunk = 256;
        for (std::size_t i = 0; i < src.size(); i += chunk) {
            std::vector<std::vector<int>> part(src.begin() + i,
                                               src.begin() + std::min(src.size(), i + chunk));
            for (auto& toks : m.generate(part, src_tok, tgt_tok, decode, ban)) {
                TokenSequence t;
                t.tokens = std::move(toks);
                out.push_back(detokenize(t, vocab).text);
            }
        }
        return out;
    }

    double bleu_en2lrl(const TranslationModel& m, int tgt_tok,
                       const std::vector<char>* ban = nullptr) const {
        return bleu(translate(m, test_en_toks, vocab.lang_token("en"), tgt_tok, ban), ref_lrl);
    }
    double bleu_lrl2en(const TranslationModel& m) const {
        return bleu(translate(m, test_lrl_toks, vocab.lang_token("hrl"), vocab.lang_token("en")),
                    ref_en);
    }

    // Supervised HRL->En from a pretrained initialization (iteration 0).
    TranslationModel supervised_lrl2en(const TranslationModel& init, int epochs,
                                       std::uint64_t salt) const {
        TranslationModel m = clone(init);
        auto tc = base_cfg(epochs, salt);
        tc.direction = Direction::kLrl2En;
        Trainer tr(m, vocab, tc);
        TrainData data;
        data.parallel.src = par_hrl;
        data.parallel.tgt = par_en;
        tr.run(data, false);
        return m;
    }

    // Supervised En->HRL (the un-adapted baseline for the En->LRL direction).
    TranslationModel supervised_en2hrl(const TranslationModel& init, int epochs,
                                       std::uint64_t salt) const {
        TranslationModel m = clone(init);
        auto tc = base_cfg(epochs, salt);
        tc.direction = Direction::kEn2Lrl;
        Trainer tr(m, vocab, tc);
        TrainData data;
        data.parallel.src = par_en;
        data.parallel.tgt = par_hrl;
        tr.run(data, false);
        return m;
    }

    BilingualData bt_tokens(const BTDataset& d, const char* src_lang,
                            const char* tgt_lang) const {
        BilingualData out;
        for (const auto& [s, t] : d.pairs.pairs) {
            out.src.push_back(tokenize(s, vocab, src_lang).tokens);
            out.tgt.push_back(tokenize(t, vocab, tgt_lang).tokens);
        }
        return out;
    }

    // One adaptation round of the En->LRL direction, without the BT
    // fine-tune pass (applied separately where the recipe calls for it, and
    // skipped entirely in a script-ban direction). use_bt/use_adv select the
    // ablation arms.
    TranslationModel adapt_en2lrl(const TranslationModel& init, const BilingualData& bt,
                                  bool use_bt, bool use_adv, int epochs, std::uint64_t salt,
                                  double model_lr = 3e-4, double critic_lr = 0.01) const {
        TranslationModel m = clone(init);
        auto tc = base_cfg(epochs, salt);
        tc.direction = Direction::kEn2Lrl;
        tc.model_lr = model_lr;
        tc.critic_lr = critic_lr;
        Trainer tr(m, vocab, tc);
        Critic c1(dims.d_model, CriticDims{64, 16}, seed + salt + 1, "pair");
        Critic c2(dims.d_model, CriticDims{64, 16}, seed + salt + 2, "en");
        if (use_adv) tr.attach_critics(&c1, &c2);
        TrainData data;
        data.parallel.src = par_en;
        data.parallel.tgt = par_hrl;
        if (use_bt) data.bt = bt;
        data.denoise_hrl = mono_hrl;
        data.denoise_lrl = mono_lrl;
        if (use_adv) {
            data.adv_hrl = mono_hrl;
            data.adv_lrl = mono_lrl;
            data.adv_en = par_en;
        }
        tr.run(data, true);
        return m;
    }

    // The BT fine-tune pass of the full En->LRL recipe.
    void finetune_en2lrl(TranslationModel& m, const BilingualData& bt, std::uint64_t salt) const {
        auto ftc = base_cfg(1, salt);
        finetune_bt(m, vocab, bt, Direction::kEn2Lrl, false, ftc);
    }

    TranslationModel adapt_lrl2en(const TranslationModel& init, const BilingualData& bt,
                                  int epochs, std::uint64_t salt,
                                  double critic_lr = 0.01) const {
        TranslationModel m = clone(init);
        auto tc = base_cfg(epochs, salt);
        tc.direction = Direction::kLrl2En;
        tc.critic_lr = critic_lr;
        Critic c1(dims.d_model, CriticDims{64, 16}, seed + salt + 1, "pair");
        TrainData data;
        data.parallel.src = par_hrl;
        data.parallel.tgt = par_en;
        data.bt = bt;
        data.adv_hrl = mono_hrl;
        data.adv_lrl = mono_lrl;
        train_lrl2en(m, c1, vocab, data, tc);
        auto ftc = base_cfg(1, salt + 3);
        finetune_bt(m, vocab, bt, Direction::kLrl2En, false, ftc);
        return m;
    }

    // Checkpoint round trip as a portable deep copy.
    TranslationModel clone(const TranslationModel& m) const {
        const auto path = io::fs::temp_directory_path() / "nmtadapt_accept_clone.ckpt";
        m.save(path, "x");
        return TranslationModel::load(path, vocab);
    }

    // Mean-pooled encoder latents for the alignment probe.
    std::vector<ad::MatrixXd> latents(const TranslationModel& m,
                                      const std::vector<std::vector<int>>& seqs,
                                      std::size_t count) const {
        std::vector<ad::MatrixXd> out;
        const int hrl_tok = vocab.lang_token("hrl");
        for (std::size_t i = 0; i < std::min(count, seqs.size()); ++i) {
            TokenSequence t;
            t.tokens = seqs[i];
            out.push_back(m.encode(t, hrl_tok).vectors);
        }
        return out;
    }
};

// Epoch budgets for the heavy block (tuned for signal within the runtime
// limits, not for peak quality).
struct Budget {
    int pretrain = 3;
    int supervised = 6;
    int iter1_e2l = 12;
    int iter1_l2e = 5;
    int iter2_e2l = 12;
    int iter2_l2e = 7;
    // The En->LRL adaptation arms train with a reduced model lr (the longer
    // schedule compensates): it tightens the run-to-run spread enough for the
    // adversarial term's contribution to show through. The critics use a
    // gentler lr than the 0.01 default for the same reason.
    double e2l_model_lr = 2e-4;
    double critic_lr = 0.003;
};

struct HeavyResults {
    double base_e2l = 0, base_l2e = 0;
    // btadv_e2l is the full recipe (BT + adversarial + fine-tune); the
    // *_arm values are the ablation arms before the fine-tune pass.
    double btadv_e2l = 0, btadv_arm = 0, btonly_arm = 0, advonly_arm = 0;
    double btadv_l2e = 0;
    double iter2_e2l = 0, iter2_l2e = 0;
    double probe_noadv = 0, probe_adv = 0;
};

HeavyResults run_heavy_block(const Fixture& fx, const Budget& bg, bool run_iter2,
                             bool run_probe) {
    HeavyResults r;
    const int lrl_tok = fx.vocab.lang_token("lrl");
    const int hrl_tok = fx.vocab.lang_token("hrl");

    auto pre = fx.pretrained_model(bg.pretrain);

    // Iteration 0: supervised models in both directions.
    auto m_l2e_0 = fx.supervised_lrl2en(pre, bg.supervised, 10);
    auto m_e2h = fx.supervised_en2hrl(pre, bg.supervised, 20);
    r.base_l2e = fx.bleu_lrl2en(m_l2e_0);
    r.base_e2l = fx.bleu_en2lrl(m_e2h, hrl_tok);  // un-adapted: decodes HRL

    // Iteration 1, En->LRL: synthesize (Y_En, X_LRL) with the HRL->En model.
    auto bt1 = synthesize_bt_for_en2lrl(m_l2e_0, fx.vocab, fx.bundle.mono.at("lrl"), fx.decode,
                                        1, "iter0");
    auto bt1_toks = fx.bt_tokens(bt1, "en", "lrl");

    auto m_btadv = fx.adapt_en2lrl(pre, bt1_toks, true, true, bg.iter1_e2l, 100,
                                   bg.e2l_model_lr, bg.critic_lr);
    r.btadv_arm = fx.bleu_en2lrl(m_btadv, lrl_tok);
    auto m_btonly = fx.adapt_en2lrl(pre, bt1_toks, true, false, bg.iter1_e2l, 200,
                                    bg.e2l_model_lr, bg.critic_lr);
    r.btonly_arm = fx.bleu_en2lrl(m_btonly, lrl_tok);
    auto m_advonly = fx.adapt_en2lrl(pre, bt1_toks, false, true, bg.iter1_e2l, 300,
                                     bg.e2l_model_lr, bg.critic_lr);
    r.advonly_arm = fx.bleu_en2lrl(m_advonly, lrl_tok);

    // The probe compares the arm models, whose training differs only in the
    // adversarial term.
    if (run_probe) {
        auto z_noadv_h = fx.latents(m_btonly, fx.mono_hrl, 150);
        auto z_noadv_l = fx.latents(m_btonly, fx.mono_lrl, 150);
        r.probe_noadv = probe_alignment(z_noadv_h, z_noadv_l).probe_accuracy;
        auto z_adv_h = fx.latents(m_btadv, fx.mono_hrl, 150);
        auto z_adv_l = fx.latents(m_btadv, fx.mono_lrl, 150);
        r.probe_adv = probe_alignment(z_adv_h, z_adv_l).probe_accuracy;
    }

    // Complete the recipe: fine-tune the BT+Adv model on the BT data.
    fx.finetune_en2lrl(m_btadv, bt1_toks, 103);
    r.btadv_e2l = fx.bleu_en2lrl(m_btadv, lrl_tok);

    // Iteration 1, LRL->En: synthesize (Y_LRL, X_En) with the new model.
    auto bt2 = synthesize_bt_for_lrl2en(m_btadv, fx.vocab, fx.par_en_sents, fx.decode, nullptr,
                                        1, "iter1");
    auto bt2_toks = fx.bt_tokens(bt2, "lrl", "en");
    auto m_l2e_1 = fx.adapt_lrl2en(pre, bt2_toks, bg.iter1_l2e, 400, bg.critic_lr);
    r.btadv_l2e = fx.bleu_lrl2en(m_l2e_1);

    if (run_iter2) {
        auto bt1b = synthesize_bt_for_en2lrl(m_l2e_1, fx.vocab, fx.bundle.mono.at("lrl"),
                                             fx.decode, 2, "iter1");
        auto m_e2l_2 = fx.adapt_en2lrl(pre, fx.bt_tokens(bt1b, "en", "lrl"), true, true,
                                       bg.iter2_e2l, 500, bg.e2l_model_lr, bg.critic_lr);
        fx.finetune_en2lrl(m_e2l_2, fx.bt_tokens(bt1b, "en", "lrl"), 503);
        r.iter2_e2l = fx.bleu_en2lrl(m_e2l_2, lrl_tok);
        auto bt2b = synthesize_bt_for_lrl2en(m_e2l_2, fx.vocab, fx.par_en_sents, fx.decode,
                                             nullptr, 2, "iter2");
        auto m_l2e_2 = fx.adapt_lrl2en(pre, fx.bt_tokens(bt2b, "lrl", "en"), bg.iter2_l2e, 600,
                                       bg.critic_lr);
        r.iter2_l2e = fx.bleu_lrl2en(m_l2e_2);
    }
    return r;
}

void criteria_5_to_9(const std::set<int>& wanted) {
    const bool need_any = wanted.count(5) || wanted.count(6) || wanted.count(7) ||
                          wanted.count(9);
    if (!need_any) return;
    auto t0 = Clock::now();

    FamilyConfig fam;
    fam.seed = 11;
    // A compact lexicon keeps every dialect-variant type frequent enough in
    // the 20k monolingual corpus for denoising to align its embedding, which
    // is what makes the backtranslation producer usable at this scale.
    fam.vocab_size = 40;
    fam.n_parallel = 20000;
    fam.n_mono_lrl = 20000;
    fam.lex_sub_rate = 0.3;
    fam.spell_noise_rate = 0.1;
    fam.n_test = 500;
    ModelDims dims{32, 2, 1, 1, 64, 64};
    Fixture fx(fam, dims, 17);
    Budget bg;
    auto r = run_heavy_block(fx, bg, wanted.count(9) > 0, wanted.count(7) > 0);
    const double secs = elapsed(t0);

    if (wanted.count(5)) {
        std::ostringstream d;
        d << std::fixed << std::setprecision(2) << "BT+Adv+ft " << r.btadv_e2l
          << " vs baseline " << r.base_e2l << " (gain " << r.btadv_e2l - r.base_e2l
          << ", need >= 5); arms pre-ft: BT+Adv " << r.btadv_arm << ", BT-only "
          << r.btonly_arm << ", Adv-only " << r.advonly_arm;
        const bool pass = r.btadv_e2l - r.base_e2l >= 5.0 &&
                          r.btadv_arm >= std::max(r.btonly_arm, r.advonly_arm) &&
                          secs <= 3600.0;
        report(5, "En->LRL iteration-1 adaptation gain", pass, d.str(), secs);
    }
    if (wanted.count(6)) {
        std::ostringstream d;
        d << std::fixed << std::setprecision(2) << "BT+Adv " << r.btadv_l2e << " vs baseline "
          << r.base_l2e << " (gain " << r.btadv_l2e - r.base_l2e << ", need >= 3)";
        report(6, "LRL->En iteration-1 adaptation gain", r.btadv_l2e - r.base_l2e >= 3.0,
               d.str(), secs);
    }
    if (wanted.count(7)) {
        std::ostringstream d;
        d << std::fixed << std::setprecision(3) << "probe accuracy " << r.probe_noadv
          << " (adv weight 0, need >= 0.80) -> " << r.probe_adv << " (full adv, need <= 0.65)";
        report(7, "latent alignment probe", r.probe_noadv >= 0.80 && r.probe_adv <= 0.65,
               d.str(), secs);
    }
    if (wanted.count(9)) {
        const double d_e2l = r.iter2_e2l - r.btadv_e2l;
        const double d_l2e = r.iter2_l2e - r.btadv_l2e;
        std::ostringstream d;
        d << std::fixed << std::setprecision(2) << "En->LRL " << r.btadv_e2l << " -> "
          << r.iter2_e2l << " (" << std::showpos << d_e2l << std::noshowpos << "); LRL->En "
          << r.btadv_l2e << " -> " << r.iter2_l2e << " (" << std::showpos << d_l2e
          << std::noshowpos << ")";
        const bool pass = d_e2l >= -0.5 && d_l2e >= -0.5 && (d_e2l >= 0.5 || d_l2e >= 0.5);
        report(9, "iteration-2 improvement", pass, d.str(), secs);
    }
}

// ---------------------------------------------------------------------------
// 8. Script-ban decoding
// ---------------------------------------------------------------------------

void criterion_8() {
    auto t0 = Clock::now();
    FamilyConfig fam;
    fam.seed = 13;
    // Disjoint scripts mean denoising co-occurrence statistics are the only
    // bridge between HRL and LRL, so the family uses a compact lexicon and a
    // longer denoising stage than the shared-script criteria.
    fam.vocab_size = 40;
    fam.n_parallel = 8000;
    fam.n_mono_lrl = 8000;
    fam.lex_sub_rate = 0.3;
    fam.spell_noise_rate = 0.1;
    fam.n_test = 400;
    fam.script_remap = true;
    ModelDims dims{32, 2, 1, 1, 64, 64};
    Fixture fx(fam, dims, 19);

    ScriptRegistry reg;
    std::string en_class, hrl_class, lrl_class;
    for (const auto& lang : fx.bundle.languages) {
        reg.add_language(lang);
        if (lang.id == "en") en_class = lang.script_class;
        if (lang.id == "hrl") hrl_class = lang.script_class;
        if (lang.id == "lrl") lrl_class = lang.script_class;
    }
    auto ban = build_ban_mask(fx.vocab, reg, {en_class, hrl_class});

    Budget bg;
    bg.pretrain = 6;
    bg.supervised = 8;
    // Deliberately light adaptation so the unbanned decoder still leaks
    // wrong-script tokens; the ban is what this criterion exercises. The
    // BT fine-tune pass is skipped in a script-ban direction.
    const int adapt_epochs = 1;
    auto pre = fx.pretrained_model(bg.pretrain);
    auto m_l2e = fx.supervised_lrl2en(pre, bg.supervised, 10);
    auto bt = synthesize_bt_for_en2lrl(m_l2e, fx.vocab, fx.bundle.mono.at("lrl"), fx.decode, 1,
                                       "iter0");
    auto m = fx.adapt_en2lrl(pre, fx.bt_tokens(bt, "en", "lrl"), true, true, adapt_epochs, 100);

    const int en_tok = fx.vocab.lang_token("en");
    const int lrl_tok = fx.vocab.lang_token("lrl");
    auto decode_toks = [&](const std::vector<char>* mask) {
        std::vector<std::vector<int>> out;
        const std::size_t chunk = 256;
        for (std::size_t i = 0; i < fx.test_en_toks.size(); i += chunk) {
            std::vector<std::vector<int>> part(
                fx.test_en_toks.begin() + i,
                fx.test_en_toks.begin() +
                    std::min(fx.test_en_toks.size(), i + chunk));
            for (auto& g : m.generate(part, en_tok, lrl_tok, fx.decode, mask))
                out.push_back(std::move(g));
        }
        return out;
    };
    auto to_text = [&](const std::vector<std::vector<int>>& toks) {
        std::vector<std::string> out;
        for (const auto& seq : toks) {
            TokenSequence t;
            t.tokens = seq;
            out.push_back(detokenize(t, fx.vocab).text);
        }
        return out;
    };
    auto banned_toks = decode_toks(&ban);
    auto free_toks = decode_toks(nullptr);
    const double purity_banned = script_purity(banned_toks, fx.vocab, lrl_class);
    const double purity_free = script_purity(free_toks, fx.vocab, lrl_class);
    const double bleu_banned = bleu(to_text(banned_toks), fx.ref_lrl);
    const double bleu_free = bleu(to_text(free_toks), fx.ref_lrl);

    std::ostringstream d;
    d << std::fixed << std::setprecision(4) << "purity banned " << purity_banned
      << " (unbanned " << purity_free << "); " << std::setprecision(2) << "BLEU banned "
      << bleu_banned << " vs unbanned " << bleu_free;
    report(8, "script-ban decoding", purity_banned == 1.0 && bleu_banned > bleu_free, d.str(),
           elapsed(t0));
}

// ---------------------------------------------------------------------------
// 10. Monolingual-size ablation
// ---------------------------------------------------------------------------

void criterion_10() {
    auto t0 = Clock::now();
    FamilyConfig fam;
    fam.seed = 23;
    fam.vocab_size = 600;
    fam.n_parallel = 10000;
    fam.n_mono_lrl = 100000;
    fam.n_mono_hrl = 20000;
    fam.n_mono_en = 20000;
    fam.lex_sub_rate = 0.3;
    fam.spell_noise_rate = 0.1;
    fam.n_test = 400;
    auto bundle = gen_family(fam);

    PipelineConfig cfg;
    cfg.dims = ModelDims{32, 2, 1, 1, 64, 64};
    cfg.critic_dims = CriticDims{64, 16};
    cfg.pretrain_epochs = 2;
    cfg.supervised_epochs = 4;
    cfg.epochs_iter1_en2lrl = 4;
    cfg.epochs_iter1_lrl2en = 1;
    cfg.decode.max_len = 24;
    cfg.seed = 29;
    cfg.out_dir = io::fs::temp_directory_path() / "nmtadapt_accept_ablation";
    io::fs::remove_all(cfg.out_dir);
    auto rows = run_mono_ablation(bundle, {1000, 10000, 100000}, cfg);

    std::ostringstream d;
    d << std::fixed << std::setprecision(2);
    for (const auto& [size, score] : rows) d << size << ":" << score << " ";
    d << "(need BLEU(100k) > BLEU(1k))";
    report(10, "monolingual-size ablation", rows.back().second > rows.front().second, d.str(),
           elapsed(t0));
}

// ---------------------------------------------------------------------------
// 11. Reproducibility
// ---------------------------------------------------------------------------

void criterion_11() {
    auto t0 = Clock::now();
    FamilyConfig fam;
    fam.seed = 31;
    fam.vocab_size = 40;
    fam.n_parallel = 1500;
    fam.n_mono_lrl = 1500;
    fam.n_test = 100;
    auto bundle = gen_family(fam);

    auto run_once = [&](const char* tag) {
        PipelineConfig cfg;
        cfg.dims = ModelDims{16, 2, 1, 1, 32, 64};
        cfg.critic_dims = CriticDims{16, 8};
        cfg.k_max = 1;
        cfg.pretrain_epochs = 1;
        cfg.supervised_epochs = 2;
        cfg.epochs_iter1_en2lrl = 2;
        cfg.epochs_iter1_lrl2en = 2;
        cfg.decode.max_len = 20;
        cfg.seed = 37;
        cfg.out_dir = io::fs::temp_directory_path() / (std::string("nmtadapt_accept_") + tag);
        io::fs::remove_all(cfg.out_dir);
        return run_iterations(bundle, cfg);
    };
    auto s1 = run_once("repro_a");
    auto s2 = run_once("repro_b");
    bool ok = s1.artifact_hashes.size() == s2.artifact_hashes.size();
    for (const auto& [name, hash] : s1.artifact_hashes)
        ok = ok && s2.artifact_hashes.count(name) && s2.artifact_hashes.at(name) == hash;
    ok = ok && io::read_file(s1.manifest_path) == io::read_file(s2.manifest_path);
    std::ostringstream d;
    d << s1.artifact_hashes.size() << " artifact hashes compared (checkpoints, BT data, "
      << "timestamp-stripped metric streams); manifests byte-identical: " << (ok ? "yes" : "no");
    report(11, "seeded reproducibility", ok, d.str(), elapsed(t0));
}

}  // namespace

int main(int argc, char** argv) {
    std::set<int> wanted;
    for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));
    if (wanted.empty()) wanted = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11};

    if (wanted.count(1)) criterion_1();
    if (wanted.count(2)) criterion_2();
    if (wanted.count(3)) criterion_3();
    if (wanted.count(4)) criterion_4();
    criteria_5_to_9(wanted);
    if (wanted.count(8)) criterion_8();
    if (wanted.count(10)) criterion_10();
    if (wanted.count(11)) criterion_11();

    std::cout << (g_failures == 0 ? "ALL CRITERIA PASSED"
                                  : std::to_string(g_failures) + " CRITERIA FAILED")
              << std::endl;
    return g_failures == 0 ? 0 : 1;
}
