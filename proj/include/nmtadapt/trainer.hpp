#pragma once

// Multi-task training loops: denoising pretraining, the two adapted
// directions with their critics, and the final backtranslation-only pass.

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include "nmtadapt/noise.hpp"
#include "nmtadapt/objectives.hpp"
#include "nmtadapt/optim.hpp"

namespace nmtadapt {

struct BilingualData {
    std::vector<std::vector<int>> src, tgt;

    bool empty() const { return src.empty(); }
    void check_aligned(const char* what) const {
        if (src.size() != tgt.size())
            throw std::invalid_argument(std::string(what) + ": source/target count mismatch");
    }
};

struct TrainData {
    BilingualData parallel;  // real pairs for the direction's translation task
    BilingualData bt;        // synthesized-source pairs; may be empty
    // Reconstruction streams (clean text; noise is applied per epoch).
    std::vector<std::vector<int>> denoise_hrl, denoise_lrl;
    // Critic inputs, never noised.
    std::vector<std::vector<int>> adv_hrl, adv_lrl, adv_en;
};

enum class Direction { kEn2Lrl, kLrl2En };

struct TrainConfig {
    Direction direction = Direction::kEn2Lrl;
    int epochs = 1;
    int accumulation = 8;      // batches folded into one parameter update
    int critic_cadence = 1;    // critics step every update
    int gen_adv_cadence = 3;   // encoder adversarial term every 3rd update
    double model_lr = 3e-4;
    int warmup_updates = 200;
    double critic_lr = 0.01;
    double critic_clip = 0.05;  // <= 0 disables weight clipping
    TaskWeights weights;
    NoiseParams noise;
    int batch_tokens = 256;  // token budget per batch (source + target)
    std::uint64_t seed = 1;

    void validate() const {
        if (epochs < 0 || accumulation < 1 || critic_cadence < 1 || gen_adv_cadence < 1)
            throw std::invalid_argument("train config: cadences/accumulation must be >= 1");
        if (batch_tokens < 8) throw std::invalid_argument("train config: batch_tokens too small");
    }
};

struct UpdateRecord {
    long update = 0;  // 1-based across the whole run
    LossReport report;
    bool critic_stepped = false;
    bool gen_adv_stepped = false;
};

struct TrainLog {
    std::vector<UpdateRecord> updates;
    std::vector<std::string> warnings;
    std::vector<std::string> notes;

    long critic_steps() const {
        long n = 0;
        for (const auto& u : updates) n += u.critic_stepped;
        return n;
    }
    long gen_adv_steps() const {
        long n = 0;
        for (const auto& u : updates) n += u.gen_adv_stepped;
        return n;
    }
};

namespace detail {

inline void shuffle_indices(std::vector<std::size_t>& idx, std::mt19937_64& g) {
    for (std::size_t i = idx.size(); i > 1; --i)
        std::swap(idx[i - 1], idx[uniform_below(g, i)]);
}

// Greedy token-budget batching over a shuffled order; every sentence lands in
// exactly one batch.
inline std::vector<std::vector<std::size_t>> make_batches(const std::vector<long>& costs,
                                                          int budget, std::mt19937_64& g) {
    std::vector<std::size_t> idx(costs.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    shuffle_indices(idx, g);
    std::vector<std::vector<std::size_t>> out;
    long used = 0;
    for (std::size_t i : idx) {
        if (out.empty() || (used + costs[i] > budget && !out.back().empty())) {
            out.push_back({});
            used = 0;
        }
        out.back().push_back(i);
        used += costs[i];
    }
    if (!out.empty() && out.back().empty()) out.pop_back();
    return out;
}

inline std::vector<TaskBatch> bilingual_batches(const BilingualData& d, TaskKind kind,
                                                int src_lang, int tgt_lang, Provenance prov,
                                                int budget, std::mt19937_64& g) {
    std::vector<long> costs(d.src.size());
    for (std::size_t i = 0; i < d.src.size(); ++i)
        costs[i] = static_cast<long>(d.src[i].size() + d.tgt[i].size()) + 2;
    std::vector<TaskBatch> out;
    for (const auto& group : make_batches(costs, budget, g)) {
        TaskBatch b;
        b.kind = kind;
        b.src_lang_token = src_lang;
        b.tgt_lang_token = tgt_lang;
        b.provenance = prov;
        for (std::size_t i : group) {
            b.src.push_back(d.src[i]);
            b.tgt.push_back(d.tgt[i]);
        }
        out.push_back(std::move(b));
    }
    return out;
}

// Reconstruction batches: source is the noised sequence, target the clean one.
inline std::vector<TaskBatch> denoise_batches(const std::vector<std::vector<int>>& mono,
                                              int enc_lang, int dec_lang,
                                              const NoiseParams& noise, int budget,
                                              std::mt19937_64& g) {
    std::vector<long> costs(mono.size());
    for (std::size_t i = 0; i < mono.size(); ++i)
        costs[i] = 2 * static_cast<long>(mono[i].size()) + 2;
    std::vector<TaskBatch> out;
    for (const auto& group : make_batches(costs, budget, g)) {
        TaskBatch b;
        b.kind = TaskKind::kDenoising;
        b.src_lang_token = enc_lang;
        b.tgt_lang_token = dec_lang;
        for (std::size_t i : group) {
            TokenSequence clean;
            clean.tokens = mono[i];
            b.src.push_back(apply_noise(clean, noise, g).tokens);
            b.tgt.push_back(mono[i]);
        }
        out.push_back(std::move(b));
    }
    return out;
}

inline std::vector<std::vector<std::vector<int>>> mono_batches(
    const std::vector<std::vector<int>>& mono, int budget, std::mt19937_64& g) {
    std::vector<long> costs(mono.size());
    for (std::size_t i = 0; i < mono.size(); ++i)
        costs[i] = static_cast<long>(mono[i].size()) + 1;
    std::vector<std::vector<std::vector<int>>> out;
    for (const auto& group : make_batches(costs, budget, g)) {
        out.push_back({});
        for (std::size_t i : group) out.back().push_back(mono[i]);
    }
    return out;
}

template <typename T>
class CycleStream {
public:
    explicit CycleStream(std::vector<T> items) : items_(std::move(items)) {}
    bool empty() const { return items_.empty(); }
    std::size_t size() const { return items_.size(); }
    const T& next() {
        const T& out = items_[i_];
        i_ = (i_ + 1) % items_.size();
        return out;
    }

private:
    std::vector<T> items_;
    std::size_t i_ = 0;
};

inline EncodedBatch encode_adv(Tape& t, const TranslationModel& m,
                               const std::vector<std::vector<int>>& seqs, int lang_token) {
    auto enc = m.encode_batch(t, seqs, std::vector<int>(seqs.size(), lang_token));
    return EncodedBatch{enc.latents, enc.segs};
}

inline void check_finite(const LossReport& r, long update) {
    if (!r.finite())
        throw std::runtime_error("non-finite loss at update " + std::to_string(update));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Trainer
// ---------------------------------------------------------------------------

class Trainer {
public:
    Trainer(TranslationModel& model, const Vocabulary& vocab, const TrainConfig& cfg)
        : model_(model),
          vocab_(vocab),
          cfg_(cfg),
          model_opt_(cfg.model_lr, cfg.warmup_updates),
          model_params_(model.params().all()) {
        cfg.validate();
    }

    // Adversarial pair critic (HRL vs LRL); optional English critic.
    void attach_critics(Critic* pair_critic, Critic* english_critic) {
        critic1_ = pair_critic;
        critic2_ = english_critic;
        if (critic1_) {
            critic1_params_ = critic1_->params().all();
            critic1_opt_.emplace(cfg_.critic_lr);
        }
        if (critic2_) {
            critic2_params_ = critic2_->params().all();
            critic2_opt_.emplace(cfg_.critic_lr);
        }
    }

    // Joint multi-task loop. Streams not present in `data` simply drop their
    // term; `use_denoising` distinguishes the four-task direction from the
    // three-task one.
    TrainLog run(const TrainData& data, bool use_denoising) {
        TrainLog log;
        data.parallel.check_aligned("parallel");
        data.bt.check_aligned("backtranslation");
        if (data.parallel.empty()) throw std::invalid_argument("train: no parallel data");
        if (use_denoising && (data.denoise_hrl.empty() || data.denoise_lrl.empty()))
            throw std::invalid_argument("train: denoising requires both language streams");
        const bool use_adv = critic1_ != nullptr;
        if (use_adv && (data.adv_hrl.empty() || data.adv_lrl.empty()))
            throw std::invalid_argument("train: critic streams missing");
        if (critic2_ && data.adv_en.empty())
            throw std::invalid_argument("train: English critic stream missing");
        if (!use_denoising && (!data.denoise_hrl.empty() || !data.denoise_lrl.empty()))
            log.warnings.push_back("denoising stream ignored for this direction");

        const int hrl_tok = vocab_.lang_token("hrl");
        const int lrl_tok = vocab_.lang_token("lrl");
        const int en_tok = vocab_.lang_token("en");
        const bool to_lrl = cfg_.direction == Direction::kEn2Lrl;
        // Translation task uses the real pairs: En->HRL or HRL->En.
        const int tr_src = to_lrl ? en_tok : hrl_tok;
        const int tr_tgt = to_lrl ? hrl_tok : en_tok;
        // BT pairs: synthesized source -> real target.
        const int bt_src = to_lrl ? en_tok : lrl_tok;
        const int bt_tgt = to_lrl ? lrl_tok : en_tok;

        for (int epoch = 0; epoch < cfg_.epochs; ++epoch) {
            auto g = make_stream(cfg_.seed, 0x7E0000ULL + static_cast<std::uint64_t>(epoch));
            detail::CycleStream<TaskBatch> tr(detail::bilingual_batches(
                data.parallel, TaskKind::kTranslation, tr_src, tr_tgt, Provenance::kReal,
                cfg_.batch_tokens, g));
            detail::CycleStream<TaskBatch> bt(
                data.bt.empty()
                    ? std::vector<TaskBatch>{}
                    : detail::bilingual_batches(data.bt, TaskKind::kBacktranslation, bt_src,
                                                bt_tgt, Provenance::kSynthesized,
                                                cfg_.batch_tokens, g));
            detail::CycleStream<TaskBatch> dn_hrl(
                use_denoising ? detail::denoise_batches(data.denoise_hrl, hrl_tok, hrl_tok,
                                                        cfg_.noise, cfg_.batch_tokens, g)
                              : std::vector<TaskBatch>{});
            detail::CycleStream<TaskBatch> dn_lrl(
                use_denoising ? detail::denoise_batches(data.denoise_lrl, hrl_tok, lrl_tok,
                                                        cfg_.noise, cfg_.batch_tokens, g)
                              : std::vector<TaskBatch>{});
            detail::CycleStream<std::vector<std::vector<int>>> adv_hrl(
                use_adv ? detail::mono_batches(data.adv_hrl, cfg_.batch_tokens, g)
                        : std::vector<std::vector<std::vector<int>>>{});
            detail::CycleStream<std::vector<std::vector<int>>> adv_lrl(
                use_adv ? detail::mono_batches(data.adv_lrl, cfg_.batch_tokens, g)
                        : std::vector<std::vector<std::vector<int>>>{});
            detail::CycleStream<std::vector<std::vector<int>>> adv_en(
                critic2_ ? detail::mono_batches(data.adv_en, cfg_.batch_tokens, g)
                         : std::vector<std::vector<std::vector<int>>>{});

            // The longest CE stream drives the epoch; shorter streams cycle.
            std::size_t n_batches = tr.size();
            n_batches = std::max(n_batches, bt.size());
            n_batches = std::max(n_batches, dn_hrl.size());
            const long updates_this_epoch =
                (static_cast<long>(n_batches) + cfg_.accumulation - 1) / cfg_.accumulation;

            for (long u = 0; u < updates_this_epoch; ++u) {
                ++update_count_;
                UpdateRecord rec;
                rec.update = update_count_;
                rec.gen_adv_stepped = use_adv && (update_count_ % cfg_.gen_adv_cadence == 0);
                rec.critic_stepped = use_adv && (update_count_ % cfg_.critic_cadence == 0);

                model_.params().zero_grads();
                for (int a = 0; a < cfg_.accumulation; ++a) {
                    Tape t(true);
                    GenLossTerms terms;
                    terms.translation = loss_translation(t, model_, tr.next());
                    if (!bt.empty()) terms.backtranslation = loss_backtranslation(t, model_, bt.next());
                    if (use_denoising)
                        terms.denoising = loss_denoising(t, model_, dn_hrl.next(), dn_lrl.next());
                    if (rec.gen_adv_stepped) {
                        const auto& hrl_seqs = adv_hrl.next();
                        const auto& lrl_seqs = adv_lrl.next();
                        auto zh = detail::encode_adv(t, model_, hrl_seqs, hrl_tok);
                        auto zl = detail::encode_adv(t, model_, lrl_seqs, hrl_tok);
                        terms.adv1 = loss_adv_pair(t, *critic1_, zh, zl, Bind::kFrozen);
                        if (critic2_) {
                            auto non_en = hrl_seqs;
                            non_en.insert(non_en.end(), lrl_seqs.begin(), lrl_seqs.end());
                            auto zn = detail::encode_adv(t, model_, non_en, hrl_tok);
                            auto ze = detail::encode_adv(t, model_, adv_en.next(), en_tok);
                            terms.adv2 = loss_adv_english(t, *critic2_, zn, ze, Bind::kFrozen);
                        }
                    }
                    Tensor total = compose_generator(t, terms, cfg_.weights);
                    t.backward(total);
                    rec.report.l_t += terms.translation->val()(0, 0);
                    if (terms.backtranslation) rec.report.l_bt += terms.backtranslation->val()(0, 0);
                    if (terms.denoising) rec.report.l_da += terms.denoising->val()(0, 0);
                    if (terms.adv1) rec.report.l_adv1 += terms.adv1->val()(0, 0);
                    if (terms.adv2) rec.report.l_adv2 += terms.adv2->val()(0, 0);
                    rec.report.generator_total += total.val()(0, 0);
                }
                scale_grads(model_params_, 1.0 / cfg_.accumulation);
                rec.report.l_t /= cfg_.accumulation;
                rec.report.l_bt /= cfg_.accumulation;
                rec.report.l_da /= cfg_.accumulation;
                rec.report.l_adv1 /= cfg_.accumulation;
                rec.report.l_adv2 /= cfg_.accumulation;
                rec.report.generator_total /= cfg_.accumulation;
                model_opt_.step(model_params_);

                if (rec.critic_stepped) {
                    rec.report.critic1_total =
                        critic_step(*critic1_, critic1_params_, *critic1_opt_, adv_hrl.next(),
                                    hrl_tok, adv_lrl.next(), hrl_tok);
                    if (critic2_) {
                        auto non_en = adv_hrl.next();
                        for (const auto& s : adv_lrl.next()) non_en.push_back(s);
                        rec.report.critic2_total =
                            critic_step(*critic2_, critic2_params_, *critic2_opt_, non_en,
                                        hrl_tok, adv_en.next(), en_tok);
                    }
                }
                rec.report.l_adv = rec.report.l_adv1;
                detail::check_finite(rec.report, rec.update);
                log.updates.push_back(rec);
            }
        }
        return log;
    }

    long updates_done() const { return update_count_; }

private:
    static void scale_grads(std::vector<ad::Param*>& ps, double s) {
        for (auto* p : ps) p->grad *= s;
    }

    double critic_step(Critic& critic, std::vector<ad::Param*>& cps, Optimizer& opt,
                       const std::vector<std::vector<int>>& pos_seqs, int pos_tok,
                       const std::vector<std::vector<int>>& neg_seqs, int neg_tok) {
        // Latents are computed without gradients: the critic trains against a
        // fixed encoder snapshot.
        Tape fwd(false);
        auto zp = detail::encode_adv(fwd, model_, pos_seqs, pos_tok);
        auto zn = detail::encode_adv(fwd, model_, neg_seqs, neg_tok);
        Tape t(true);
        EncodedBatch pos{t.constant(zp.z.val()), zp.segs};
        EncodedBatch neg{t.constant(zn.z.val()), zn.segs};
        critic.params().zero_grads();
        Tensor gap = critic_gap(t, critic, pos, neg, Bind::kTrainable);
        // The critic descends the gap itself; the generator's −60 multiplier
        // makes the encoder's adversarial gradient exactly opposite in sign.
        t.backward(gap);
        opt.step(cps);
        if (cfg_.critic_clip > 0) clip_weights(cps, cfg_.critic_clip);
        return gap.val()(0, 0);
    }

    TranslationModel& model_;
    const Vocabulary& vocab_;
    TrainConfig cfg_;
    Adam model_opt_;
    std::vector<ad::Param*> model_params_;
    Critic* critic1_ = nullptr;
    Critic* critic2_ = nullptr;
    std::vector<ad::Param*> critic1_params_, critic2_params_;
    std::optional<RMSprop> critic1_opt_, critic2_opt_;
    long update_count_ = 0;
};

// ---------------------------------------------------------------------------
// Entry points
// ---------------------------------------------------------------------------

// Reconstruction-only warm start over the three monolingual corpora; the
// stand-in for initializing from a large pretrained checkpoint.
inline TrainLog pretrain_denoising(TranslationModel& model, const Vocabulary& vocab,
                                   const std::vector<std::vector<int>>& mono_en,
                                   const std::vector<std::vector<int>>& mono_hrl,
                                   const std::vector<std::vector<int>>& mono_lrl,
                                   const TrainConfig& cfg) {
    cfg.validate();
    if (mono_en.empty() || mono_hrl.empty() || mono_lrl.empty())
        throw std::invalid_argument("pretrain: all three monolingual corpora are required");
    TrainLog log;
    const int en_tok = vocab.lang_token("en");
    const int hrl_tok = vocab.lang_token("hrl");
    const int lrl_tok = vocab.lang_token("lrl");
    Adam opt(cfg.model_lr, cfg.warmup_updates);
    auto params = model.params().all();
    long update = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        auto g = make_stream(cfg.seed, 0x9E0000ULL + static_cast<std::uint64_t>(epoch));
        std::vector<TaskBatch> batches;
        for (auto& b :
             detail::denoise_batches(mono_en, en_tok, en_tok, cfg.noise, cfg.batch_tokens, g))
            batches.push_back(std::move(b));
        for (auto& b :
             detail::denoise_batches(mono_hrl, hrl_tok, hrl_tok, cfg.noise, cfg.batch_tokens, g))
            batches.push_back(std::move(b));
        for (auto& b :
             detail::denoise_batches(mono_lrl, hrl_tok, lrl_tok, cfg.noise, cfg.batch_tokens, g))
            batches.push_back(std::move(b));
        std::vector<std::size_t> order(batches.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        detail::shuffle_indices(order, g);

        std::size_t pos = 0;
        while (pos < order.size()) {
            ++update;
            model.params().zero_grads();
            int consumed = 0;
            UpdateRecord rec;
            rec.update = update;
            for (; consumed < cfg.accumulation && pos < order.size(); ++consumed, ++pos) {
                Tape t(true);
                Tensor loss = sequence_ce(t, model, batches[order[pos]]);
                t.backward(loss);
                rec.report.l_da += loss.val()(0, 0);
            }
            for (auto* p : params) p->grad *= 1.0 / consumed;
            rec.report.l_da /= consumed;
            rec.report.generator_total = rec.report.l_da;
            detail::check_finite(rec.report, update);
            opt.step(params);
            log.updates.push_back(rec);
        }
    }
    return log;
}

// Four simultaneous tasks: translation, denoising, backtranslation, and the
// two-critic adversarial alignment.
inline TrainLog train_en2lrl(TranslationModel& model, Critic& pair_critic,
                             Critic& english_critic, const Vocabulary& vocab,
                             const TrainData& data, TrainConfig cfg) {
    cfg.direction = Direction::kEn2Lrl;
    Trainer tr(model, vocab, cfg);
    tr.attach_critics(&pair_critic, &english_critic);
    return tr.run(data, /*use_denoising=*/true);
}

// Three tasks and a single critic; encoder inputs are never noised.
inline TrainLog train_lrl2en(TranslationModel& model, Critic& pair_critic,
                             const Vocabulary& vocab, const TrainData& data, TrainConfig cfg) {
    cfg.direction = Direction::kLrl2En;
    Trainer tr(model, vocab, cfg);
    tr.attach_critics(&pair_critic, nullptr);
    return tr.run(data, /*use_denoising=*/false);
}

// One epoch over the synthesized pairs only. Skipped (model untouched) when
// decoding for this direction uses a script ban, which already removes the
// failure mode this pass exists to fix.
inline TrainLog finetune_bt(TranslationModel& model, const Vocabulary& vocab,
                            const BilingualData& bt, Direction direction, bool script_ban_active,
                            TrainConfig cfg) {
    TrainLog log;
    if (script_ban_active) {
        log.notes.push_back("skipped: script-ban decoding active");
        return log;
    }
    if (bt.empty()) throw std::invalid_argument("finetune_bt: no synthesized pairs");
    bt.check_aligned("backtranslation");
    cfg.direction = direction;
    cfg.epochs = 1;
    cfg.validate();
    const bool to_lrl = direction == Direction::kEn2Lrl;
    const int src_tok = vocab.lang_token(to_lrl ? "en" : "lrl");
    const int tgt_tok = vocab.lang_token(to_lrl ? "lrl" : "en");
    Adam opt(cfg.model_lr, cfg.warmup_updates);
    auto params = model.params().all();
    auto g = make_stream(cfg.seed, 0xF7000000ULL);
    auto batches = detail::bilingual_batches(bt, TaskKind::kBacktranslation, src_tok, tgt_tok,
                                             Provenance::kSynthesized, cfg.batch_tokens, g);
    long update = 0;
    std::size_t pos = 0;
    while (pos < batches.size()) {
        ++update;
        model.params().zero_grads();
        int consumed = 0;
        UpdateRecord rec;
        rec.update = update;
        for (; consumed < cfg.accumulation && pos < batches.size(); ++consumed, ++pos) {
            Tape t(true);
            Tensor loss = loss_backtranslation(t, model, batches[pos]);
            t.backward(loss);
            rec.report.l_bt += loss.val()(0, 0);
        }
        for (auto* p : params) p->grad *= 1.0 / consumed;
        rec.report.l_bt /= consumed;
        rec.report.generator_total = rec.report.l_bt;
        detail::check_finite(rec.report, update);
        opt.step(params);
        log.updates.push_back(rec);
    }
    return log;
}

// Reconstruction loss on held-out text with a fixed noise draw; used to
// verify that pretraining actually learned something.
inline double heldout_denoise_loss(const TranslationModel& model, const Vocabulary& vocab,
                                   const std::vector<std::vector<int>>& mono, int enc_lang,
                                   int dec_lang, const NoiseParams& noise, std::uint64_t seed) {
    if (mono.empty()) throw std::invalid_argument("heldout_denoise_loss: empty corpus");
    (void)vocab;
    auto g = make_stream(seed, 0x4E1DULL);
    TaskBatch b;
    b.kind = TaskKind::kDenoising;
    b.src_lang_token = enc_lang;
    b.tgt_lang_token = dec_lang;
    for (const auto& s : mono) {
        TokenSequence clean;
        clean.tokens = s;
        b.src.push_back(apply_noise(clean, noise, g).tokens);
        b.tgt.push_back(s);
    }
    Tape t(false);
    return sequence_ce(t, model, b).val()(0, 0);
}

}  // namespace nmtadapt
