#pragma once

// Training losses: cross-entropy tasks (translation, denoising
// reconstruction, backtranslation) and the critic score gaps, plus their
// composition into the generator objective.

#include <cmath>
#include <optional>
#include <stdexcept>

#include "nmtadapt/model.hpp"

namespace nmtadapt {

enum class TaskKind { kTranslation, kDenoising, kBacktranslation, kAdversarial };
enum class Provenance { kReal, kSynthesized };

struct TaskBatch {
    TaskKind kind = TaskKind::kTranslation;
    std::vector<std::vector<int>> src;
    std::vector<std::vector<int>> tgt;
    int src_lang_token = -1;  // encoder conditioning token
    int tgt_lang_token = -1;  // decoder conditioning token
    Provenance provenance = Provenance::kReal;

    bool empty() const { return src.empty(); }
};

struct EncodedBatch {
    Tensor z;
    std::vector<Segment> segs;
};

// Mean token-level cross entropy of the batch under teacher forcing; every
// target token plus the closing EOS counts once.
inline Tensor sequence_ce(Tape& t, const TranslationModel& m, const TaskBatch& b) {
    if (b.empty()) throw std::invalid_argument("loss: empty batch");
    if (b.src.size() != b.tgt.size())
        throw std::invalid_argument("loss: source/target count mismatch");
    auto enc = m.encode_batch(t, b.src, std::vector<int>(b.src.size(), b.src_lang_token));
    std::vector<Segment> segs;
    Tensor logits = m.decode_logits_batch(t, enc, b.tgt,
                                          std::vector<int>(b.tgt.size(), b.tgt_lang_token), &segs);
    std::vector<int> targets;
    std::vector<double> weights;
    for (std::size_t s = 0; s < b.tgt.size(); ++s) {
        for (int id : b.tgt[s]) targets.push_back(id);
        targets.push_back(Vocabulary::kEos);
        for (int i = 0; i < segs[s].len; ++i) weights.push_back(1.0);
    }
    return ad::softmax_cross_entropy(logits, targets, weights);
}

inline Tensor loss_translation(Tape& t, const TranslationModel& m, const TaskBatch& b) {
    if (b.kind != TaskKind::kTranslation)
        throw std::invalid_argument("loss_translation: wrong task kind");
    return sequence_ce(t, m, b);
}

// Same formula as translation; the pair was synthesized by another model and
// only the model being trained sees gradients (the pair is plain data here).
inline Tensor loss_backtranslation(Tape& t, const TranslationModel& m, const TaskBatch& b) {
    if (b.kind != TaskKind::kBacktranslation)
        throw std::invalid_argument("loss_backtranslation: wrong task kind");
    if (b.provenance != Provenance::kSynthesized)
        throw std::invalid_argument("loss_backtranslation: batch is not synthesized");
    return sequence_ce(t, m, b);
}

// Sum of the two per-language reconstruction losses. Both sub-batches carry
// noised source text; the caller sets the encoder token (the high-resource
// language token for both) and each decoder's own language token.
inline Tensor loss_denoising(Tape& t, const TranslationModel& m, const TaskBatch& hrl,
                             const TaskBatch& lrl) {
    if (hrl.empty() || lrl.empty())
        throw std::invalid_argument("loss_denoising: both language sub-batches are required");
    if (hrl.kind != TaskKind::kDenoising || lrl.kind != TaskKind::kDenoising)
        throw std::invalid_argument("loss_denoising: wrong task kind");
    return ad::add(sequence_ce(t, m, hrl), sequence_ce(t, m, lrl));
}

// mean critic score over `pos` minus mean over `neg`. The critic descends
// this gap (separating the two sides with a negative gap); the encoder,
// via the negative generator multiplier, is trained to close it.
inline Tensor critic_gap(Tape& t, const Critic& c, const EncodedBatch& pos,
                         const EncodedBatch& neg, Bind bind) {
    if (pos.segs.empty() || neg.segs.empty())
        throw std::invalid_argument("adversarial loss: empty side");
    return ad::sub(ad::mean_all(c.score_batch(t, pos.z, pos.segs, bind)),
                   ad::mean_all(c.score_batch(t, neg.z, neg.segs, bind)));
}

// Language-pair critic: scores HRL latents against LRL latents.
inline Tensor loss_adv_pair(Tape& t, const Critic& c, const EncodedBatch& z_hrl,
                            const EncodedBatch& z_lrl, Bind bind) {
    return critic_gap(t, c, z_hrl, z_lrl, bind);
}

// English critic: pooled non-English latents against pooled English latents.
inline Tensor loss_adv_english(Tape& t, const Critic& c, const EncodedBatch& z_non_english,
                               const EncodedBatch& z_english, Bind bind) {
    return critic_gap(t, c, z_non_english, z_english, bind);
}

struct TaskWeights {
    double translation = 1.0;
    double denoising = 1.0;
    double backtranslation = 1.0;
    double adv_multiplier = -60.0;  // on the generator; critics descend +gap
};

struct GenLossTerms {
    std::optional<Tensor> translation;
    std::optional<Tensor> denoising;
    std::optional<Tensor> backtranslation;
    std::optional<Tensor> adv1;
    std::optional<Tensor> adv2;
};

inline Tensor compose_generator(Tape& t, const GenLossTerms& terms, const TaskWeights& w) {
    std::optional<Tensor> total;
    auto acc = [&](const std::optional<Tensor>& term, double weight) {
        if (!term || weight == 0.0) return;
        Tensor scaled = weight == 1.0 ? *term : ad::scale(*term, weight);
        total = total ? ad::add(*total, scaled) : scaled;
    };
    acc(terms.translation, w.translation);
    acc(terms.denoising, w.denoising);
    acc(terms.backtranslation, w.backtranslation);
    acc(terms.adv1, w.adv_multiplier);
    acc(terms.adv2, w.adv_multiplier);
    // No active terms (e.g. an all-zero-weight update off the adversarial
    // cadence) composes to a zero objective, which steps nothing.
    if (!total) return t.constant(MatrixXd::Zero(1, 1));
    return *total;
}

struct LossReport {
    double l_t = 0, l_da = 0, l_bt = 0;
    double l_adv1 = 0, l_adv2 = 0, l_adv = 0;
    double generator_total = 0;
    double critic1_total = 0, critic2_total = 0;

    bool finite() const {
        for (double v : {l_t, l_da, l_bt, l_adv1, l_adv2, l_adv, generator_total, critic1_total,
                         critic2_total})
            if (!std::isfinite(v)) return false;
        return true;
    }
};

}  // namespace nmtadapt
