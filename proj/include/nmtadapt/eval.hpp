#pragma once

// Evaluation: corpus BLEU, latent-alignment diagnostics, output-script
// purity, and the metrics record stream.

#include <chrono>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "nmtadapt/corpus.hpp"
#include "nmtadapt/optim.hpp"
#include "nmtadapt/rng.hpp"

namespace nmtadapt {

// ---------------------------------------------------------------------------
// BLEU
// ---------------------------------------------------------------------------

struct BleuConfig {
    int max_order = 4;
    enum class Smoothing { kAddOneHigherOrders, kExact };
    Smoothing smoothing = Smoothing::kAddOneHigherOrders;
    TokenizeMode tokenization = TokenizeMode::kWord;

    void validate() const {
        if (max_order < 1) throw std::invalid_argument("bleu: max_order must be >= 1");
    }
};

namespace detail {

inline std::map<std::vector<std::string>, long> ngram_counts(
    const std::vector<std::string>& toks, int n) {
    std::map<std::vector<std::string>, long> out;
    if (static_cast<int>(toks.size()) < n) return out;
    for (std::size_t i = 0; i + n <= toks.size(); ++i)
        ++out[std::vector<std::string>(toks.begin() + i, toks.begin() + i + n)];
    return out;
}

}  // namespace detail

// Corpus-level geometric mean of modified n-gram precisions times the
// brevity penalty, scaled to [0, 100].
inline double bleu(const std::vector<std::string>& hypotheses,
                   const std::vector<std::string>& references, const BleuConfig& cfg = {}) {
    cfg.validate();
    if (hypotheses.size() != references.size())
        throw std::invalid_argument("bleu: hypothesis/reference count mismatch");
    if (hypotheses.empty()) throw std::invalid_argument("bleu: empty corpus");

    std::vector<long> matches(cfg.max_order, 0), totals(cfg.max_order, 0);
    long hyp_len = 0, ref_len = 0;
    for (std::size_t i = 0; i < hypotheses.size(); ++i) {
        auto h = split_tokens(hypotheses[i], cfg.tokenization);
        auto r = split_tokens(references[i], cfg.tokenization);
        hyp_len += static_cast<long>(h.size());
        ref_len += static_cast<long>(r.size());
        for (int n = 1; n <= cfg.max_order; ++n) {
            auto hc = detail::ngram_counts(h, n);
            auto rc = detail::ngram_counts(r, n);
            for (const auto& [gram, count] : hc) {
                totals[n - 1] += count;
                auto it = rc.find(gram);
                if (it != rc.end()) matches[n - 1] += std::min(count, it->second);
            }
        }
    }

    double log_sum = 0.0;
    for (int n = 1; n <= cfg.max_order; ++n) {
        long m = matches[n - 1], t = totals[n - 1];
        if (cfg.smoothing == BleuConfig::Smoothing::kAddOneHigherOrders && n >= 2) {
            m += 1;
            t += 1;
        }
        if (t == 0) continue;  // no n-grams of this order exist; vacuous
        if (m == 0) return 0.0;
        log_sum += std::log(static_cast<double>(m) / t) / cfg.max_order;
    }
    const double bp =
        hyp_len >= ref_len || hyp_len == 0
            ? (hyp_len == 0 ? 0.0 : 1.0)
            : std::exp(1.0 - static_cast<double>(ref_len) / hyp_len);
    return 100.0 * bp * std::exp(log_sum);
}

// ---------------------------------------------------------------------------
// Latent alignment diagnostics
// ---------------------------------------------------------------------------

struct AlignmentProbe {
    double wasserstein_gap = 0.0;
    double probe_accuracy = 0.0;
};

namespace detail {

inline Eigen::VectorXd mean_pool(const ad::MatrixXd& latents) {
    return latents.colwise().mean().transpose();
}

}  // namespace detail

// Trains throwaway diagnostics on mean-pooled latents: a clipped linear
// critic for the score gap and a logistic probe (80/20 split) for held-out
// language classification accuracy. Never touches model parameters.
inline AlignmentProbe probe_alignment(const std::vector<ad::MatrixXd>& latents_hrl,
                                      const std::vector<ad::MatrixXd>& latents_lrl,
                                      std::uint64_t seed = 17) {
    if (latents_hrl.size() < 100 || latents_lrl.size() < 100)
        throw std::invalid_argument("probe_alignment: need at least 100 latents per side");
    const long d = latents_hrl[0].cols();
    std::vector<Eigen::VectorXd> xs;
    std::vector<double> ys;
    for (const auto& z : latents_hrl) {
        xs.push_back(detail::mean_pool(z));
        ys.push_back(1.0);
    }
    for (const auto& z : latents_lrl) {
        xs.push_back(detail::mean_pool(z));
        ys.push_back(0.0);
    }

    // Clipped linear critic: ascend mean(pos) - mean(neg), weights in +-0.05.
    {
        Eigen::VectorXd delta = Eigen::VectorXd::Zero(d);
        for (std::size_t i = 0; i < latents_hrl.size(); ++i) delta += xs[i];
        delta /= static_cast<double>(latents_hrl.size());
        Eigen::VectorXd neg_mean = Eigen::VectorXd::Zero(d);
        for (std::size_t i = latents_hrl.size(); i < xs.size(); ++i) neg_mean += xs[i];
        neg_mean /= static_cast<double>(latents_lrl.size());
        delta -= neg_mean;
        Eigen::VectorXd w = Eigen::VectorXd::Zero(d);
        for (int step = 0; step < 200; ++step)
            w = (w + 0.01 * delta).cwiseMax(-0.05).cwiseMin(0.05);
        // gap = critic score difference under the trained weights
        // (bias cancels in the difference).
        AlignmentProbe out;
        out.wasserstein_gap = std::abs(w.dot(delta));

        // Logistic probe: deterministic 80/20 split, full-batch descent.
        // Held-out accuracy is averaged over a few split seeds so the metric
        // is not at the mercy of one draw. The split is by *position*, jointly
        // across the two sides: the i-th latent of each side always lands in
        // the same partition, so duplicated or paired sides cannot leak a
        // training twin into the held-out set.
        const std::size_t n_h = latents_hrl.size();
        const std::size_t n_pos = std::max(n_h, latents_lrl.size());
        auto split_accuracy = [&](std::uint64_t split_index) {
            std::vector<std::size_t> pos(n_pos);
            for (std::size_t i = 0; i < pos.size(); ++i) pos[i] = i;
            auto g = make_stream(seed, 0x9B0BE0ULL + split_index);
            for (std::size_t i = pos.size(); i > 1; --i)
                std::swap(pos[i - 1], pos[uniform_below(g, i)]);
            const std::size_t n_train_pos = pos.size() * 4 / 5;
            std::vector<std::size_t> idx;
            for (std::size_t r = 0; r < pos.size(); ++r) {
                const std::size_t i = pos[r];
                if (i < n_h) idx.push_back(i);
                if (i < latents_lrl.size()) idx.push_back(n_h + i);
            }
            std::size_t n_train = 0;
            for (std::size_t r = 0; r < n_train_pos; ++r) {
                n_train += pos[r] < n_h;
                n_train += pos[r] < latents_lrl.size();
            }
            // Standardize features on the training split so one step size
            // works regardless of latent scale.
            Eigen::VectorXd mu = Eigen::VectorXd::Zero(d);
            for (std::size_t i = 0; i < n_train; ++i) mu += xs[idx[i]];
            mu /= static_cast<double>(n_train);
            Eigen::VectorXd var = Eigen::VectorXd::Zero(d);
            for (std::size_t i = 0; i < n_train; ++i)
                var += (xs[idx[i]] - mu).cwiseAbs2();
            var /= static_cast<double>(n_train);
            const Eigen::VectorXd sd = (var.array() + 1e-8).sqrt().matrix();
            auto feat = [&](std::size_t j) -> Eigen::VectorXd {
                return (xs[j] - mu).cwiseQuotient(sd);
            };
            Eigen::VectorXd pw = Eigen::VectorXd::Zero(d);
            double pb = 0.0;
            for (int epoch = 0; epoch < 400; ++epoch) {
                Eigen::VectorXd gw = Eigen::VectorXd::Zero(d);
                double gb = 0.0;
                for (std::size_t i = 0; i < n_train; ++i) {
                    const Eigen::VectorXd x = feat(idx[i]);
                    const double p = 1.0 / (1.0 + std::exp(-(pw.dot(x) + pb)));
                    const double err = p - ys[idx[i]];
                    gw += err * x;
                    gb += err;
                }
                // Mild L2: keeps weights bounded on indistinguishable or
                // duplicated sides without erasing genuine structure.
                pw -= 0.5 * ((1.0 / n_train) * gw + 0.01 * pw);
                pb -= 0.5 * (1.0 / n_train) * gb;
            }
            long correct = 0;
            for (std::size_t i = n_train; i < idx.size(); ++i) {
                const double p = 1.0 / (1.0 + std::exp(-(pw.dot(feat(idx[i])) + pb)));
                correct += (p >= 0.5) == (ys[idx[i]] >= 0.5);
            }
            return static_cast<double>(correct) / (idx.size() - n_train);
        };
        const int n_splits = 5;
        double acc = 0.0;
        for (int s = 0; s < n_splits; ++s) acc += split_accuracy(s);
        out.probe_accuracy = acc / n_splits;
        return out;
    }
}

// ---------------------------------------------------------------------------
// Script purity
// ---------------------------------------------------------------------------

// Fraction of non-special output tokens whose characters all belong to the
// allowed script class. Vacuously 1.0 (with a warning) for empty output.
inline double script_purity(const std::vector<std::vector<int>>& outputs,
                            const Vocabulary& vocab, const std::string& allowed_class,
                            std::vector<std::string>* warnings = nullptr) {
    long total = 0, pure = 0;
    for (const auto& seq : outputs) {
        for (int id : seq) {
            if (vocab.is_special(id)) continue;
            ++total;
            pure += vocab.script_of(id) == allowed_class;
        }
    }
    if (total == 0) {
        if (warnings) warnings->push_back("script_purity: no scorable tokens; reporting 1.0");
        return 1.0;
    }
    return static_cast<double>(pure) / total;
}

// ---------------------------------------------------------------------------
// Metrics stream
// ---------------------------------------------------------------------------

inline const std::set<std::string>& metric_registry() {
    static const std::set<std::string> names{
        "loss_translation", "loss_denoising",  "loss_backtranslation",
        "loss_adv_pair",    "loss_adv_english", "loss_adv",
        "generator_total",  "critic1_total",   "critic2_total",
        "bleu_dev",         "bleu_test",       "probe_accuracy",
        "wasserstein_gap",  "script_purity",   "bt_pairs",
        "bt_dropped",       "epoch",           "iteration",
    };
    return names;
}

struct MetricsRecord {
    std::string run;
    long step = 0;
    std::map<std::string, double> metrics;

    void set(const std::string& name, double value) {
        if (!metric_registry().count(name))
            throw std::invalid_argument("unknown metric name: " + name);
        metrics[name] = value;
    }

    std::string to_jsonl() const {
        nlohmann::json j;
        j["run"] = run;
        j["step"] = step;
        for (const auto& [k, v] : metrics) j[k] = v;
        j["ts"] = static_cast<long>(std::chrono::duration_cast<std::chrono::seconds>(
                                        std::chrono::system_clock::now().time_since_epoch())
                                        .count());
        return j.dump();
    }
};

}  // namespace nmtadapt
