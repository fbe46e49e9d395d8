#pragma once

// Encoder-decoder translation network with language-token control, the two
// sequence critics, and checkpoint IO.

#include <algorithm>
#include <cmath>
#include <cstring>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "nmtadapt/autodiff.hpp"
#include "nmtadapt/corpus.hpp"
#include "nmtadapt/io.hpp"
#include "nmtadapt/rng.hpp"

namespace nmtadapt {

using ad::MatrixXd;
using ad::Param;
using ad::Segment;
using ad::Tape;
using ad::Tensor;

struct ModelDims {
    int d_model = 64;
    int n_heads = 4;
    int enc_layers = 2;
    int dec_layers = 2;
    int d_ff = 128;
    int max_len = 96;

    void validate() const {
        if (d_model <= 0 || n_heads <= 0 || d_model % n_heads != 0)
            throw std::invalid_argument("model dims: d_model must be a positive multiple of n_heads");
        if (enc_layers <= 0 || dec_layers <= 0 || d_ff <= 0 || max_len <= 0)
            throw std::invalid_argument("model dims: counts must be positive");
    }
};

struct CriticDims {
    int fc = 512;   // widths of the two leading fully connected layers
    int gru = 128;  // hidden size of the bidirectional recurrent layer
};

// Per-position latent vectors for one input sequence (language-token prefix
// included).
struct LatentSequence {
    MatrixXd vectors;  // (positions x d_model)
    long length() const { return vectors.rows(); }
};

// ---------------------------------------------------------------------------
// Parameter store
// ---------------------------------------------------------------------------

class ParamStore {
public:
    Param& add(const std::string& name, long rows, long cols, double stddev,
               std::mt19937_64& g) {
        MatrixXd m(rows, cols);
        if (stddev == 0.0) {
            m.setZero();
        } else {
            for (long i = 0; i < rows; ++i)
                for (long j = 0; j < cols; ++j) m(i, j) = normal(g) * stddev;
        }
        params_.emplace_back(name, std::move(m));
        return params_.back();
    }

    Param& add_ones(const std::string& name, long rows, long cols) {
        params_.emplace_back(name, MatrixXd::Ones(rows, cols));
        return params_.back();
    }

    std::vector<Param*> all() {
        std::vector<Param*> out;
        for (auto& p : params_) out.push_back(&p);
        return out;
    }

    std::vector<const Param*> all() const {
        std::vector<const Param*> out;
        for (auto& p : params_) out.push_back(&p);
        return out;
    }

    Param& by_name(const std::string& name) {
        for (auto& p : params_)
            if (p.name == name) return p;
        throw std::invalid_argument("no parameter named " + name);
    }

    void zero_grads() {
        for (auto& p : params_) p.zero_grad();
    }

private:
    std::deque<Param> params_;  // stable addresses
};

// How critic parameters are bound into a graph: trainable when the critic
// itself is being optimized, frozen when it only scores for the generator.
enum class Bind { kTrainable, kFrozen };

// ---------------------------------------------------------------------------
// Packing sequences into (rows = positions) matrices
// ---------------------------------------------------------------------------

struct Packed {
    std::vector<int> ids;
    std::vector<int> positions;
    std::vector<Segment> segs;
};

inline Packed pack_with_prefix(const std::vector<std::vector<int>>& seqs,
                               const std::vector<int>& prefix_tokens) {
    Packed p;
    int offset = 0;
    for (std::size_t s = 0; s < seqs.size(); ++s) {
        const int len = static_cast<int>(seqs[s].size()) + 1;
        p.segs.push_back({offset, len});
        p.ids.push_back(prefix_tokens[s]);
        p.positions.push_back(0);
        for (std::size_t i = 0; i < seqs[s].size(); ++i) {
            p.ids.push_back(seqs[s][i]);
            p.positions.push_back(static_cast<int>(i) + 1);
        }
        offset += len;
    }
    return p;
}

// ---------------------------------------------------------------------------
// Translation model
// ---------------------------------------------------------------------------

struct GenerateConfig {
    enum class Mode { kGreedy, kBeam };
    Mode mode = Mode::kGreedy;
    int beam_k = 4;
    int max_len = 48;
};

class TranslationModel {
public:
    TranslationModel(const Vocabulary& vocab, const ModelDims& dims, std::uint64_t seed)
        : dims_(dims), vocab_size_(vocab.size()) {
        dims.validate();
        auto g = make_stream(seed, 0x3D0DULL);
        const double sd = 0.02;
        const int d = dims.d_model;
        embed_ = &store_.add("embed", vocab_size_, d, sd, g);
        pos_ = &store_.add("pos", dims.max_len, d, sd, g);
        for (int l = 0; l < dims.enc_layers; ++l) add_layer("enc" + std::to_string(l), false, g);
        for (int l = 0; l < dims.dec_layers; ++l) add_layer("dec" + std::to_string(l), true, g);
        add_ln("enc_final", g);
        add_ln("dec_final", g);
        out_w_ = &store_.add("out_w", d, vocab_size_, sd, g);
        out_b_ = &store_.add("out_b", 1, vocab_size_, 0.0, g);

        // The low-resource language starts from the high-resource language's
        // token embedding so that both decode from the same starting point.
        if (has_lang(vocab, "hrl") && has_lang(vocab, "lrl")) {
            embed_->value.row(vocab.lang_token("lrl")) = embed_->value.row(vocab.lang_token("hrl"));
        }
    }

    const ModelDims& dims() const { return dims_; }
    int vocab_size() const { return vocab_size_; }
    ParamStore& params() { return store_; }
    const ParamStore& params() const { return store_; }

    // Parameter partition used for adversarial gradient routing: the encoder
    // side is the embeddings, positions and encoder stack; the decoder side
    // is everything else.
    bool is_encoder_param(const Param& p) const {
        return p.name == "embed" || p.name == "pos" || p.name.rfind("enc", 0) == 0;
    }

    struct Encoded {
        Tensor latents;              // (total positions x d_model)
        std::vector<Segment> segs;
    };

    // Language-token prefix convention: the encoder sees the source language
    // token at position 0, the decoder prefix starts with the target token.
    Encoded encode_batch(Tape& t, const std::vector<std::vector<int>>& seqs,
                         const std::vector<int>& lang_tokens) const {
        if (seqs.empty()) throw std::invalid_argument("encode: empty batch");
        for (const auto& s : seqs)
            if (static_cast<int>(s.size()) + 1 > dims_.max_len)
                throw std::invalid_argument("encode: sequence longer than max_len");
        Packed p = pack_with_prefix(seqs, lang_tokens);
        Tensor x = embed_positions(t, p);
        for (int l = 0; l < dims_.enc_layers; ++l)
            x = layer_forward(t, "enc" + std::to_string(l), x, p.segs, false, nullptr, nullptr);
        x = apply_ln(t, "enc_final", x);
        return Encoded{x, p.segs};
    }

    // Teacher-forced decoder logits over packed target prefixes.
    // prefixes[s] = gold target tokens (no language token, no EOS); row k of
    // segment s holds the logits that predict target token k (EOS last).
    Tensor decode_logits_batch(Tape& t, const Encoded& enc,
                               const std::vector<std::vector<int>>& prefixes,
                               const std::vector<int>& lang_tokens,
                               std::vector<Segment>* out_segs = nullptr) const {
        Packed p = pack_with_prefix(prefixes, lang_tokens);
        if (p.segs.size() != enc.segs.size())
            throw std::invalid_argument("decode: batch size mismatch with encoder output");
        Tensor x = embed_positions(t, p);
        for (int l = 0; l < dims_.dec_layers; ++l)
            x = layer_forward(t, "dec" + std::to_string(l), x, p.segs, true, &enc.latents,
                              &enc.segs);
        x = apply_ln(t, "dec_final", x);
        if (out_segs) *out_segs = p.segs;
        return ad::add_rowvec(ad::matmul(x, t.param(*out_w_)), t.param(*out_b_));
    }

    // --- single-sequence contract surface ---

    LatentSequence encode(const TokenSequence& seq, int lang_token) const {
        if (seq.tokens.empty()) throw std::invalid_argument("encode: empty input");
        Tape t(false);
        auto enc = encode_batch(t, {seq.tokens}, {lang_token});
        return LatentSequence{enc.latents.val()};
    }

    MatrixXd decode_logits(const LatentSequence& z, int lang_token,
                           const std::vector<int>& target_prefix) const {
        Tape t(false);
        Encoded enc{t.constant(z.vectors), {{0, static_cast<int>(z.vectors.rows())}}};
        return decode_logits_batch(t, enc, {target_prefix}, {lang_token}).val();
    }

    // Greedy or beam decode; ban_mask (if present) removes vocabulary ids
    // from consideration at every step.
    std::vector<std::vector<int>> generate(const std::vector<std::vector<int>>& sources,
                                           int src_lang_token, int tgt_lang_token,
                                           const GenerateConfig& cfg,
                                           const std::vector<char>* ban_mask = nullptr) const {
        check_ban(ban_mask);
        std::vector<std::vector<int>> out(sources.size());
        if (cfg.mode == GenerateConfig::Mode::kBeam) {
            for (std::size_t i = 0; i < sources.size(); ++i)
                out[i] = beam_decode(sources[i], src_lang_token, tgt_lang_token, cfg, ban_mask);
            return out;
        }
        // Batched greedy: re-run the decoder over the growing prefixes.
        const std::size_t n = sources.size();
        std::vector<std::vector<int>> prefix(n);
        std::vector<char> done(n, 0);
        Tape enc_tape(false);
        auto enc = encode_batch(enc_tape, sources, std::vector<int>(n, src_lang_token));
        MatrixXd latents = enc.latents.val();
        for (int step = 0; step < cfg.max_len; ++step) {
            std::vector<std::size_t> active;
            for (std::size_t i = 0; i < n; ++i)
                if (!done[i]) active.push_back(i);
            if (active.empty()) break;
            // Pack only the active subset.
            std::vector<std::vector<int>> act_prefix;
            MatrixXd act_latents(total_len(enc.segs, active), dims_.d_model);
            std::vector<Segment> act_segs;
            int off = 0;
            for (std::size_t i : active) {
                act_prefix.push_back(prefix[i]);
                const Segment s = enc.segs[i];
                act_latents.middleRows(off, s.len) = latents.middleRows(s.offset, s.len);
                act_segs.push_back({off, s.len});
                off += s.len;
            }
            Tape t(false);
            Encoded act_enc{t.constant(std::move(act_latents)), act_segs};
            std::vector<Segment> dec_segs;
            Tensor logits = decode_logits_batch(t, act_enc, act_prefix,
                                                std::vector<int>(active.size(), tgt_lang_token),
                                                &dec_segs);
            for (std::size_t a = 0; a < active.size(); ++a) {
                const Segment s = dec_segs[a];
                Eigen::RowVectorXd row = logits.val().row(s.offset + s.len - 1);
                const int next = argmax_allowed(row, ban_mask);
                const std::size_t i = active[a];
                if (next == Vocabulary::kEos) {
                    done[i] = 1;
                } else {
                    prefix[i].push_back(next);
                    if (static_cast<int>(prefix[i].size()) + 1 >= dims_.max_len) done[i] = 1;
                }
            }
        }
        for (std::size_t i = 0; i < n; ++i) out[i] = prefix[i];
        return out;
    }

    // --- checkpoint IO (bit-exact round trip) ---

    void save(const io::fs::path& path, const std::string& vocab_hash) const {
        std::string blob;
        blob += "NMTACKPT";
        append_u32(blob, 1);  // version
        for (int v : {dims_.d_model, dims_.n_heads, dims_.enc_layers, dims_.dec_layers,
                      dims_.d_ff, dims_.max_len, vocab_size_})
            append_u32(blob, static_cast<std::uint32_t>(v));
        append_u32(blob, static_cast<std::uint32_t>(vocab_hash.size()));
        blob += vocab_hash;
        auto params = store_.all();
        append_u32(blob, static_cast<std::uint32_t>(params.size()));
        for (const Param* p : params) {
            append_u32(blob, static_cast<std::uint32_t>(p->name.size()));
            blob += p->name;
            append_u32(blob, static_cast<std::uint32_t>(p->value.rows()));
            append_u32(blob, static_cast<std::uint32_t>(p->value.cols()));
            const auto* data = reinterpret_cast<const char*>(p->value.data());
            blob.append(data, sizeof(double) * p->value.size());
        }
        io::atomic_write(path, blob);
    }

    static TranslationModel load(const io::fs::path& path, const Vocabulary& vocab,
                                 std::string* vocab_hash_out = nullptr) {
        std::string blob = io::read_file(path);
        std::size_t off = 0;
        auto expect = [&](const char* magic) {
            if (blob.compare(off, std::strlen(magic), magic) != 0)
                throw std::runtime_error("bad checkpoint magic in " + path.string());
            off += std::strlen(magic);
        };
        expect("NMTACKPT");
        if (read_u32(blob, off) != 1) throw std::runtime_error("unsupported checkpoint version");
        ModelDims dims;
        dims.d_model = static_cast<int>(read_u32(blob, off));
        dims.n_heads = static_cast<int>(read_u32(blob, off));
        dims.enc_layers = static_cast<int>(read_u32(blob, off));
        dims.dec_layers = static_cast<int>(read_u32(blob, off));
        dims.d_ff = static_cast<int>(read_u32(blob, off));
        dims.max_len = static_cast<int>(read_u32(blob, off));
        const int vocab_size = static_cast<int>(read_u32(blob, off));
        if (vocab_size != vocab.size())
            throw std::runtime_error("checkpoint vocabulary size mismatch");
        const std::uint32_t hash_len = read_u32(blob, off);
        std::string hash = blob.substr(off, hash_len);
        off += hash_len;
        if (vocab_hash_out) *vocab_hash_out = hash;
        TranslationModel m(vocab, dims, 0);
        const std::uint32_t n_params = read_u32(blob, off);
        auto params = m.store_.all();
        if (params.size() != n_params) throw std::runtime_error("checkpoint parameter count mismatch");
        for (Param* p : params) {
            const std::uint32_t name_len = read_u32(blob, off);
            if (blob.compare(off, name_len, p->name) != 0)
                throw std::runtime_error("checkpoint parameter order mismatch");
            off += name_len;
            const long rows = read_u32(blob, off), cols = read_u32(blob, off);
            if (rows != p->value.rows() || cols != p->value.cols())
                throw std::runtime_error("checkpoint shape mismatch for " + p->name);
            std::memcpy(p->value.data(), blob.data() + off, sizeof(double) * rows * cols);
            off += sizeof(double) * rows * cols;
        }
        return m;
    }

private:
    static bool has_lang(const Vocabulary& v, const std::string& id) {
        try {
            v.lang_token(id);
            return true;
        } catch (const std::invalid_argument&) {
            return false;
        }
    }

    static void append_u32(std::string& blob, std::uint32_t v) {
        char b[4];
        std::memcpy(b, &v, 4);
        blob.append(b, 4);
    }

    static std::uint32_t read_u32(const std::string& blob, std::size_t& off) {
        if (off + 4 > blob.size()) throw std::runtime_error("truncated checkpoint");
        std::uint32_t v;
        std::memcpy(&v, blob.data() + off, 4);
        off += 4;
        return v;
    }

    static long total_len(const std::vector<Segment>& segs, const std::vector<std::size_t>& idx) {
        long n = 0;
        for (std::size_t i : idx) n += segs[i].len;
        return n;
    }

    void check_ban(const std::vector<char>* ban) const {
        if (!ban) return;
        if (static_cast<int>(ban->size()) != vocab_size_)
            throw std::invalid_argument("ban mask size mismatch");
        for (char b : *ban)
            if (!b) return;
        throw std::invalid_argument("ban mask bans every vocabulary id");
    }

    static int argmax_allowed(const Eigen::RowVectorXd& logits, const std::vector<char>* ban) {
        int best = -1;
        double best_v = 0;
        for (int j = 0; j < logits.size(); ++j) {
            if (ban && (*ban)[j]) continue;
            if (best < 0 || logits(j) > best_v) {
                best = j;
                best_v = logits(j);
            }
        }
        return best;
    }

    void add_ln(const std::string& prefix, std::mt19937_64& g) {
        store_.add_ones(prefix + "_ln_g", 1, dims_.d_model);
        store_.add(prefix + "_ln_b", 1, dims_.d_model, 0.0, g);
    }

    void add_layer(const std::string& prefix, bool with_cross, std::mt19937_64& g) {
        const int d = dims_.d_model;
        const double sd = 0.02;
        add_ln(prefix + "_sa", g);
        store_.add(prefix + "_sa_wq", d, d, sd, g);
        store_.add(prefix + "_sa_wk", d, d, sd, g);
        store_.add(prefix + "_sa_wv", d, d, sd, g);
        store_.add(prefix + "_sa_wo", d, d, sd, g);
        if (with_cross) {
            add_ln(prefix + "_ca", g);
            store_.add(prefix + "_ca_wq", d, d, sd, g);
            store_.add(prefix + "_ca_wk", d, d, sd, g);
            store_.add(prefix + "_ca_wv", d, d, sd, g);
            store_.add(prefix + "_ca_wo", d, d, sd, g);
        }
        add_ln(prefix + "_ff", g);
        store_.add(prefix + "_ff_w1", d, dims_.d_ff, sd, g);
        store_.add(prefix + "_ff_b1", 1, dims_.d_ff, 0.0, g);
        store_.add(prefix + "_ff_w2", dims_.d_ff, d, sd, g);
        store_.add(prefix + "_ff_b2", 1, d, 0.0, g);
    }

    Tensor bind(Tape& t, const std::string& name) const {
        return t.param(const_cast<ParamStore&>(store_).by_name(name));
    }

    Tensor apply_ln(Tape& t, const std::string& prefix, Tensor x) const {
        return ad::layer_norm(x, bind(t, prefix + "_ln_g"), bind(t, prefix + "_ln_b"));
    }

    Tensor embed_positions(Tape& t, const Packed& p) const {
        Tensor e = ad::row_gather(t.param(*embed_), p.ids);
        Tensor pe = ad::row_gather(t.param(*pos_), p.positions);
        return ad::add(e, pe);
    }

    Tensor attn_block(Tape& t, const std::string& prefix, Tensor x_norm, Tensor kv_src,
                      const std::vector<Segment>& q_segs, const std::vector<Segment>& kv_segs,
                      bool causal) const {
        Tensor q = ad::matmul(x_norm, bind(t, prefix + "_wq"));
        Tensor k = ad::matmul(kv_src, bind(t, prefix + "_wk"));
        Tensor v = ad::matmul(kv_src, bind(t, prefix + "_wv"));
        Tensor o = ad::attention(q, k, v, q_segs, kv_segs, dims_.n_heads, causal);
        return ad::matmul(o, bind(t, prefix + "_wo"));
    }

    Tensor layer_forward(Tape& t, const std::string& prefix, Tensor x,
                         const std::vector<Segment>& segs, bool decoder,
                         const Tensor* enc_latents, const std::vector<Segment>* enc_segs) const {
        Tensor h = apply_ln(t, prefix + "_sa", x);
        x = ad::add(x, attn_block(t, prefix + "_sa", h, h, segs, segs, decoder));
        if (decoder) {
            Tensor c = apply_ln(t, prefix + "_ca", x);
            x = ad::add(x, attn_block(t, prefix + "_ca", c, *enc_latents, segs, *enc_segs, false));
        }
        Tensor f = apply_ln(t, prefix + "_ff", x);
        f = ad::relu(ad::add_rowvec(ad::matmul(f, bind(t, prefix + "_ff_w1")),
                                    bind(t, prefix + "_ff_b1")));
        f = ad::add_rowvec(ad::matmul(f, bind(t, prefix + "_ff_w2")), bind(t, prefix + "_ff_b2"));
        return ad::add(x, f);
    }

    std::vector<int> beam_decode(const std::vector<int>& source, int src_lang_token,
                                 int tgt_lang_token, const GenerateConfig& cfg,
                                 const std::vector<char>* ban) const {
        Tape enc_tape(false);
        auto enc = encode_batch(enc_tape, {source}, {src_lang_token});
        MatrixXd latents = enc.latents.val();
        struct Hyp {
            std::vector<int> tokens;
            double score = 0.0;
            bool done = false;
        };
        std::vector<Hyp> beam{Hyp{}};
        std::optional<Hyp> best_done;
        for (int step = 0; step < cfg.max_len; ++step) {
            std::vector<Hyp> candidates;
            std::vector<std::size_t> open;
            for (std::size_t i = 0; i < beam.size(); ++i)
                if (!beam[i].done) open.push_back(i);
            if (open.empty()) break;
            for (std::size_t i : open) {
                Tape t(false);
                Encoded e{t.constant(latents), {{0, static_cast<int>(latents.rows())}}};
                std::vector<Segment> dec_segs;
                Tensor logits =
                    decode_logits_batch(t, e, {beam[i].tokens}, {tgt_lang_token}, &dec_segs);
                Eigen::RowVectorXd row = logits.val().row(dec_segs[0].offset + dec_segs[0].len - 1);
                // log-softmax
                const double m = row.maxCoeff();
                const double lse = std::log((row.array() - m).exp().sum()) + m;
                for (int j = 0; j < row.size(); ++j) {
                    if (ban && (*ban)[j]) continue;
                    Hyp h = beam[i];
                    h.score += row(j) - lse;
                    if (j == Vocabulary::kEos) {
                        h.done = true;
                    } else {
                        h.tokens.push_back(j);
                    }
                    candidates.push_back(std::move(h));
                }
            }
            for (const auto& h : beam)
                if (h.done) candidates.push_back(h);
            std::stable_sort(candidates.begin(), candidates.end(),
                             [](const Hyp& a, const Hyp& b) { return a.score > b.score; });
            if (static_cast<int>(candidates.size()) > cfg.beam_k) candidates.resize(cfg.beam_k);
            beam = std::move(candidates);
            for (const auto& h : beam)
                if (h.done && (!best_done || h.score > best_done->score)) best_done = h;
        }
        if (best_done) return best_done->tokens;
        return beam.empty() ? std::vector<int>{} : beam.front().tokens;
    }

    ModelDims dims_;
    int vocab_size_;
    ParamStore store_;
    Param* embed_ = nullptr;
    Param* pos_ = nullptr;
    Param* out_w_ = nullptr;
    Param* out_b_ = nullptr;
};

// ---------------------------------------------------------------------------
// Critic: FC -> FC -> bidirectional GRU -> FC, SELU activations between
// layers; the scalar comes from the recurrent final states, no external
// pooling.
// ---------------------------------------------------------------------------

class Critic {
public:
    Critic(int d_model, const CriticDims& dims, std::uint64_t seed, const std::string& name)
        : d_model_(d_model), dims_(dims) {
        auto g = make_stream(seed, 0xC417ULL);
        const double sd = 0.05;
        auto add = [&](const std::string& n, long r, long c, double s) -> Param& {
            return store_.add(name + "_" + n, r, c, s, g);
        };
        fc1_w_ = &add("fc1_w", d_model, dims.fc, sd);
        fc1_b_ = &add("fc1_b", 1, dims.fc, 0.0);
        fc2_w_ = &add("fc2_w", dims.fc, dims.fc, sd);
        fc2_b_ = &add("fc2_b", 1, dims.fc, 0.0);
        for (const char* dir : {"fwd", "bwd"}) {
            add(std::string("gru_") + dir + "_w", dims.fc, 3 * dims.gru, sd);
            add(std::string("gru_") + dir + "_u", dims.gru, 3 * dims.gru, sd);
            add(std::string("gru_") + dir + "_b", 1, 3 * dims.gru, 0.0);
        }
        out_w_ = &add("out_w", 2 * dims.gru, 1, sd);
        out_b_ = &add("out_b", 1, 1, 0.0);
        name_ = name;
    }

    ParamStore& params() { return store_; }
    const ParamStore& params() const { return store_; }
    const CriticDims& dims() const { return dims_; }

    // One scalar score per segment; variable lengths handled by running the
    // recurrence for max-length steps with per-step masks.
    Tensor score_batch(Tape& t, Tensor latents, const std::vector<Segment>& segs,
                       Bind mode) const {
        if (segs.empty()) throw std::invalid_argument("critic: empty batch");
        auto bind = [&](Param& p) {
            return mode == Bind::kTrainable ? t.param(p) : t.frozen(p);
        };
        Tensor h = ad::selu(ad::add_rowvec(ad::matmul(latents, bind(*fc1_w_)), bind(*fc1_b_)));
        h = ad::selu(ad::add_rowvec(ad::matmul(h, bind(*fc2_w_)), bind(*fc2_b_)));
        Tensor fwd = gru_direction(t, h, segs, "fwd", false, bind);
        Tensor bwd = gru_direction(t, h, segs, "bwd", true, bind);
        Tensor state = ad::selu(ad::concat_cols(fwd, bwd));
        return ad::add_rowvec(ad::matmul(state, bind(*out_w_)), bind(*out_b_));
    }

    double score(const LatentSequence& z) const {
        Tape t(false);
        Tensor lat = t.constant(z.vectors);
        return score_batch(t, lat, {{0, static_cast<int>(z.vectors.rows())}}, Bind::kFrozen)
            .val()(0, 0);
    }

private:
    Tensor gru_direction(Tape& t, Tensor inputs, const std::vector<Segment>& segs,
                         const std::string& dir, bool reverse,
                         const std::function<Tensor(Param&)>& bind) const {
        const int batch = static_cast<int>(segs.size());
        const int g = dims_.gru;
        int max_t = 0;
        for (const auto& s : segs) max_t = std::max(max_t, s.len);

        Tensor w = bind(const_cast<ParamStore&>(store_).by_name(name_ + "_gru_" + dir + "_w"));
        Tensor u = bind(const_cast<ParamStore&>(store_).by_name(name_ + "_gru_" + dir + "_u"));
        Tensor b = bind(const_cast<ParamStore&>(store_).by_name(name_ + "_gru_" + dir + "_b"));
        Tensor xw = ad::add_rowvec(ad::matmul(inputs, w), b);

        Tensor h = t.constant(MatrixXd::Zero(batch, g));
        for (int step = 0; step < max_t; ++step) {
            std::vector<int> rows(batch);
            MatrixXd mask(batch, 1);
            for (int s = 0; s < batch; ++s) {
                const bool active = step < segs[s].len;
                const int within = reverse ? segs[s].len - 1 - step : step;
                rows[s] = segs[s].offset + (active ? within : 0);
                mask(s, 0) = active ? 1.0 : 0.0;
            }
            Tensor xt = ad::row_gather(xw, rows);
            Tensor hu = ad::matmul(h, u);
            Tensor zg = ad::sigmoid(ad::add(ad::slice_cols(xt, 0, g), ad::slice_cols(hu, 0, g)));
            Tensor rg = ad::sigmoid(ad::add(ad::slice_cols(xt, g, g), ad::slice_cols(hu, g, g)));
            Tensor ng = ad::tanh_t(
                ad::add(ad::slice_cols(xt, 2 * g, g), ad::cmul(rg, ad::slice_cols(hu, 2 * g, g))));
            // h' = n + z*(h - n), frozen wherever the sequence has ended.
            Tensor h_new = ad::add(ng, ad::cmul(zg, ad::sub(h, ng)));
            Tensor m = t.constant(mask);
            MatrixXd inv = MatrixXd::Ones(batch, 1) - mask;
            h = ad::add(ad::cmul_colvec(h_new, m), ad::cmul_colvec(h, t.constant(inv)));
        }
        return h;
    }

    int d_model_;
    CriticDims dims_;
    std::string name_;
    ParamStore store_;
    Param* fc1_w_;
    Param* fc1_b_;
    Param* fc2_w_;
    Param* fc2_b_;
    Param* out_w_;
    Param* out_b_;
};

}  // namespace nmtadapt
