#pragma once

// Tape-based reverse-mode automatic differentiation over Eigen matrices.
// Nodes hold whole batch tensors, so the tape stays short (hundreds of nodes
// per training step) and the heavy work happens inside Eigen products.

#include <Eigen/Dense>
#include <cmath>
#include <deque>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace nmtadapt::ad {

using Eigen::MatrixXd;

// A persistent, named trainable tensor. Lives outside any tape; tapes bind to
// it per forward pass and accumulate into `grad`.
struct Param {
    std::string name;
    MatrixXd value;
    MatrixXd grad;

    Param() = default;
    Param(std::string n, MatrixXd v) : name(std::move(n)), value(std::move(v)) {
        grad = MatrixXd::Zero(value.rows(), value.cols());
    }
    void zero_grad() { grad.setZero(); }
};

class Tape;

struct Tensor {
    Tape* tape = nullptr;
    int id = -1;
    const MatrixXd& val() const;
    long rows() const { return val().rows(); }
    long cols() const { return val().cols(); }
};

// Contiguous row range of a packed batch matrix; one sequence per segment.
struct Segment {
    int offset = 0;
    int len = 0;
};

class Tape {
public:
    explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}

    bool grad_enabled() const { return grad_enabled_; }

    Tensor constant(MatrixXd v) { return make(std::move(v), false); }

    // Tracked non-parameter input (used by gradient tests and latent probes).
    Tensor leaf(MatrixXd v) { return make(std::move(v), true); }

    Tensor param(Param& p) {
        if (!grad_enabled_) return constant(p.value);
        Tensor t = make(p.value, true);
        Param* pp = &p;
        Tape* self = this;
        int id = t.id;
        set_back(t, [self, id, pp]() { pp->grad += self->nodes_[id].grad; });
        return t;
    }

    // Parameter bound as a constant: its value enters the graph but no
    // gradient ever reaches it. This is how critic weights appear inside the
    // generator objective and how latents are detached for the critic step.
    Tensor frozen(const Param& p) { return constant(p.value); }

    Tensor detach(Tensor t) { return constant(nodes_[t.id].val); }

    void backward(Tensor loss) {
        if (!grad_enabled_) throw std::logic_error("backward on a no-grad tape");
        if (nodes_[loss.id].val.size() != 1) throw std::logic_error("backward expects a scalar");
        g(loss.id)(0, 0) += 1.0;
        for (int i = static_cast<int>(nodes_.size()) - 1; i >= 0; --i) {
            Node& n = nodes_[i];
            if (n.back && n.grad.size() != 0) n.back();
        }
    }

    const MatrixXd& val(Tensor t) const { return nodes_[t.id].val; }

    MatrixXd grad(Tensor t) const {
        const Node& n = nodes_[t.id];
        if (n.grad.size() == 0) return MatrixXd::Zero(n.val.rows(), n.val.cols());
        return n.grad;
    }

    std::size_t size() const { return nodes_.size(); }

    // --- plumbing for op implementations ---

    Tensor make(MatrixXd v, bool track) {
        nodes_.emplace_back();
        nodes_.back().val = std::move(v);
        nodes_.back().requires_grad = track && grad_enabled_;
        return Tensor{this, static_cast<int>(nodes_.size()) - 1};
    }

    void set_back(Tensor t, std::function<void()> back) {
        if (nodes_[t.id].requires_grad) nodes_[t.id].back = std::move(back);
    }

    bool needs(Tensor t) const { return nodes_[t.id].requires_grad; }

    // Gradient buffer, allocated on first touch.
    MatrixXd& g(int id) {
        Node& n = nodes_[id];
        if (n.grad.size() == 0) n.grad = MatrixXd::Zero(n.val.rows(), n.val.cols());
        return n.grad;
    }

    // Incoming gradient of node `id`, or nullptr if nothing reached it.
    const MatrixXd* g_in(int id) const {
        const Node& n = nodes_[id];
        return n.grad.size() == 0 ? nullptr : &n.grad;
    }

private:
    struct Node {
        MatrixXd val;
        MatrixXd grad;
        bool requires_grad = false;
        std::function<void()> back;
    };
    std::deque<Node> nodes_;
    bool grad_enabled_;
};

inline const MatrixXd& Tensor::val() const { return tape->val(*this); }

// ---------------------------------------------------------------------------
// Elementwise and linear ops
// ---------------------------------------------------------------------------

inline Tensor matmul(Tensor a, Tensor b) {
    Tape* t = a.tape;
    Tensor out = t->make(a.val() * b.val(), t->needs(a) || t->needs(b));
    int ai = a.id, bi = b.id, oi = out.id;
    bool ra = t->needs(a), rb = t->needs(b);
    t->set_back(out, [t, ai, bi, oi, ra, rb]() {
        const MatrixXd& go = *t->g_in(oi);
        if (ra) t->g(ai).noalias() += go * t->val(Tensor{t, bi}).transpose();
        if (rb) t->g(bi).noalias() += t->val(Tensor{t, ai}).transpose() * go;
    });
    return out;
}

inline Tensor add(Tensor a, Tensor b) {
    Tape* t = a.tape;
    Tensor out = t->make(a.val() + b.val(), t->needs(a) || t->needs(b));
    int ai = a.id, bi = b.id, oi = out.id;
    bool ra = t->needs(a), rb = t->needs(b);
    t->set_back(out, [t, ai, bi, oi, ra, rb]() {
        const MatrixXd& go = *t->g_in(oi);
        if (ra) t->g(ai) += go;
        if (rb) t->g(bi) += go;
    });
    return out;
}

inline Tensor sub(Tensor a, Tensor b) {
    Tape* t = a.tape;
    Tensor out = t->make(a.val() - b.val(), t->needs(a) || t->needs(b));
    int ai = a.id, bi = b.id, oi = out.id;
    bool ra = t->needs(a), rb = t->needs(b);
    t->set_back(out, [t, ai, bi, oi, ra, rb]() {
        const MatrixXd& go = *t->g_in(oi);
        if (ra) t->g(ai) += go;
        if (rb) t->g(bi) -= go;
    });
    return out;
}

inline Tensor cmul(Tensor a, Tensor b) {
    Tape* t = a.tape;
    Tensor out = t->make(a.val().cwiseProduct(b.val()), t->needs(a) || t->needs(b));
    int ai = a.id, bi = b.id, oi = out.id;
    bool ra = t->needs(a), rb = t->needs(b);
    t->set_back(out, [t, ai, bi, oi, ra, rb]() {
        const MatrixXd& go = *t->g_in(oi);
        if (ra) t->g(ai) += go.cwiseProduct(t->val(Tensor{t, bi}));
        if (rb) t->g(bi) += go.cwiseProduct(t->val(Tensor{t, ai}));
    });
    return out;
}

inline Tensor scale(Tensor a, double s) {
    Tape* t = a.tape;
    Tensor out = t->make(a.val() * s, t->needs(a));
    int ai = a.id, oi = out.id;
    t->set_back(out, [t, ai, oi, s]() { t->g(ai) += *t->g_in(oi) * s; });
    return out;
}

// Adds a 1xC row vector to every row of a.
inline Tensor add_rowvec(Tensor a, Tensor bias) {
    Tape* t = a.tape;
    MatrixXd v = a.val();
    v.rowwise() += Eigen::RowVectorXd(bias.val().row(0));
    Tensor out = t->make(std::move(v), t->needs(a) || t->needs(bias));
    int ai = a.id, bi = bias.id, oi = out.id;
    bool ra = t->needs(a), rb = t->needs(bias);
    t->set_back(out, [t, ai, bi, oi, ra, rb]() {
        const MatrixXd& go = *t->g_in(oi);
        if (ra) t->g(ai) += go;
        if (rb) t->g(bi).row(0) += go.colwise().sum();
    });
    return out;
}

// Scales row i of a by m(i,0). Used for padding masks in recurrent steps.
inline Tensor cmul_colvec(Tensor a, Tensor m) {
    Tape* t = a.tape;
    Eigen::ArrayXd mv = m.val().col(0);
    MatrixXd v = (a.val().array().colwise() * mv).matrix();
    Tensor out = t->make(std::move(v), t->needs(a) || t->needs(m));
    int ai = a.id, mi = m.id, oi = out.id;
    bool ra = t->needs(a), rm = t->needs(m);
    t->set_back(out, [t, ai, mi, oi, ra, rm]() {
        const MatrixXd& go = *t->g_in(oi);
        if (ra) {
            Eigen::ArrayXd mv = t->val(Tensor{t, mi}).col(0);
            t->g(ai) += (go.array().colwise() * mv).matrix();
        }
        if (rm)
            t->g(mi).col(0) +=
                go.cwiseProduct(t->val(Tensor{t, ai})).rowwise().sum();
    });
    return out;
}

inline Tensor sigmoid(Tensor a) {
    Tape* t = a.tape;
    MatrixXd v = (1.0 / (1.0 + (-a.val().array()).exp())).matrix();
    Tensor out = t->make(std::move(v), t->needs(a));
    int ai = a.id, oi = out.id;
    t->set_back(out, [t, ai, oi]() {
        const MatrixXd& y = t->val(Tensor{t, oi});
        t->g(ai).array() += t->g_in(oi)->array() * y.array() * (1.0 - y.array());
    });
    return out;
}

inline Tensor tanh_t(Tensor a) {
    Tape* t = a.tape;
    MatrixXd v = a.val().array().tanh().matrix();
    Tensor out = t->make(std::move(v), t->needs(a));
    int ai = a.id, oi = out.id;
    t->set_back(out, [t, ai, oi]() {
        const MatrixXd& y = t->val(Tensor{t, oi});
        t->g(ai).array() += t->g_in(oi)->array() * (1.0 - y.array().square());
    });
    return out;
}

inline Tensor relu(Tensor a) {
    Tape* t = a.tape;
    MatrixXd v = a.val().cwiseMax(0.0);
    Tensor out = t->make(std::move(v), t->needs(a));
    int ai = a.id, oi = out.id;
    t->set_back(out, [t, ai, oi]() {
        const MatrixXd& x = t->val(Tensor{t, ai});
        t->g(ai).array() += t->g_in(oi)->array() * (x.array() > 0.0).cast<double>();
    });
    return out;
}

inline constexpr double kSeluAlpha = 1.6732632423543772;
inline constexpr double kSeluLambda = 1.0507009873554805;

inline Tensor selu(Tensor a) {
    constexpr double kAlpha = kSeluAlpha;
    constexpr double kLambda = kSeluLambda;
    Tape* t = a.tape;
    const auto& x = a.val().array();
    MatrixXd v =
        (kLambda * (x > 0.0).select(x, kAlpha * (x.exp() - 1.0))).matrix();
    Tensor out = t->make(std::move(v), t->needs(a));
    int ai = a.id, oi = out.id;
    t->set_back(out, [t, ai, oi]() {
        const auto& x = t->val(Tensor{t, ai}).array();
        auto dpos = x > 0.0;
        Eigen::ArrayXXd d =
            dpos.select(Eigen::ArrayXXd::Constant(x.rows(), x.cols(), kSeluLambda),
                        kSeluLambda * kSeluAlpha * x.exp());
        t->g(ai).array() += t->g_in(oi)->array() * d;
    });
    return out;
}

inline Tensor layer_norm(Tensor x, Tensor gain, Tensor bias, double eps = 1e-5) {
    Tape* t = x.tape;
    const MatrixXd& xv = x.val();
    const long n = xv.cols();
    Eigen::VectorXd mu = xv.rowwise().mean();
    MatrixXd centered = xv.colwise() - mu;
    Eigen::VectorXd inv_sigma =
        ((centered.array().square().rowwise().sum() / double(n)) + eps).sqrt().inverse();
    MatrixXd xhat = centered.array().colwise() * inv_sigma.array();
    Eigen::RowVectorXd gr = gain.val().row(0);
    Eigen::RowVectorXd br = bias.val().row(0);
    MatrixXd v = xhat;
    v.array().rowwise() *= gr.array();
    v.rowwise() += br;
    Tensor out = t->make(std::move(v), t->needs(x) || t->needs(gain) || t->needs(bias));
    int xi = x.id, gi = gain.id, bi = bias.id, oi = out.id;
    bool rx = t->needs(x), rg = t->needs(gain), rb = t->needs(bias);
    t->set_back(out, [t, xi, gi, bi, oi, rx, rg, rb, xhat = std::move(xhat),
                      inv_sigma = std::move(inv_sigma), n]() {
        const MatrixXd& go = *t->g_in(oi);
        if (rg) t->g(gi).row(0) += go.cwiseProduct(xhat).colwise().sum();
        if (rb) t->g(bi).row(0) += go.colwise().sum();
        if (rx) {
            Eigen::RowVectorXd gainv = t->val(Tensor{t, gi}).row(0);
            MatrixXd dxhat = go;
            dxhat.array().rowwise() *= gainv.array();
            Eigen::VectorXd m1 = dxhat.rowwise().mean();
            Eigen::ArrayXd m2 = dxhat.cwiseProduct(xhat).rowwise().mean();
            MatrixXd dx = dxhat;
            dx.colwise() -= m1;
            dx.array() -= xhat.array().colwise() * m2;
            dx.array().colwise() *= Eigen::ArrayXd(inv_sigma);
            t->g(xi) += dx;
            (void)n;
        }
    });
    return out;
}

// ---------------------------------------------------------------------------
// Shape ops
// ---------------------------------------------------------------------------

inline Tensor row_gather(Tensor x, std::vector<int> rows) {
    Tape* t = x.tape;
    MatrixXd v(static_cast<long>(rows.size()), x.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) v.row(static_cast<long>(i)) = x.val().row(rows[i]);
    Tensor out = t->make(std::move(v), t->needs(x));
    int xi = x.id, oi = out.id;
    t->set_back(out, [t, xi, oi, rows = std::move(rows)]() {
        const MatrixXd& go = *t->g_in(oi);
        MatrixXd& gx = t->g(xi);
        for (std::size_t i = 0; i < rows.size(); ++i) gx.row(rows[i]) += go.row(static_cast<long>(i));
    });
    return out;
}

inline Tensor slice_rows(Tensor x, int start, int n) {
    Tape* t = x.tape;
    Tensor out = t->make(x.val().middleRows(start, n), t->needs(x));
    int xi = x.id, oi = out.id;
    t->set_back(out, [t, xi, oi, start, n]() {
        t->g(xi).middleRows(start, n) += *t->g_in(oi);
    });
    return out;
}

inline Tensor slice_cols(Tensor x, int start, int n) {
    Tape* t = x.tape;
    Tensor out = t->make(x.val().middleCols(start, n), t->needs(x));
    int xi = x.id, oi = out.id;
    t->set_back(out, [t, xi, oi, start, n]() {
        t->g(xi).middleCols(start, n) += *t->g_in(oi);
    });
    return out;
}

inline Tensor concat_rows(Tensor a, Tensor b) {
    Tape* t = a.tape;
    MatrixXd v(a.rows() + b.rows(), a.cols());
    v.topRows(a.rows()) = a.val();
    v.bottomRows(b.rows()) = b.val();
    Tensor out = t->make(std::move(v), t->needs(a) || t->needs(b));
    int ai = a.id, bi = b.id, oi = out.id;
    long na = a.rows(), nb = b.rows();
    bool ra = t->needs(a), rb = t->needs(b);
    t->set_back(out, [t, ai, bi, oi, na, nb, ra, rb]() {
        const MatrixXd& go = *t->g_in(oi);
        if (ra) t->g(ai) += go.topRows(na);
        if (rb) t->g(bi) += go.bottomRows(nb);
    });
    return out;
}

inline Tensor concat_cols(Tensor a, Tensor b) {
    Tape* t = a.tape;
    MatrixXd v(a.rows(), a.cols() + b.cols());
    v.leftCols(a.cols()) = a.val();
    v.rightCols(b.cols()) = b.val();
    Tensor out = t->make(std::move(v), t->needs(a) || t->needs(b));
    int ai = a.id, bi = b.id, oi = out.id;
    long ca = a.cols(), cb = b.cols();
    bool ra = t->needs(a), rb = t->needs(b);
    t->set_back(out, [t, ai, bi, oi, ca, cb, ra, rb]() {
        const MatrixXd& go = *t->g_in(oi);
        if (ra) t->g(ai) += go.leftCols(ca);
        if (rb) t->g(bi) += go.rightCols(cb);
    });
    return out;
}

// ---------------------------------------------------------------------------
// Reductions and losses
// ---------------------------------------------------------------------------

inline Tensor mean_all(Tensor x) {
    Tape* t = x.tape;
    MatrixXd v(1, 1);
    v(0, 0) = x.val().mean();
    Tensor out = t->make(std::move(v), t->needs(x));
    int xi = x.id, oi = out.id;
    double inv = 1.0 / static_cast<double>(x.val().size());
    t->set_back(out, [t, xi, oi, inv]() {
        t->g(xi).array() += (*t->g_in(oi))(0, 0) * inv;
    });
    return out;
}

inline Tensor add_scalar(Tensor a, Tensor b) { return add(a, b); }

// Weighted mean of per-row cross entropies: sum_i w_i * (-log softmax(x_i)[y_i]) / sum_i w_i.
// Rows with weight 0 (padding) contribute nothing, forward or backward.
inline Tensor softmax_cross_entropy(Tensor logits, const std::vector<int>& targets,
                                    const std::vector<double>& weights) {
    Tape* t = logits.tape;
    const MatrixXd& x = logits.val();
    const long n = x.rows();
    if (static_cast<long>(targets.size()) != n || static_cast<long>(weights.size()) != n)
        throw std::invalid_argument("softmax_cross_entropy: size mismatch");
    double wsum = 0.0;
    for (double w : weights) wsum += w;
    if (wsum <= 0.0) throw std::invalid_argument("softmax_cross_entropy: zero total weight");

    MatrixXd probs(n, x.cols());
    double loss = 0.0;
    for (long i = 0; i < n; ++i) {
        const double m = x.row(i).maxCoeff();
        Eigen::ArrayXd e = (x.row(i).array() - m).exp();
        const double z = e.sum();
        probs.row(i) = (e / z).matrix();
        if (weights[i] != 0.0) {
            loss += weights[i] * (std::log(z) - (x(i, targets[i]) - m));
        }
    }
    MatrixXd v(1, 1);
    v(0, 0) = loss / wsum;
    Tensor out = t->make(std::move(v), t->needs(logits));
    int xi = logits.id, oi = out.id;
    t->set_back(out, [t, xi, oi, probs = std::move(probs), targets, weights, wsum]() {
        const double go = (*t->g_in(oi))(0, 0);
        MatrixXd& gx = t->g(xi);
        for (long i = 0; i < probs.rows(); ++i) {
            if (weights[i] == 0.0) continue;
            const double c = go * weights[i] / wsum;
            gx.row(i) += c * probs.row(i);
            gx(i, targets[i]) -= c;
        }
    });
    return out;
}

// ---------------------------------------------------------------------------
// Fused multi-head scaled-dot-product attention over packed segments.
// q, k, v are (N x d) packed batches; q_segs[i] attends to kv_segs[i].
// causal requires q_segs[i].len == kv_segs[i].len (self-attention).
// ---------------------------------------------------------------------------

inline Tensor attention(Tensor q, Tensor k, Tensor v, const std::vector<Segment>& q_segs,
                        const std::vector<Segment>& kv_segs, int n_heads, bool causal) {
    Tape* t = q.tape;
    const long d = q.cols();
    if (d % n_heads != 0) throw std::invalid_argument("attention: d_model % n_heads != 0");
    const long hd = d / n_heads;
    const double sc = 1.0 / std::sqrt(static_cast<double>(hd));
    const bool req = t->needs(q) || t->needs(k) || t->needs(v);

    MatrixXd out_v = MatrixXd::Zero(q.rows(), d);
    // Attention weights per (segment, head), kept only when gradients flow.
    auto weights = std::make_shared<std::vector<MatrixXd>>();
    for (std::size_t s = 0; s < q_segs.size(); ++s) {
        const Segment qs = q_segs[s], ks = kv_segs[s];
        if (causal && qs.len != ks.len) throw std::invalid_argument("attention: causal shape");
        for (int h = 0; h < n_heads; ++h) {
            auto Q = q.val().block(qs.offset, h * hd, qs.len, hd);
            auto K = k.val().block(ks.offset, h * hd, ks.len, hd);
            auto V = v.val().block(ks.offset, h * hd, ks.len, hd);
            MatrixXd S = (Q * K.transpose()) * sc;
            if (causal) {
                for (int i = 0; i < qs.len; ++i)
                    for (int j = i + 1; j < ks.len; ++j) S(i, j) = -1e30;
            }
            MatrixXd P(S.rows(), S.cols());
            for (long i = 0; i < S.rows(); ++i) {
                Eigen::ArrayXd e = (S.row(i).array() - S.row(i).maxCoeff()).exp();
                P.row(i) = (e / e.sum()).matrix();
            }
            out_v.block(qs.offset, h * hd, qs.len, hd).noalias() = P * V;
            if (req) weights->push_back(std::move(P));
        }
    }

    Tensor out = t->make(std::move(out_v), req);
    int qi = q.id, ki = k.id, vi = v.id, oi = out.id;
    bool rq = t->needs(q), rk = t->needs(k), rv = t->needs(v);
    t->set_back(out, [t, qi, ki, vi, oi, rq, rk, rv, q_segs, kv_segs, n_heads, hd, sc,
                      weights]() {
        const MatrixXd& go = *t->g_in(oi);
        std::size_t w = 0;
        for (std::size_t s = 0; s < q_segs.size(); ++s) {
            const Segment qs = q_segs[s], ks = kv_segs[s];
            for (int h = 0; h < n_heads; ++h) {
                const MatrixXd& P = (*weights)[w++];
                auto Q = t->val(Tensor{t, qi}).block(qs.offset, h * hd, qs.len, hd);
                auto K = t->val(Tensor{t, ki}).block(ks.offset, h * hd, ks.len, hd);
                auto V = t->val(Tensor{t, vi}).block(ks.offset, h * hd, ks.len, hd);
                auto dO = go.block(qs.offset, h * hd, qs.len, hd);
                if (rv)
                    t->g(vi).block(ks.offset, h * hd, ks.len, hd).noalias() +=
                        P.transpose() * dO;
                MatrixXd dP = dO * V.transpose();
                // Softmax backward row by row: dS = P .* (dP - rowsum(dP .* P)).
                Eigen::VectorXd rs = dP.cwiseProduct(P).rowwise().sum();
                MatrixXd dS = P.cwiseProduct(dP.colwise() - rs);
                if (rq) t->g(qi).block(qs.offset, h * hd, qs.len, hd).noalias() += dS * K * sc;
                if (rk)
                    t->g(ki).block(ks.offset, h * hd, ks.len, hd).noalias() +=
                        dS.transpose() * Q * sc;
            }
        }
    });
    return out;
}

}  // namespace nmtadapt::ad
