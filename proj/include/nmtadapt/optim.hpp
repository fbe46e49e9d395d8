#pragma once

// Optimizers and the weight constraint used to keep critic scores Lipschitz.

#include <cmath>
#include <stdexcept>
#include <vector>

#include "nmtadapt/autodiff.hpp"

namespace nmtadapt {

class Optimizer {
public:
    virtual ~Optimizer() = default;
    virtual void step(std::vector<ad::Param*>& params) = 0;
    virtual long steps_taken() const = 0;
};

// Adam with linear learning-rate warmup from zero.
class Adam : public Optimizer {
public:
    explicit Adam(double lr = 3e-4, int warmup_steps = 200, double beta1 = 0.9,
                  double beta2 = 0.999, double eps = 1e-8)
        : lr_(lr), warmup_(warmup_steps), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void step(std::vector<ad::Param*>& params) override {
        ++t_;
        const double lr = warmup_ > 0 && t_ <= warmup_ ? lr_ * t_ / warmup_ : lr_;
        if (m_.empty()) {
            for (auto* p : params) {
                m_.push_back(ad::MatrixXd::Zero(p->value.rows(), p->value.cols()));
                v_.push_back(ad::MatrixXd::Zero(p->value.rows(), p->value.cols()));
            }
        }
        if (m_.size() != params.size())
            throw std::invalid_argument("optimizer bound to a different parameter set");
        const double bc1 = 1.0 - std::pow(beta1_, t_);
        const double bc2 = 1.0 - std::pow(beta2_, t_);
        for (std::size_t i = 0; i < params.size(); ++i) {
            auto& g = params[i]->grad;
            m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
            v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g.cwiseProduct(g);
            params[i]->value.array() -=
                lr * (m_[i].array() / bc1) / ((v_[i].array() / bc2).sqrt() + eps_);
        }
    }

    long steps_taken() const override { return t_; }

private:
    double lr_;
    int warmup_;
    double beta1_, beta2_, eps_;
    long t_ = 0;
    std::vector<ad::MatrixXd> m_, v_;
};

class RMSprop : public Optimizer {
public:
    explicit RMSprop(double lr = 0.01, double alpha = 0.99, double eps = 1e-8)
        : lr_(lr), alpha_(alpha), eps_(eps) {}

    void step(std::vector<ad::Param*>& params) override {
        ++t_;
        if (v_.empty())
            for (auto* p : params)
                v_.push_back(ad::MatrixXd::Zero(p->value.rows(), p->value.cols()));
        if (v_.size() != params.size())
            throw std::invalid_argument("optimizer bound to a different parameter set");
        for (std::size_t i = 0; i < params.size(); ++i) {
            auto& g = params[i]->grad;
            v_[i] = alpha_ * v_[i] + (1.0 - alpha_) * g.cwiseProduct(g);
            params[i]->value.array() -= lr_ * g.array() / (v_[i].array().sqrt() + eps_);
        }
    }

    long steps_taken() const override { return t_; }

private:
    double lr_, alpha_, eps_;
    long t_ = 0;
    std::vector<ad::MatrixXd> v_;
};

// Hard clamp applied to critic weights after each critic update.
inline void clip_weights(std::vector<ad::Param*>& params, double bound) {
    for (auto* p : params) p->value = p->value.cwiseMax(-bound).cwiseMin(bound);
}

}  // namespace nmtadapt
