#pragma once

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "fus/layers.hpp"

namespace fus {

template <class T>
class Optimizer {
public:
    virtual ~Optimizer() = default;
    virtual const char* name() const = 0;
    virtual void step(const std::vector<ParamBlock<T>*>& blocks, double lr) = 0;
};

/// SGD with momentum and decoupled-from-loss L2 weight decay:
///   v <- m*v + g + wd*w ; w <- w - lr*v
template <class T>
class SgdMomentum final : public Optimizer<T> {
public:
    explicit SgdMomentum(double momentum = 0.9, double weight_decay = 5e-4)
        : momentum_(momentum), weight_decay_(weight_decay) {
        if (momentum < 0 || weight_decay < 0) {
            throw ConfigError("sgd: momentum and weight decay must be non-negative");
        }
    }

    const char* name() const override { return "sgd"; }
    double momentum() const { return momentum_; }
    double weight_decay() const { return weight_decay_; }

    void step(const std::vector<ParamBlock<T>*>& blocks, double lr) override {
        ensure_state(blocks);
        const T m = static_cast<T>(momentum_);
        const T wd = static_cast<T>(weight_decay_);
        const T eta = static_cast<T>(lr);
        for (size_t i = 0; i < blocks.size(); ++i) {
            auto& w = blocks[i]->value;
            auto& g = blocks[i]->grad;
            auto& v = velocity_[i];
            for (size_t j = 0; j < w.size(); ++j) {
                v[j] = m * v[j] + g[j] + wd * w[j];
                w[j] -= eta * v[j];
            }
        }
    }

    const std::vector<std::vector<T>>& velocities() const { return velocity_; }

private:
    void ensure_state(const std::vector<ParamBlock<T>*>& blocks) {
        if (velocity_.size() == blocks.size()) return;
        velocity_.clear();
        for (auto* b : blocks) velocity_.emplace_back(b->value.size(), T{0});
    }

    double momentum_, weight_decay_;
    std::vector<std::vector<T>> velocity_;
};

/// Momentum-free adaptive optimizer tracking first and second moments of the
/// gradient (bias-corrected). Stands in as the non-SGD choice in black-box
/// grids; hyperparameters are echoed into run configs.
template <class T>
class AdaptiveMoments final : public Optimizer<T> {
public:
    AdaptiveMoments(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8,
                    double weight_decay = 5e-4)
        : beta1_(beta1), beta2_(beta2), eps_(eps), weight_decay_(weight_decay) {}

    const char* name() const override { return "adam"; }

    void step(const std::vector<ParamBlock<T>*>& blocks, double lr) override {
        ensure_state(blocks);
        ++t_;
        const double c1 = 1.0 - std::pow(beta1_, t_);
        const double c2 = 1.0 - std::pow(beta2_, t_);
        for (size_t i = 0; i < blocks.size(); ++i) {
            auto& w = blocks[i]->value;
            auto& g = blocks[i]->grad;
            auto& m = m_[i];
            auto& v = v_[i];
            for (size_t j = 0; j < w.size(); ++j) {
                const double gj = static_cast<double>(g[j]) +
                                  weight_decay_ * static_cast<double>(w[j]);
                m[j] = beta1_ * m[j] + (1.0 - beta1_) * gj;
                v[j] = beta2_ * v[j] + (1.0 - beta2_) * gj * gj;
                const double mhat = m[j] / c1;
                const double vhat = v[j] / c2;
                w[j] -= static_cast<T>(lr * mhat / (std::sqrt(vhat) + eps_));
            }
        }
    }

private:
    void ensure_state(const std::vector<ParamBlock<T>*>& blocks) {
        if (m_.size() == blocks.size()) return;
        m_.clear();
        v_.clear();
        for (auto* b : blocks) {
            m_.emplace_back(b->value.size(), 0.0);
            v_.emplace_back(b->value.size(), 0.0);
        }
    }

    double beta1_, beta2_, eps_, weight_decay_;
    long t_ = 0;
    std::vector<std::vector<double>> m_, v_;
};

template <class T>
std::unique_ptr<Optimizer<T>> make_optimizer(const std::string& id, double momentum,
                                             double weight_decay) {
    if (id == "sgd") return std::make_unique<SgdMomentum<T>>(momentum, weight_decay);
    if (id == "adam") return std::make_unique<AdaptiveMoments<T>>(0.9, 0.999, 1e-8, weight_decay);
    throw ConfigError("unknown optimizer id: " + id);
}

}  // namespace fus
