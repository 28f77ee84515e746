#pragma once

// Inner-loop optimizers: Adam / muAdam, SGD, the learned optimizer and a
// no-op optimizer, all behind one small interface so the harness and the
// coordinate check can drive any of them.

#include <cmath>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "mulo/features.hpp"
#include "mulo/lo.hpp"
#include "mulo/optimizee.hpp"
#include "mulo/parametrization.hpp"

namespace mulo {

class Optimizer {
public:
    virtual ~Optimizer() = default;
    virtual void reset(const OptimizeeParams& params) = 0;
    // Returns false when the step produced non-finite weights.
    virtual bool step(OptimizeeParams& params, const Grads& grads) = 0;
};

struct AdamHyper {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;  // decoupled (AdamW-style)
    MultiplierSet multipliers{};
};

struct AdamState {
    std::vector<Tensor> m;
    std::vector<Tensor> v;
    std::size_t t = 0;
};

inline AdamState init_adam_state(const OptimizeeParams& p) {
    AdamState s;
    for (std::size_t i = 0; i < p.tensor_count(); ++i) {
        s.m.emplace_back(p.tensor(i).rows(), p.tensor(i).cols());
        s.v.emplace_back(p.tensor(i).rows(), p.tensor(i).cols());
    }
    return s;
}

// Per-tensor learning rate: lr * update_scale * hidden_lr_mult (muP hidden only).
// Biases keep update scale 1.
inline double effective_lr(const AdamHyper& hp, const TensorInfo& info, ParamMode mode) {
    double lr = hp.lr;
    if (!info.is_bias) lr *= update_scale(info.role, info.geom, mode);
    if (mode == ParamMode::MuP && info.role == LayerRole::Hidden) lr *= hp.multipliers.hidden_lr_mult;
    return lr;
}

// Bias-corrected Adam: w -= lr_eff * (m_hat / (sqrt(v_hat) + eps) + wd * w).
inline void adam_update(std::span<double> w, std::span<const double> g, std::span<double> m, std::span<double> v,
                        std::size_t t, double lr, const AdamHyper& hp) {
    const double c1 = 1.0 - std::pow(hp.beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(hp.beta2, static_cast<double>(t));
    for (std::size_t k = 0; k < w.size(); ++k) {
        m[k] = hp.beta1 * m[k] + (1.0 - hp.beta1) * g[k];
        v[k] = hp.beta2 * v[k] + (1.0 - hp.beta2) * g[k] * g[k];
        const double mhat = m[k] / c1;
        const double vhat = v[k] / c2;
        w[k] -= lr * (mhat / (std::sqrt(vhat) + hp.eps) + hp.weight_decay * w[k]);
    }
}

inline void adam_step(AdamState& state, OptimizeeParams& params, const Grads& grads, const AdamHyper& hp,
                      ParamMode mode) {
    if (state.m.size() != params.tensor_count() || grads.tensor_count() != params.tensor_count()) {
        throw DimensionError("adam_step: tensor count mismatch");
    }
    ++state.t;
    for (std::size_t i = 0; i < params.tensor_count(); ++i) {
        Tensor& w = params.tensor(i);
        detail::require_same_shape(w, grads.tensor(i), "adam_step");
        adam_update(w.flat(), grads.tensor(i).flat(), state.m[i].flat(), state.v[i].flat(), state.t,
                    effective_lr(hp, params.info(i), mode), hp);
    }
}

class AdamOptimizer final : public Optimizer {
public:
    AdamOptimizer(AdamHyper hp, ParamMode mode) : hp_(hp), mode_(mode) {}
    void reset(const OptimizeeParams& p) override { state_ = init_adam_state(p); }
    bool step(OptimizeeParams& p, const Grads& g) override {
        adam_step(state_, p, g, hp_, mode_);
        return p.all_finite();
    }
    const AdamState& state() const { return state_; }

private:
    AdamHyper hp_;
    ParamMode mode_;
    AdamState state_;
};

class SgdOptimizer final : public Optimizer {
public:
    SgdOptimizer(AdamHyper hp, ParamMode mode) : hp_(hp), mode_(mode) {}
    void reset(const OptimizeeParams&) override {}
    bool step(OptimizeeParams& p, const Grads& g) override {
        bool finite = true;
        for (std::size_t i = 0; i < p.tensor_count(); ++i) {
            Tensor& w = p.tensor(i);
            const double lr = effective_lr(hp_, p.info(i), mode_);
            for (std::size_t k = 0; k < w.size(); ++k) {
                w[k] -= lr * g.tensor(i)[k];
                finite = finite && std::isfinite(w[k]);
            }
        }
        return finite;
    }

private:
    AdamHyper hp_;
    ParamMode mode_;
};

class ZeroOptimizer final : public Optimizer {
public:
    void reset(const OptimizeeParams&) override {}
    bool step(OptimizeeParams& p, const Grads&) override { return p.all_finite(); }
};

struct LOConfig {
    UpdateRuleConfig rule{};
    FeatureConfig features{};
    bool learn_betas = true;
    Activation activation = Activation::ReLU;
};

// One inner step of the learned optimizer: refresh accumulators, build
// features per tensor, run phi, apply the (parametrization-scaled) update.
inline bool lo_step(const LOWeights& phi, const LOConfig& cfg, ParamMode mode, FeatureState& state,
                    OptimizeeParams& params, const Grads& grads) {
    const FeatureConfig fcfg = feature_config_from(phi, cfg.features, cfg.learn_betas);
    update_state(state, grads, fcfg);
    bool finite = true;
    for (std::size_t i = 0; i < params.tensor_count(); ++i) {
        Tensor& w = params.tensor(i);
        const Tensor feats = feature_matrix(state.tensors[i], w, grads.tensor(i), fcfg);
        const LOOutput out = lo_forward(phi, feats, cfg.activation);
        const TensorInfo info = params.info(i);
        const double s = info.is_bias ? 1.0 : update_scale(info.role, info.geom, mode);
        finite = apply_update(w, out.m, out.d, cfg.rule, s) && finite && !out.diverged;
    }
    return finite;
}

class LearnedOptimizer final : public Optimizer {
public:
    LearnedOptimizer(std::shared_ptr<const LOWeights> phi, LOConfig cfg, ParamMode mode)
        : phi_(std::move(phi)), cfg_(cfg), mode_(mode) {}
    void reset(const OptimizeeParams& p) override { state_ = init_state(p); }
    bool step(OptimizeeParams& p, const Grads& g) override { return lo_step(*phi_, cfg_, mode_, state_, p, g); }

private:
    std::shared_ptr<const LOWeights> phi_;
    LOConfig cfg_;
    ParamMode mode_;
    FeatureState state_;
};

}  // namespace mulo
