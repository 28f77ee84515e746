#pragma once

// The per-parameter learned optimizer: a 2-layer MLP applied independently
// to each parameter's feature row, emitting a direction d and a magnitude m.
// The update is  w <- w - scale * lambda1 * d * exp(lambda2 * m).

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mulo/features.hpp"
#include "mulo/rng.hpp"
#include "mulo/tensor.hpp"

namespace mulo {

inline constexpr std::size_t kLoHidden = 32;
inline constexpr std::size_t kNumBetas = 7;

struct UpdateRuleConfig {
    double lambda1 = 0.01;
    double lambda2 = 0.001;
};

inline void validate(const UpdateRuleConfig& c) {
    if (!(c.lambda1 > 0.0) || !(c.lambda2 > 0.0)) throw std::invalid_argument("lambda1 and lambda2 must be positive");
}

struct LOWeights {
    Tensor w1;  // features x hidden
    Tensor b1;  // hidden x 1
    Tensor w2;  // hidden x 2, column 0 = d, column 1 = m
    Tensor b2;  // 2 x 1
    std::array<double, kNumBetas> beta_logits{};

    std::size_t input_dim() const noexcept { return w1.rows(); }
    std::size_t hidden() const noexcept { return w1.cols(); }
};

inline std::size_t lo_flat_size(std::size_t input_dim = kNumFeatures, std::size_t hidden = kLoHidden) {
    return input_dim * hidden + hidden + hidden * 2 + 2 + kNumBetas;
}

inline double logit(double p) { return std::log(p / (1.0 - p)); }
inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline std::array<double, kNumBetas> default_beta_logits(const FeatureConfig& cfg = {}) {
    return {logit(cfg.momentum_betas[0]), logit(cfg.momentum_betas[1]), logit(cfg.momentum_betas[2]),
            logit(cfg.second_moment_beta),
            logit(cfg.adafactor_betas[0]), logit(cfg.adafactor_betas[1]), logit(cfg.adafactor_betas[2])};
}

// Feature coefficients carried by phi: sigmoid of its beta logits. With
// learn_betas off the base config is returned unchanged.
inline FeatureConfig feature_config_from(const LOWeights& phi, FeatureConfig base, bool learn_betas) {
    if (!learn_betas) return base;
    const auto& z = phi.beta_logits;
    base.momentum_betas = {sigmoid(z[0]), sigmoid(z[1]), sigmoid(z[2])};
    base.second_moment_beta = sigmoid(z[3]);
    base.adafactor_betas = {sigmoid(z[4]), sigmoid(z[5]), sigmoid(z[6])};
    return base;
}

inline LOWeights zero_lo(std::size_t input_dim = kNumFeatures, std::size_t hidden = kLoHidden) {
    return {Tensor(input_dim, hidden), Tensor(hidden, 1), Tensor(hidden, 2), Tensor(2, 1), default_beta_logits()};
}

inline LOWeights init_lo(RngStream rng, double weight_std = 0.01, std::size_t input_dim = kNumFeatures,
                         std::size_t hidden = kLoHidden) {
    LOWeights phi = zero_lo(input_dim, hidden);
    RngStream r1 = rng_child(rng, 1), r2 = rng_child(rng, 2);
    fill_gaussian(phi.w1.flat(), 0.0, weight_std, r1);
    fill_gaussian(phi.w2.flat(), 0.0, weight_std, r2);
    return phi;
}

inline std::vector<double> flatten(const LOWeights& phi) {
    std::vector<double> v;
    v.reserve(lo_flat_size(phi.input_dim(), phi.hidden()));
    for (const Tensor* t : {&phi.w1, &phi.b1, &phi.w2, &phi.b2}) v.insert(v.end(), t->flat().begin(), t->flat().end());
    v.insert(v.end(), phi.beta_logits.begin(), phi.beta_logits.end());
    return v;
}

inline LOWeights unflatten(std::span<const double> v, std::size_t input_dim = kNumFeatures,
                           std::size_t hidden = kLoHidden) {
    const std::size_t want = lo_flat_size(input_dim, hidden);
    if (v.size() != want) {
        throw std::invalid_argument("unflatten: expected " + std::to_string(want) + " values, got " +
                                    std::to_string(v.size()));
    }
    LOWeights phi = zero_lo(input_dim, hidden);
    std::size_t off = 0;
    for (Tensor* t : {&phi.w1, &phi.b1, &phi.w2, &phi.b2}) {
        std::copy(v.begin() + static_cast<std::ptrdiff_t>(off), v.begin() + static_cast<std::ptrdiff_t>(off + t->size()),
                  t->flat().begin());
        off += t->size();
    }
    std::copy(v.begin() + static_cast<std::ptrdiff_t>(off), v.end(), phi.beta_logits.begin());
    return phi;
}

struct LOOutput {
    std::vector<double> d;
    std::vector<double> m;
    bool diverged = false;
};

// Applies phi to every row of the feature matrix independently.
inline LOOutput lo_forward(const LOWeights& phi, const Tensor& features, Activation act = Activation::ReLU) {
    if (features.cols() != phi.input_dim()) {
        throw DimensionError("lo_forward: feature matrix has " + std::to_string(features.cols()) +
                             " columns, optimizer expects " + std::to_string(phi.input_dim()));
    }
    const std::size_t n = features.rows(), in = phi.input_dim(), hid = phi.hidden();
    LOOutput out{std::vector<double>(n), std::vector<double>(n), false};
    std::vector<double> h(hid);
    const double* w1 = phi.w1.data();
    const double* w2 = phi.w2.data();
    for (std::size_t r = 0; r < n; ++r) {
        const double* f = features.data() + r * in;
        for (std::size_t k = 0; k < hid; ++k) h[k] = phi.b1[k];
        for (std::size_t j = 0; j < in; ++j) {
            const double fj = f[j];
            const double* wj = w1 + j * hid;
            for (std::size_t k = 0; k < hid; ++k) h[k] += fj * wj[k];
        }
        double d = phi.b2[0], m = phi.b2[1];
        for (std::size_t k = 0; k < hid; ++k) {
            const double hk = act == Activation::ReLU ? (h[k] > 0.0 ? h[k] : 0.0) : std::tanh(h[k]);
            d += hk * w2[2 * k];
            m += hk * w2[2 * k + 1];
        }
        out.d[r] = d;
        out.m[r] = m;
    }
    out.diverged = !all_finite(out.d) || !all_finite(out.m);
    return out;
}

// Returns false when any updated weight is non-finite.
inline bool apply_update(Tensor& w, std::span<const double> m, std::span<const double> d, const UpdateRuleConfig& cfg,
                         double scale) {
    if (m.size() != w.size() || d.size() != w.size()) throw DimensionError("apply_update: output length mismatch");
    bool finite = true;
    const double step = scale * cfg.lambda1;
    for (std::size_t i = 0; i < w.size(); ++i) {
        w[i] -= step * d[i] * std::exp(cfg.lambda2 * m[i]);
        finite = finite && std::isfinite(w[i]);
    }
    return finite;
}

}  // namespace mulo
