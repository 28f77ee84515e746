#pragma once

// The optimizee: an L-layer MLP classifier with parametrization-aware
// construction and a hand-written forward/backward pass.
//
// Layer l computes  z_l = c_l * (h_{l-1} W_l + b_l),  h_l = act(z_l)
// with W_l stored fan_in x fan_out and c_l the forward multiplier of the
// layer's role. The last z is the logits; loss is mean softmax cross-entropy.

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "mulo/dataset.hpp"
#include "mulo/parametrization.hpp"
#include "mulo/rng.hpp"
#include "mulo/tensor.hpp"

namespace mulo {

enum class Activation { ReLU, Tanh };

inline Activation parse_activation(std::string_view s) {
    if (s == "relu") return Activation::ReLU;
    if (s == "tanh") return Activation::Tanh;
    throw std::invalid_argument("unknown activation: " + std::string(s));
}

struct MLPSpec {
    std::size_t input_dim = 64;
    std::size_t width = 128;
    std::size_t depth = 3;  // number of weight layers
    std::size_t num_classes = 10;
    ParamMode mode = ParamMode::MuP;
    MultiplierSet multipliers{};
    Activation activation = Activation::ReLU;
    InitReading init_reading = InitReading::StdDev;
    bool zero_output_init = true;
};

inline void validate(const MLPSpec& s) {
    if (s.depth < 2) throw std::invalid_argument("MLP depth must be >= 2");
    if (s.width < 1 || s.input_dim < 1 || s.num_classes < 1) throw std::invalid_argument("MLP dims must be >= 1");
}

struct Layer {
    Tensor weight;  // fan_in x fan_out
    Tensor bias;    // fan_out x 1
    LayerRole role = LayerRole::Hidden;
    LayerGeometry geom{};
    double multiplier = 1.0;
};

// Identifies one trainable tensor (a weight or a bias) of the optimizee.
struct TensorInfo {
    LayerRole role;
    LayerGeometry geom;
    bool is_bias;
};

struct OptimizeeParams {
    std::vector<Layer> layers;
    Activation activation = Activation::ReLU;

    std::size_t tensor_count() const noexcept { return 2 * layers.size(); }
    Tensor& tensor(std::size_t i) { return i % 2 == 0 ? layers[i / 2].weight : layers[i / 2].bias; }
    const Tensor& tensor(std::size_t i) const { return i % 2 == 0 ? layers[i / 2].weight : layers[i / 2].bias; }
    TensorInfo info(std::size_t i) const {
        const Layer& l = layers[i / 2];
        return {l.role, l.geom, i % 2 == 1};
    }
    std::size_t parameter_count() const noexcept {
        std::size_t n = 0;
        for (const auto& l : layers) n += l.weight.size() + l.bias.size();
        return n;
    }
    bool all_finite() const {
        for (const auto& l : layers) {
            if (!mulo::all_finite(l.weight) || !mulo::all_finite(l.bias)) return false;
        }
        return true;
    }
};

// Same structure as OptimizeeParams; holds dL/dW and dL/db.
struct Grads {
    std::vector<Tensor> weight;
    std::vector<Tensor> bias;

    std::size_t tensor_count() const noexcept { return 2 * weight.size(); }
    Tensor& tensor(std::size_t i) { return i % 2 == 0 ? weight[i / 2] : bias[i / 2]; }
    const Tensor& tensor(std::size_t i) const { return i % 2 == 0 ? weight[i / 2] : bias[i / 2]; }
};

struct ForwardRecord {
    std::vector<Tensor> preact;  // per layer, batch x fan_out, after the multiplier; last is logits
    std::vector<Tensor> act;     // per hidden layer (all but last), batch x fan_out
    Tensor probs;                // softmax of logits
    double loss = 0.0;
    bool diverged = false;

    const Tensor& logits() const { return preact.back(); }
};

inline std::vector<LayerGeometry> layer_geometries(const MLPSpec& s) {
    std::vector<LayerGeometry> g(s.depth);
    for (std::size_t l = 0; l < s.depth; ++l) {
        g[l].fan_in = l == 0 ? s.input_dim : s.width;
        g[l].fan_out = l + 1 == s.depth ? s.num_classes : s.width;
    }
    return g;
}

inline OptimizeeParams init_mlp(const MLPSpec& spec, RngStream rng) {
    validate(spec);
    OptimizeeParams p;
    p.activation = spec.activation;
    const auto geoms = layer_geometries(spec);
    for (std::size_t l = 0; l < spec.depth; ++l) {
        Layer layer;
        layer.role = role_of_layer(l, spec.depth);
        layer.geom = geoms[l];
        layer.multiplier = forward_multiplier(layer.role, layer.geom, spec.mode, spec.multipliers);
        RngStream lr = rng_child(rng, l);
        const bool zero = layer.role == LayerRole::Output && spec.zero_output_init;
        const double std = zero ? 0.0 : init_std(layer.role, layer.geom, spec.mode, spec.init_reading);
        layer.weight = Tensor(layer.geom.fan_in, layer.geom.fan_out);
        if (std > 0.0) fill_gaussian(layer.weight.flat(), 0.0, std, lr);
        layer.bias = Tensor(layer.geom.fan_out, 1);
        p.layers.push_back(std::move(layer));
    }
    return p;
}

inline Grads zero_grads_like(const OptimizeeParams& p) {
    Grads g;
    for (const auto& l : p.layers) {
        g.weight.emplace_back(l.weight.rows(), l.weight.cols());
        g.bias.emplace_back(l.bias.rows(), 1);
    }
    return g;
}

namespace detail {
inline double activate(Activation a, double z) {
    return a == Activation::ReLU ? (z > 0.0 ? z : 0.0) : std::tanh(z);
}
// derivative expressed through the pre-activation z and output h
inline double activate_grad(Activation a, double z, double h) {
    return a == Activation::ReLU ? (z > 0.0 ? 1.0 : 0.0) : 1.0 - h * h;
}
}  // namespace detail

// Forward on an arbitrary input matrix; labels may be empty (loss left at 0).
inline ForwardRecord forward(const OptimizeeParams& params, const Tensor& x, std::span<const std::uint32_t> y) {
    ForwardRecord rec;
    const std::size_t L = params.layers.size();
    if (L == 0) throw std::invalid_argument("forward: empty network");
    if (x.cols() != params.layers[0].geom.fan_in) {
        throw DimensionError("forward: input has " + std::to_string(x.cols()) + " columns, network expects " +
                             std::to_string(params.layers[0].geom.fan_in));
    }
    const Tensor* h = &x;
    for (std::size_t l = 0; l < L; ++l) {
        const Layer& layer = params.layers[l];
        Tensor z = matmul(*h, layer.weight);
        const std::size_t n = z.cols();
        for (std::size_t r = 0; r < z.rows(); ++r) {
            double* zr = z.data() + r * n;
            for (std::size_t c = 0; c < n; ++c) zr[c] = layer.multiplier * (zr[c] + layer.bias[c]);
        }
        rec.preact.push_back(std::move(z));
        if (l + 1 < L) {
            rec.act.push_back(map(rec.preact.back(), [a = params.activation](double v) { return detail::activate(a, v); }));
            h = &rec.act.back();
        }
    }

    const Tensor& logits = rec.preact.back();
    rec.probs = Tensor(logits.rows(), logits.cols());
    double total = 0.0;
    for (std::size_t r = 0; r < logits.rows(); ++r) {
        auto lr = logits.row(r);
        auto pr = rec.probs.row(r);
        double mx = -std::numeric_limits<double>::infinity();
        for (double v : lr) mx = std::max(mx, v);
        double s = 0.0;
        for (std::size_t c = 0; c < lr.size(); ++c) {
            pr[c] = std::exp(lr[c] - mx);
            s += pr[c];
        }
        for (double& v : pr) v /= s;
        if (!y.empty()) total += -(lr[y[r]] - mx - std::log(s));
    }
    if (!y.empty()) {
        if (y.size() != logits.rows()) throw DimensionError("forward: label count does not match batch");
        rec.loss = total / static_cast<double>(y.size());
    }
    rec.diverged = !std::isfinite(rec.loss) || !all_finite(logits);
    return rec;
}

inline ForwardRecord forward(const OptimizeeParams& params, const Batch& batch) {
    return forward(params, batch.x, batch.y);
}

// Exact gradients of the mean cross-entropy with respect to every weight and bias.
inline Grads backward(const OptimizeeParams& params, const ForwardRecord& rec, const Batch& batch) {
    const std::size_t L = params.layers.size();
    const std::size_t B = batch.size();
    if (rec.preact.size() != L || rec.probs.rows() != B) throw DimensionError("backward: record does not match batch");
    Grads g = zero_grads_like(params);

    // dL/dz for the logits
    Tensor dz = rec.probs;
    for (std::size_t r = 0; r < B; ++r) dz(r, batch.y[r]) -= 1.0;
    const double inv_b = 1.0 / static_cast<double>(B);
    for (std::size_t i = 0; i < dz.size(); ++i) dz[i] *= inv_b;

    for (std::size_t l = L; l-- > 0;) {
        const Layer& layer = params.layers[l];
        const double c = layer.multiplier;
        const Tensor& h_in = l == 0 ? batch.x : rec.act[l - 1];
        // z = c (h W + b): dW = c h^T dz, db = c sum_rows(dz), dh = c dz W^T
        g.weight[l] = matmul_tn(h_in, dz);
        for (std::size_t i = 0; i < g.weight[l].size(); ++i) g.weight[l][i] *= c;
        Tensor& db = g.bias[l];
        for (std::size_t r = 0; r < dz.rows(); ++r) {
            for (std::size_t k = 0; k < dz.cols(); ++k) db[k] += dz(r, k);
        }
        for (std::size_t k = 0; k < db.size(); ++k) db[k] *= c;
        if (l == 0) break;
        Tensor dh = matmul_nt(dz, layer.weight);
        const Tensor& z_prev = rec.preact[l - 1];
        const Tensor& h_prev = rec.act[l - 1];
        for (std::size_t i = 0; i < dh.size(); ++i) {
            dh[i] *= c * detail::activate_grad(params.activation, z_prev[i], h_prev[i]);
        }
        dz = std::move(dh);
    }
    return g;
}

}  // namespace mulo
