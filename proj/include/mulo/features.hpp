#pragma once

// Per-parameter accumulators and the 27-column feature matrix fed to the
// learned optimizer.
//
// Every tensor is viewed as a rows x cols matrix (biases are n x 1). With
// g the gradient and i = 1..3 indexing timescales:
//
//   m_i = b_i m_i + (1 - b_i) g                     (b_1..b_3)
//   v   = b_4 v   + (1 - b_4) g^2
//   Adafactor factors of a nonnegative matrix s with row means R, col means C:
//     row_factor(s)_r = rsqrt((R_r + eps) / (mean(R) + eps))
//     col_factor(s)_c = rsqrt(C_c + eps)
//   so that row_factor * col_factor ~ rsqrt(R_r C_c / mean(R)), the rank-1
//   reconstruction of s.
//   delta = g * row_factor(v) * col_factor(v)
//   r_i = b_{i+4} r_i + (1 - b_{i+4}) row_mean(delta^2)
//   c_i = b_{i+4} c_i + (1 - b_{i+4}) col_mean(delta^2)
//
// Column order of the feature matrix:
//    0        w
//    1..3     m_1..m_3
//    4        v
//    5..7     m_i / sqrt(v + eps)
//    8        1 / sqrt(v + eps)
//    9..11    g   * RF_i * CF_i      (RF_i, CF_i: factors built from r_i, c_i)
//   12..14    r_i tiled across columns
//   15..17    c_i tiled across rows
//   18..20    1 / sqrt(r_i + eps)
//   21..23    1 / sqrt(c_i + eps)
//   24..26    m_i * RF_i * CF_i
// With normalize enabled each column is divided by its RMS over the tensor,
// the RMS clamped below at eps.

#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "mulo/optimizee.hpp"
#include "mulo/tensor.hpp"

namespace mulo {

inline constexpr std::size_t kNumFeatures = 27;

struct FeatureConfig {
    std::array<double, 3> momentum_betas{0.9, 0.99, 0.999};
    double second_moment_beta = 0.999;
    std::array<double, 3> adafactor_betas{0.9, 0.99, 0.999};
    double eps = 1e-8;
    bool normalize = true;
};

inline void validate(const FeatureConfig& cfg) {
    auto ok = [](double b) { return b > 0.0 && b < 1.0; };
    for (double b : cfg.momentum_betas) if (!ok(b)) throw std::invalid_argument("beta must lie in (0, 1)");
    for (double b : cfg.adafactor_betas) if (!ok(b)) throw std::invalid_argument("beta must lie in (0, 1)");
    if (!ok(cfg.second_moment_beta)) throw std::invalid_argument("beta must lie in (0, 1)");
    if (!(cfg.eps > 0.0)) throw std::invalid_argument("eps must be positive");
}

struct TensorFeatureState {
    std::array<Tensor, 3> m;
    Tensor v;
    std::array<Tensor, 3> row;  // rows x 1
    std::array<Tensor, 3> col;  // cols x 1
};

struct FeatureState {
    std::vector<TensorFeatureState> tensors;
};

inline TensorFeatureState init_tensor_state(std::size_t rows, std::size_t cols) {
    TensorFeatureState s;
    for (auto& m : s.m) m = Tensor(rows, cols);
    s.v = Tensor(rows, cols);
    for (auto& r : s.row) r = Tensor(rows, 1);
    for (auto& c : s.col) c = Tensor(cols, 1);
    return s;
}

inline FeatureState init_state(const OptimizeeParams& params) {
    FeatureState st;
    for (std::size_t i = 0; i < params.tensor_count(); ++i) {
        const Tensor& t = params.tensor(i);
        st.tensors.push_back(init_tensor_state(t.rows(), t.cols()));
    }
    return st;
}

struct AdafactorFactors {
    Tensor row;  // rows x 1
    Tensor col;  // cols x 1
};

inline AdafactorFactors adafactor_factors(const Tensor& row_stat, const Tensor& col_stat, double eps) {
    const double row_avg = mean(row_stat);
    AdafactorFactors f{Tensor(row_stat.rows(), 1), Tensor(col_stat.rows(), 1)};
    for (std::size_t r = 0; r < row_stat.size(); ++r) f.row[r] = 1.0 / std::sqrt((row_stat[r] + eps) / (row_avg + eps));
    for (std::size_t c = 0; c < col_stat.size(); ++c) f.col[c] = 1.0 / std::sqrt(col_stat[c] + eps);
    return f;
}

inline void update_tensor_state(TensorFeatureState& s, const Tensor& g, const FeatureConfig& cfg) {
    detail::require_same_shape(s.v, g, "update_state");
    const std::size_t rows = g.rows(), cols = g.cols();
    for (int i = 0; i < 3; ++i) {
        const double b = cfg.momentum_betas[i];
        Tensor& m = s.m[i];
        for (std::size_t k = 0; k < g.size(); ++k) m[k] = b * m[k] + (1.0 - b) * g[k];
    }
    const double b4 = cfg.second_moment_beta;
    for (std::size_t k = 0; k < g.size(); ++k) s.v[k] = b4 * s.v[k] + (1.0 - b4) * g[k] * g[k];

    const auto f = adafactor_factors(row_mean(s.v), col_mean(s.v), cfg.eps);
    Tensor delta_sq(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            const double d = g(r, c) * f.row[r] * f.col[c];
            delta_sq(r, c) = d * d;
        }
    }
    const Tensor rm = row_mean(delta_sq);
    const Tensor cm = col_mean(delta_sq);
    for (int i = 0; i < 3; ++i) {
        const double b = cfg.adafactor_betas[i];
        for (std::size_t r = 0; r < rows; ++r) s.row[i][r] = b * s.row[i][r] + (1.0 - b) * rm[r];
        for (std::size_t c = 0; c < cols; ++c) s.col[i][c] = b * s.col[i][c] + (1.0 - b) * cm[c];
    }
}

inline void update_state(FeatureState& state, const Grads& grads, const FeatureConfig& cfg) {
    if (state.tensors.size() != grads.tensor_count()) throw DimensionError("update_state: tensor count mismatch");
    for (std::size_t i = 0; i < state.tensors.size(); ++i) update_tensor_state(state.tensors[i], grads.tensor(i), cfg);
}

// Divides each column by max(rms, eps).
inline void normalize_columns(Tensor& f, double eps) {
    std::vector<double> ss(f.cols(), 0.0);
    for (std::size_t r = 0; r < f.rows(); ++r) {
        const double* p = f.data() + r * f.cols();
        for (std::size_t c = 0; c < f.cols(); ++c) ss[c] += p[c] * p[c];
    }
    const double n = static_cast<double>(std::max<std::size_t>(f.rows(), 1));
    for (auto& v : ss) v = 1.0 / std::max(std::sqrt(v / n), eps);
    for (std::size_t r = 0; r < f.rows(); ++r) {
        double* p = f.data() + r * f.cols();
        for (std::size_t c = 0; c < f.cols(); ++c) p[c] *= ss[c];
    }
}

// Features for one tensor, one row per parameter in row-major order.
inline Tensor feature_matrix(const TensorFeatureState& s, const Tensor& w, const Tensor& g, const FeatureConfig& cfg) {
    detail::require_same_shape(s.v, w, "feature_matrix");
    detail::require_same_shape(w, g, "feature_matrix");
    const std::size_t rows = w.rows(), cols = w.cols();
    const double eps = cfg.eps;
    std::array<AdafactorFactors, 3> fac;
    for (int i = 0; i < 3; ++i) fac[i] = adafactor_factors(s.row[i], s.col[i], eps);

    Tensor out(w.size(), kNumFeatures);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            const std::size_t k = r * cols + c;
            double* f = out.data() + k * kNumFeatures;
            const double rsv = 1.0 / std::sqrt(s.v[k] + eps);
            f[0] = w[k];
            f[4] = s.v[k];
            f[8] = rsv;
            for (int i = 0; i < 3; ++i) {
                const double m = s.m[i][k];
                const double rc = fac[i].row[r] * fac[i].col[c];
                f[1 + i] = m;
                f[5 + i] = m * rsv;
                f[9 + i] = g[k] * rc;
                f[12 + i] = s.row[i][r];
                f[15 + i] = s.col[i][c];
                f[18 + i] = 1.0 / std::sqrt(s.row[i][r] + eps);
                f[21 + i] = 1.0 / std::sqrt(s.col[i][c] + eps);
                f[24 + i] = m * rc;
            }
        }
    }
    if (cfg.normalize) normalize_columns(out, eps);
    return out;
}

}  // namespace mulo
