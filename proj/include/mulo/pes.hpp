#pragma once

// Persistent evolution strategies over a flat parameter vector theta, plus
// the outer AdamW step and its warmup/cosine schedule.
//
// Each antithetic pair i keeps two persistent inner states, one always
// unrolled with theta + eps and one with theta - eps, and the running sum xi_i
// of every eps it has drawn this episode. Per truncation:
//
//   g_hat = 1/N sum_i xi_i (L_i+ - L_i-) / (2 sigma^2)
//
// When a pair reaches the episode horizon or diverges its states are
// re-initialized and xi_i is zeroed. The inner problem is abstracted by the
// PesTask concept so the estimator can be checked on analytic meta-losses.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

#include "mulo/parallel.hpp"
#include "mulo/rng.hpp"

namespace mulo {

struct PESConfig {
    std::size_t num_pairs = 8;
    double sigma = 0.01;
    std::size_t truncation = 50;
    std::size_t max_unroll = 1000;
    double loss_cap_factor = 100.0;  // cap = factor * episode's initial loss
};

inline void validate(const PESConfig& c) {
    if (c.num_pairs < 1) throw std::invalid_argument("pes.num_pairs must be >= 1");
    if (!(c.sigma > 0.0)) throw std::invalid_argument("pes.sigma must be positive");
    if (c.truncation < 1 || c.truncation > c.max_unroll) {
        throw std::invalid_argument("pes.truncation must satisfy 1 <= truncation <= max_unroll");
    }
    if (!(c.loss_cap_factor > 0.0)) throw std::invalid_argument("pes.loss_cap_factor must be positive");
}

struct UnrollResult {
    double mean_loss = 0.0;       // mean inner loss over the steps taken
    bool diverged = false;
    double reference_loss = 1.0;  // initial loss of the episode, used for the cap
};

template <class T>
concept PesTask = requires(const T& task, typename T::State& s, std::span<const double> theta, std::size_t pair,
                           std::uint64_t episode, std::size_t steps) {
    { task.fresh_state(pair, episode) } -> std::same_as<typename T::State>;
    { task.unroll(theta, s, steps) } -> std::same_as<UnrollResult>;
    { task.steps_done(std::as_const(s)) } -> std::convertible_to<std::size_t>;
};

template <class State>
struct ParticlePair {
    State plus;
    State minus;
    std::vector<double> xi;
    std::uint64_t episode = 0;
};

struct PesEstimate {
    std::vector<double> grad;
    double mean_loss = 0.0;
    std::size_t diverged_pairs = 0;
};

// Contribution of one pair; symmetric under (xi, L+, L-) -> (-xi, L-, L+).
inline void accumulate_pair_gradient(std::span<double> out, std::span<const double> xi, double loss_plus,
                                     double loss_minus, double sigma, double weight) {
    const double coef = weight * (loss_plus - loss_minus) / (2.0 * sigma * sigma);
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += coef * xi[k];
}

template <PesTask Task>
class PesEstimator {
public:
    using State = typename Task::State;

    PesEstimator(const Task& task, PESConfig cfg, std::size_t dim, RngStream rng)
        : task_(&task), cfg_(cfg), dim_(dim), rng_(rng) {
        validate(cfg_);
        pairs_.resize(cfg_.num_pairs);
        for (std::size_t i = 0; i < pairs_.size(); ++i) reset_pair(i, 0);
    }

    const PESConfig& config() const noexcept { return cfg_; }
    std::vector<ParticlePair<State>>& pairs() noexcept { return pairs_; }
    const std::vector<ParticlePair<State>>& pairs() const noexcept { return pairs_; }

    // `index` identifies the truncation and keys the perturbation streams.
    PesEstimate estimate(std::span<const double> theta, std::uint64_t index, unsigned threads = 1,
                         std::size_t truncation = 0) {
        if (theta.size() != dim_) throw std::invalid_argument("pes: theta has wrong dimension");
        const std::size_t K = truncation == 0 ? cfg_.truncation : truncation;
        const std::size_t N = pairs_.size();
        struct PairOut {
            double loss_plus = 0.0, loss_minus = 0.0;
            bool diverged = false;
        };
        std::vector<PairOut> outs(N);

        parallel_for(N, threads, [&](std::size_t i) {
            auto& pair = pairs_[i];
            RngStream eps_rng = rng_child(rng_, index, i);
            std::vector<double> eps(dim_);
            fill_gaussian(eps, 0.0, cfg_.sigma, eps_rng);
            std::vector<double> tp(dim_), tm(dim_);
            for (std::size_t k = 0; k < dim_; ++k) {
                tp[k] = theta[k] + eps[k];
                tm[k] = theta[k] - eps[k];
            }
            const std::size_t done = task_->steps_done(std::as_const(pair.plus));
            const std::size_t steps = std::min(K, cfg_.max_unroll - std::min(done, cfg_.max_unroll));
            const UnrollResult rp = task_->unroll(tp, pair.plus, std::max<std::size_t>(steps, 1));
            const UnrollResult rm = task_->unroll(tm, pair.minus, std::max<std::size_t>(steps, 1));
            for (std::size_t k = 0; k < dim_; ++k) pair.xi[k] += eps[k];
            outs[i].loss_plus = capped(rp);
            outs[i].loss_minus = capped(rm);
            outs[i].diverged = rp.diverged || rm.diverged;
        });

        PesEstimate est;
        est.grad.assign(dim_, 0.0);
        double loss_sum = 0.0;
        for (std::size_t i = 0; i < N; ++i) {
            accumulate_pair_gradient(est.grad, pairs_[i].xi, outs[i].loss_plus, outs[i].loss_minus, cfg_.sigma,
                                     1.0 / static_cast<double>(N));
            loss_sum += outs[i].loss_plus + outs[i].loss_minus;
            if (outs[i].diverged) ++est.diverged_pairs;
        }
        est.mean_loss = loss_sum / static_cast<double>(2 * N);

        for (std::size_t i = 0; i < N; ++i) {
            const bool horizon = task_->steps_done(std::as_const(pairs_[i].plus)) >= cfg_.max_unroll;
            if (horizon || outs[i].diverged) reset_pair(i, pairs_[i].episode + 1);
        }
        return est;
    }

private:
    double capped(const UnrollResult& r) const {
        const double cap = cfg_.loss_cap_factor * r.reference_loss;
        if (r.diverged || !std::isfinite(r.mean_loss)) return cap;
        return std::min(r.mean_loss, cap);
    }

    void reset_pair(std::size_t i, std::uint64_t episode) {
        auto& p = pairs_[i];
        p.episode = episode;
        p.plus = task_->fresh_state(i, episode);
        p.minus = p.plus;
        p.xi.assign(dim_, 0.0);
    }

    const Task* task_;
    PESConfig cfg_;
    std::size_t dim_;
    RngStream rng_;
    std::vector<ParticlePair<State>> pairs_;
};

struct OuterSchedule {
    double max_lr = 3e-3;
    std::size_t warmup_steps = 100;
    std::size_t total_steps = 5000;
    double final_lr = 1e-3;
    double clip_norm = 1.0;
    double weight_decay = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

inline void validate(const OuterSchedule& s) {
    if (s.warmup_steps >= s.total_steps) throw std::invalid_argument("schedule.warmup_steps must be < total_steps");
    if (!(s.max_lr > 0.0) || !(s.final_lr > 0.0)) throw std::invalid_argument("schedule learning rates must be positive");
}

// 0-indexed: linear ramp lr(t) = max_lr * t / warmup for t < warmup, then
// cosine from max_lr at t = warmup to final_lr at t = total - 1.
inline double schedule_lr(const OuterSchedule& s, std::size_t t) {
    if (t < s.warmup_steps) return s.max_lr * static_cast<double>(t) / static_cast<double>(s.warmup_steps);
    const std::size_t span = s.total_steps - 1 - s.warmup_steps;
    const double p = span == 0 ? 1.0 : std::min(1.0, static_cast<double>(t - s.warmup_steps) / static_cast<double>(span));
    return s.final_lr + (s.max_lr - s.final_lr) * 0.5 * (1.0 + std::cos(std::numbers::pi * p));
}

// Scales g in place to norm <= max_norm; returns the pre-clip norm.
inline double clip_global_norm(std::span<double> g, double max_norm) {
    double ss = 0.0;
    for (double v : g) ss += v * v;
    const double norm = std::sqrt(ss);
    if (max_norm > 0.0 && norm > max_norm) {
        const double s = max_norm / norm;
        for (double& v : g) v *= s;
    }
    return norm;
}

struct AdamWState {
    std::vector<double> m;
    std::vector<double> v;
    std::size_t t = 0;
};

struct OuterStepInfo {
    double lr = 0.0;
    double grad_norm = 0.0;  // before clipping
};

inline OuterStepInfo outer_step(std::vector<double>& theta, std::vector<double> grad, AdamWState& st,
                                const OuterSchedule& sched, std::size_t t) {
    if (grad.size() != theta.size()) throw std::invalid_argument("outer_step: gradient has wrong dimension");
    if (st.m.size() != theta.size()) {
        st.m.assign(theta.size(), 0.0);
        st.v.assign(theta.size(), 0.0);
    }
    OuterStepInfo info;
    info.grad_norm = clip_global_norm(grad, sched.clip_norm);
    info.lr = schedule_lr(sched, t);
    ++st.t;
    const double c1 = 1.0 - std::pow(sched.beta1, static_cast<double>(st.t));
    const double c2 = 1.0 - std::pow(sched.beta2, static_cast<double>(st.t));
    for (std::size_t k = 0; k < theta.size(); ++k) {
        st.m[k] = sched.beta1 * st.m[k] + (1.0 - sched.beta1) * grad[k];
        st.v[k] = sched.beta2 * st.v[k] + (1.0 - sched.beta2) * grad[k] * grad[k];
        const double upd = (st.m[k] / c1) / (std::sqrt(st.v[k] / c2) + sched.eps);
        theta[k] -= info.lr * (upd + sched.weight_decay * theta[k]);
    }
    return info;
}

}  // namespace mulo
