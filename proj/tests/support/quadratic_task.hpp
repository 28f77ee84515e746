#pragma once

// Analytic PES tasks over a flat theta.

#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "mulo/pes.hpp"

namespace mulo::check {

// Loss ||theta||^2 / 2 at every step, independent of history.
struct QuadraticTask {
    struct State {
        std::size_t steps = 0;
    };
    State fresh_state(std::size_t, std::uint64_t) const { return {}; }
    UnrollResult unroll(std::span<const double> theta, State& s, std::size_t n) const {
        double ss = 0.0;
        for (double v : theta) ss += v * v;
        s.steps += n;
        return {0.5 * ss, false, std::numeric_limits<double>::max() / 1e3};
    }
    std::size_t steps_done(const State& s) const { return s.steps; }
};

// x_{t+1} = x_t + theta, loss ||x_t||^2 / 2 after each step; the loss of a
// truncation depends on every theta used earlier in the episode.
struct DriftTask {
    std::size_t dim = 3;
    struct State {
        std::vector<double> x;
        std::size_t steps = 0;
    };
    State fresh_state(std::size_t, std::uint64_t) const { return {std::vector<double>(dim, 0.0), 0}; }
    UnrollResult unroll(std::span<const double> theta, State& s, std::size_t n) const {
        double total = 0.0;
        for (std::size_t t = 0; t < n; ++t) {
            double ss = 0.0;
            for (std::size_t k = 0; k < dim; ++k) {
                s.x[k] += theta[k];
                ss += s.x[k] * s.x[k];
            }
            total += 0.5 * ss;
            ++s.steps;
        }
        return {total / static_cast<double>(n), false, std::numeric_limits<double>::max() / 1e3};
    }
    std::size_t steps_done(const State& s) const { return s.steps; }
};

// Loss independent of theta.
struct ConstantTask {
    struct State {
        std::size_t steps = 0;
    };
    State fresh_state(std::size_t, std::uint64_t) const { return {}; }
    UnrollResult unroll(std::span<const double>, State& s, std::size_t n) const {
        s.steps += n;
        return {1.25, false, 1.0};
    }
    std::size_t steps_done(const State& s) const { return s.steps; }
};

static_assert(PesTask<QuadraticTask>);
static_assert(PesTask<DriftTask>);
static_assert(PesTask<ConstantTask>);

}  // namespace mulo::check
