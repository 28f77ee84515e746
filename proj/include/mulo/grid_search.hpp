#pragma once

// Exhaustive search over (lr, input_mult, output_mult, hidden_lr_mult) for
// muAdam. The evaluator is any callable (GridConfig, seed) -> GridEval, so the
// ranking logic can be checked on analytic problems.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <span>
#include <tuple>
#include <vector>

#include "mulo/csv.hpp"
#include "mulo/parallel.hpp"
#include "mulo/parametrization.hpp"

namespace mulo {

struct GridConfig {
    std::size_t id = 0;
    double lr = 1e-3;
    MultiplierSet mult{};

    auto key() const { return std::tuple(lr, mult.input_mult, mult.output_mult, mult.hidden_lr_mult); }
};

struct AdamGrid {
    std::vector<double> lrs{0.1, 0.01, 0.001, 0.0001};
    std::vector<double> input_mults{0.0625, 0.25, 1.0, 4.0, 16.0};
    std::vector<double> output_mults{0.0625, 0.25, 1.0, 4.0, 16.0};
    std::vector<double> hidden_lr_mults{0.0625, 0.25, 1.0, 4.0, 16.0};

    std::vector<GridConfig> expand() const {
        std::vector<GridConfig> out;
        for (double lr : lrs)
            for (double im : input_mults)
                for (double om : output_mults)
                    for (double hm : hidden_lr_mults) out.push_back({out.size(), lr, {im, om, hm}});
        return out;
    }
};

struct GridEval {
    double final_loss = 0.0;
    bool diverged = false;
};

struct GridRun {
    std::size_t config_id = 0;
    std::uint64_t seed = 0;
    double final_loss = 0.0;
    bool diverged = false;
};

struct GridOutcome {
    GridConfig config;
    double mean_loss = 0.0;
    std::size_t diverged_seeds = 0;
    std::size_t num_seeds = 0;

    bool all_diverged() const { return num_seeds > 0 && diverged_seeds == num_seeds; }
};

struct GridResult {
    std::vector<GridConfig> configs;
    std::vector<GridRun> runs;         // config-major, seed-minor
    std::vector<GridOutcome> ranked;   // best first
};

// Orders configs: any config with a finite seed beats one where every seed
// diverged; then lower mean loss; exact ties go to the lexicographically
// smallest (lr, input, output, hidden) tuple.
inline std::vector<GridOutcome> rank_outcomes(std::vector<GridOutcome> outs) {
    std::stable_sort(outs.begin(), outs.end(), [](const GridOutcome& a, const GridOutcome& b) {
        if (a.all_diverged() != b.all_diverged()) return !a.all_diverged();
        if (a.mean_loss != b.mean_loss) return a.mean_loss < b.mean_loss;
        return a.config.key() < b.config.key();
    });
    return outs;
}

// `loss_cap` replaces non-finite losses so every recorded value is finite.
template <class Eval>
GridResult grid_search(const std::vector<GridConfig>& configs, std::span<const std::uint64_t> seeds, Eval&& eval,
                       double loss_cap, unsigned threads = 1) {
    if (configs.empty()) throw std::invalid_argument("grid_search: empty grid");
    if (seeds.empty()) throw std::invalid_argument("grid_search: no seeds");
    GridResult res;
    res.configs = configs;
    res.runs.resize(configs.size() * seeds.size());
    parallel_for(res.runs.size(), threads, [&](std::size_t k) {
        const GridConfig& c = configs[k / seeds.size()];
        const std::uint64_t seed = seeds[k % seeds.size()];
        GridEval e = eval(c, seed);
        if (!std::isfinite(e.final_loss)) {
            e.diverged = true;
            e.final_loss = loss_cap;
        }
        if (e.diverged) e.final_loss = std::min(e.final_loss, loss_cap);
        res.runs[k] = {c.id, seed, e.final_loss, e.diverged};
    });
    std::vector<GridOutcome> outs;
    for (std::size_t i = 0; i < configs.size(); ++i) {
        GridOutcome o{configs[i], 0.0, 0, seeds.size()};
        for (std::size_t s = 0; s < seeds.size(); ++s) {
            const GridRun& r = res.runs[i * seeds.size() + s];
            o.mean_loss += r.final_loss;
            if (r.diverged) ++o.diverged_seeds;
        }
        o.mean_loss /= static_cast<double>(seeds.size());
        outs.push_back(o);
    }
    res.ranked = rank_outcomes(std::move(outs));
    return res;
}

// Analytic tuning target: gradient descent with the config's lr on
// curvature * w^2 / 2 from w0. The loss after `steps` steps is
// (1 - curvature * lr)^(2 steps) times the initial loss, so lr = 1/curvature is
// exactly optimal and |1 - curvature * lr| > 1 diverges. Multipliers do not
// enter, which leaves ties to the lexicographic rule.
struct QuadraticOracle {
    double curvature = 80.0;
    std::size_t steps = 20;
    double w0 = 1.0;

    double optimal_lr() const { return 1.0 / curvature; }

    GridEval operator()(const GridConfig& c, std::uint64_t) const {
        const double initial = 0.5 * curvature * w0 * w0;
        double w = w0;
        for (std::size_t s = 0; s < steps; ++s) w -= c.lr * curvature * w;
        const double loss = 0.5 * curvature * w * w;
        return {loss, !std::isfinite(loss) || loss > initial};
    }
};

inline void write_grid_csv(std::ostream& os, const GridResult& res) {
    os << "config_id,lr,input_mult,output_mult,hidden_lr_mult,seed,final_loss,diverged\n";
    for (const auto& r : res.runs) {
        const GridConfig& c = res.configs[r.config_id];
        os << c.id << ',' << format_double(c.lr) << ',' << format_double(c.mult.input_mult) << ','
           << format_double(c.mult.output_mult) << ',' << format_double(c.mult.hidden_lr_mult) << ',' << r.seed << ','
           << format_double(r.final_loss) << ',' << format_bool(r.diverged) << '\n';
    }
}

}  // namespace mulo
