#pragma once

// Coordinate check: std over (batch x coordinate) of h_t - h_0 per layer, where
// h is the pre-activation (logits for the last layer) on a probe batch that is
// drawn once per seed and held fixed while the network trains.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <ostream>
#include <vector>

#include "mulo/harness.hpp"

namespace mulo {

struct CoordCheckConfig {
    std::vector<std::size_t> widths{64, 256, 1024};
    std::size_t depth = 3;
    std::size_t steps = 500;
    std::size_t log_every = 10;
    std::size_t probe_batch = 256;
    std::size_t batch_size = 128;
    std::vector<std::uint64_t> seeds{0, 1, 2};
    double std_cap = 1e6;  // recorded once a run diverges
};

inline void validate(const CoordCheckConfig& c) {
    if (c.widths.empty()) throw ConfigError("widths", "must be non-empty");
    if (c.seeds.empty()) throw ConfigError("seeds", "must be non-empty");
    if (c.depth < 2) throw ConfigError("depth", "must be >= 2");
    if (c.steps < 1) throw ConfigError("steps", "must be >= 1");
    if (c.log_every < 1) throw ConfigError("log_every", "must be >= 1");
    if (c.probe_batch < 1) throw ConfigError("probe_batch", "must be >= 1");
    if (c.batch_size < 1) throw ConfigError("batch_size", "must be >= 1");
}

inline CoordCheckConfig read_coordcheck_config(const json& j, CoordCheckConfig c = {}) {
    read_field(j, "widths", c.widths, "");
    read_field(j, "depth", c.depth, "");
    read_field(j, "steps", c.steps, "");
    read_field(j, "log_every", c.log_every, "");
    read_field(j, "probe_batch", c.probe_batch, "");
    read_field(j, "batch_size", c.batch_size, "");
    read_field(j, "seeds", c.seeds, "");
    read_field(j, "std_cap", c.std_cap, "");
    validate(c);
    return c;
}

struct CoordCheckRecord {
    std::string optimizer;
    ParamMode mode = ParamMode::SP;
    std::size_t width = 0;
    std::uint64_t seed = 0;
    std::size_t layer = 0;
    std::size_t step = 0;
    double std = 0.0;
    bool diverged = false;
};

inline double delta_std(const Tensor& h, const Tensor& h0) {
    detail::require_same_shape(h, h0, "delta_std");
    const std::size_t n = h.size();
    double m = 0.0;
    for (std::size_t i = 0; i < n; ++i) m += h[i] - h0[i];
    m /= static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = h[i] - h0[i] - m;
        ss += d * d;
    }
    return std::sqrt(ss / static_cast<double>(n));
}

inline std::vector<CoordCheckRecord> coordcheck_cell(const CoordCheckConfig& cfg, const OptimizerSpec& opt,
                                                     const Dataset& ds, std::size_t width, std::uint64_t seed) {
    MLPSpec spec;
    spec.input_dim = ds.input_dim;
    spec.num_classes = ds.num_classes;
    spec.width = width;
    spec.depth = cfg.depth;
    spec.mode = opt.mode;
    spec.multipliers = opt.optimizee_multipliers();
    OptimizeeParams params = init_mlp(spec, RngStream(seed, kInitStream));
    auto optimizer = opt.make();
    optimizer->reset(params);

    RngStream probe_rng(seed, kProbeStream);
    const Batch probe = sample_batch(ds, cfg.probe_batch, probe_rng);
    const std::vector<Tensor> h0 = forward(params, probe).preact;
    const RngStream batch_root(seed, kBatchStream);

    std::vector<CoordCheckRecord> out;
    bool diverged = false;
    auto log = [&](std::size_t step) {
        std::vector<Tensor> h;
        if (!diverged) {
            const ForwardRecord rec = forward(params, probe);
            if (rec.diverged) diverged = true;
            else h = rec.preact;
        }
        for (std::size_t l = 0; l < cfg.depth; ++l) {
            double s = cfg.std_cap;
            if (!diverged) {
                s = delta_std(h[l], h0[l]);
                if (!std::isfinite(s)) s = cfg.std_cap;
            }
            out.push_back({opt.name, opt.mode, width, seed, l, step, std::min(s, cfg.std_cap), diverged});
        }
    };
    log(0);
    for (std::size_t s = 1; s <= cfg.steps; ++s) {
        if (!diverged) {
            RngStream br = rng_child(batch_root, s - 1);
            const Batch batch = sample_batch(ds, cfg.batch_size, br);
            const ForwardRecord rec = forward(params, batch);
            if (rec.diverged) diverged = true;
            else if (!optimizer->step(params, backward(params, rec, batch))) diverged = true;
        }
        if (s % cfg.log_every == 0 || s == cfg.steps) log(s);
    }
    return out;
}

// Width x seed cells run in parallel; output is ordered by (width, seed, step, layer).
inline std::vector<CoordCheckRecord> run_coordcheck(const CoordCheckConfig& cfg, const OptimizerSpec& opt,
                                                    const Dataset& ds, unsigned threads = 1) {
    validate(cfg);
    const std::size_t ns = cfg.seeds.size();
    std::vector<std::vector<CoordCheckRecord>> cells(cfg.widths.size() * ns);
    parallel_for(cells.size(), threads, [&](std::size_t k) {
        cells[k] = coordcheck_cell(cfg, opt, ds, cfg.widths[k / ns], cfg.seeds[k % ns]);
    });
    std::vector<CoordCheckRecord> out;
    for (auto& c : cells) out.insert(out.end(), c.begin(), c.end());
    return out;
}

inline void write_coordcheck_header(std::ostream& os) { os << "optimizer,param_mode,width,seed,layer,step,std,diverged\n"; }

inline void write_coordcheck(std::ostream& os, std::span<const CoordCheckRecord> recs) {
    for (const auto& r : recs) {
        os << r.optimizer << ',' << to_string(r.mode) << ',' << r.width << ',' << r.seed << ',' << r.layer << ','
           << r.step << ',' << format_double(r.std) << ',' << format_bool(r.diverged) << '\n';
    }
}

// max over t of the seed-mean std, per (width, layer).
inline std::map<std::pair<std::size_t, std::size_t>, double> max_std_by_width_layer(
    std::span<const CoordCheckRecord> recs) {
    std::map<std::tuple<std::size_t, std::size_t, std::size_t>, std::pair<double, std::size_t>> acc;
    for (const auto& r : recs) {
        auto& a = acc[{r.width, r.layer, r.step}];
        a.first += r.std;
        ++a.second;
    }
    std::map<std::pair<std::size_t, std::size_t>, double> out;
    for (const auto& [k, a] : acc) {
        const auto key = std::pair(std::get<0>(k), std::get<1>(k));
        const double m = a.first / static_cast<double>(a.second);
        auto it = out.find(key);
        if (it == out.end()) out[key] = m;
        else it->second = std::max(it->second, m);
    }
    return out;
}

// Per layer: max-over-t std at the widest width divided by that at the narrowest.
inline std::vector<double> width_ratios(std::span<const CoordCheckRecord> recs) {
    const auto mx = max_std_by_width_layer(recs);
    if (mx.empty()) return {};
    std::size_t wmin = mx.begin()->first.first, wmax = wmin, layers = 0;
    for (const auto& [k, v] : mx) {
        wmin = std::min(wmin, k.first);
        wmax = std::max(wmax, k.first);
        layers = std::max(layers, k.second + 1);
    }
    std::vector<double> ratios(layers);
    for (std::size_t l = 0; l < layers; ++l) ratios[l] = mx.at({wmax, l}) / mx.at({wmin, l});
    return ratios;
}

}  // namespace mulo
