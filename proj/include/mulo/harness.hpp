#pragma once

// Evaluation harness: train an optimizee with a given optimizer over several
// seeds, log loss curves, summarize them (mean and standard error across
// seeds) and expand sweep specs into batches of evaluations.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "mulo/config.hpp"
#include "mulo/csv.hpp"
#include "mulo/grid_search.hpp"
#include "mulo/optimizee.hpp"
#include "mulo/optimizer_spec.hpp"
#include "mulo/parallel.hpp"

namespace mulo {

inline constexpr std::uint64_t kInitStream = 0x494E4954;   // "INIT"
inline constexpr std::uint64_t kBatchStream = 0x42415443;  // "BATC"
inline constexpr std::uint64_t kProbeStream = 0x50524F42;  // "PROB"

struct EvalTask {
    std::string id = "mlp";
    std::size_t width = 128;
    std::size_t depth = 3;
    std::size_t batch_size = 128;
    std::size_t steps = 1000;
    std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
    DatasetRef dataset{};
    std::size_t eval_batch_size = 512;  // 0: whole dataset
    std::uint64_t eval_batch_seed = 0;
    std::size_t log_interval = 0;       // 0: max(1, steps / 500)
    std::optional<std::uint64_t> init_seed;  // shared init across seeds when set
    double loss_cap_factor = 100.0;
};

inline std::size_t log_interval(const EvalTask& t) {
    return t.log_interval > 0 ? t.log_interval : std::max<std::size_t>(1, t.steps / 500);
}

inline EvalTask read_eval_task(const json& j, EvalTask t, const std::string& prefix) {
    read_field(j, "id", t.id, prefix);
    read_field(j, "width", t.width, prefix);
    read_field(j, "depth", t.depth, prefix);
    read_field(j, "batch_size", t.batch_size, prefix);
    read_field(j, "steps", t.steps, prefix);
    read_field(j, "seeds", t.seeds, prefix);
    read_field(j, "eval_batch_size", t.eval_batch_size, prefix);
    read_field(j, "eval_batch_seed", t.eval_batch_seed, prefix);
    read_field(j, "log_interval", t.log_interval, prefix);
    read_field(j, "loss_cap_factor", t.loss_cap_factor, prefix);
    if (j.contains("init_seed") && !j["init_seed"].is_null()) {
        std::uint64_t s = 0;
        read_field(j, "init_seed", s, prefix);
        t.init_seed = s;
    }
    if (j.contains("dataset")) t.dataset = read_dataset_ref(j["dataset"], t.dataset, detail::join_path(prefix, "dataset"));
    if (t.steps < 1) throw ConfigError(detail::join_path(prefix, "steps"), "must be >= 1");
    if (t.seeds.empty()) throw ConfigError(detail::join_path(prefix, "seeds"), "must be non-empty");
    if (t.depth < 2) throw ConfigError(detail::join_path(prefix, "depth"), "must be >= 2");
    if (t.width < 1) throw ConfigError(detail::join_path(prefix, "width"), "must be >= 1");
    if (t.batch_size < 1) throw ConfigError(detail::join_path(prefix, "batch_size"), "must be >= 1");
    return t;
}

inline MLPSpec mlp_for(const EvalTask& t, const Dataset& ds, const OptimizerSpec& opt) {
    MLPSpec s;
    s.input_dim = ds.input_dim;
    s.num_classes = ds.num_classes;
    s.width = t.width;
    s.depth = t.depth;
    s.mode = opt.mode;
    s.multipliers = opt.optimizee_multipliers();
    return s;
}

inline Batch eval_batch_for(const EvalTask& t, const Dataset& ds) {
    if (t.eval_batch_size == 0) {
        std::vector<std::size_t> all(ds.size());
        for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
        return gather_batch(ds, all);
    }
    RngStream rng(t.eval_batch_seed, kProbeStream);
    return sample_batch(ds, t.eval_batch_size, rng);
}

struct Curve {
    std::uint64_t seed = 0;
    std::vector<std::size_t> steps;
    std::vector<double> loss;
    std::vector<bool> diverged;
    std::vector<bool> ood;
};

struct CurveSet {
    std::string task_id;
    std::string optimizer;
    ParamMode mode = ParamMode::SP;
    std::size_t width = 0;
    std::size_t depth = 0;
    std::size_t meta_horizon = 0;
    std::vector<Curve> curves;
};

// Trains one seed. The logged loss is measured on a fixed evaluation batch
// shared by all seeds; diverged runs stop and log the cap from then on.
inline Curve run_seed(const EvalTask& task, const Dataset& ds, const Batch& eval_batch, const OptimizerSpec& opt,
                      std::uint64_t seed) {
    const MLPSpec spec = mlp_for(task, ds, opt);
    OptimizeeParams params = init_mlp(spec, RngStream(task.init_seed.value_or(seed), kInitStream));
    auto optimizer = opt.make();
    optimizer->reset(params);
    const RngStream batch_root(seed, kBatchStream);
    const std::size_t interval = log_interval(task);
    const std::size_t horizon = opt.meta_horizon();

    Curve c;
    c.seed = seed;
    const double initial = forward(params, eval_batch).loss;
    const double cap = task.loss_cap_factor * (std::isfinite(initial) && initial > 0.0 ? initial : 1.0);
    bool diverged = false;
    auto log = [&](std::size_t step) {
        double loss = cap;
        if (!diverged) {
            const ForwardRecord rec = forward(params, eval_batch);
            if (rec.diverged || rec.loss > cap) diverged = true;
            else loss = rec.loss;
        }
        c.steps.push_back(step);
        c.loss.push_back(loss);
        c.diverged.push_back(diverged);
        c.ood.push_back(horizon > 0 && step > horizon);
    };
    log(0);
    for (std::size_t s = 1; s <= task.steps; ++s) {
        if (!diverged) {
            RngStream br = rng_child(batch_root, s - 1);
            const Batch batch = sample_batch(ds, task.batch_size, br);
            const ForwardRecord rec = forward(params, batch);
            if (rec.diverged) {
                diverged = true;
            } else {
                const Grads g = backward(params, rec, batch);
                if (!optimizer->step(params, g)) diverged = true;
            }
        }
        if (s % interval == 0 || s == task.steps) log(s);
    }
    return c;
}

inline CurveSet run_eval(const EvalTask& task, const Dataset& ds, const OptimizerSpec& opt, unsigned threads = 1) {
    CurveSet cs{task.id, opt.name, opt.mode, task.width, task.depth, opt.meta_horizon(), {}};
    const Batch eval_batch = eval_batch_for(task, ds);
    cs.curves.resize(task.seeds.size());
    parallel_for(task.seeds.size(), threads,
                 [&](std::size_t i) { cs.curves[i] = run_seed(task, ds, eval_batch, opt, task.seeds[i]); });
    return cs;
}

struct CurveSummary {
    std::vector<std::size_t> steps;
    std::vector<double> mean;
    std::vector<double> se;  // sample std / sqrt(n); NaN for a single seed
    std::size_t diverged_seeds = 0;

    double final_mean() const { return mean.empty() ? 0.0 : mean.back(); }
};

inline double standard_error(std::span<const double> xs) {
    const std::size_t n = xs.size();
    if (n < 2) return std::numeric_limits<double>::quiet_NaN();
    const double m = mean(xs);
    double ss = 0.0;
    for (double x : xs) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(n - 1)) / std::sqrt(static_cast<double>(n));
}

inline CurveSummary summarize(const CurveSet& cs) {
    CurveSummary s;
    if (cs.curves.empty()) return s;
    s.steps = cs.curves.front().steps;
    std::vector<double> col(cs.curves.size());
    for (std::size_t k = 0; k < s.steps.size(); ++k) {
        for (std::size_t i = 0; i < cs.curves.size(); ++i) col[i] = cs.curves[i].loss.at(k);
        s.mean.push_back(mean(col));
        s.se.push_back(standard_error(col));
    }
    for (const auto& c : cs.curves) {
        if (!c.diverged.empty() && c.diverged.back()) ++s.diverged_seeds;
    }
    return s;
}

inline void write_curve_header(std::ostream& os) {
    os << "task_id,optimizer,param_mode,width,depth,seed,step,loss,diverged,ood\n";
}

inline void write_curves(std::ostream& os, const CurveSet& cs) {
    for (const auto& c : cs.curves) {
        for (std::size_t k = 0; k < c.steps.size(); ++k) {
            os << cs.task_id << ',' << cs.optimizer << ',' << to_string(cs.mode) << ',' << cs.width << ',' << cs.depth
               << ',' << c.seed << ',' << c.steps[k] << ',' << format_double(c.loss[k]) << ','
               << format_bool(c.diverged[k]) << ',' << format_bool(c.ood[k]) << '\n';
        }
    }
}

inline void emit_csv(std::ostream& os, std::span<const CurveSet> sets) {
    write_curve_header(os);
    for (const auto& cs : sets) write_curves(os, cs);
}

// Cross product of widths x depths x step budgets x optimizers over a base task.
struct SweepSpec {
    EvalTask base{};
    std::vector<std::size_t> widths;
    std::vector<std::size_t> depths;
    std::vector<std::size_t> steps;
    std::vector<OptimizerSpec> optimizers;
};

inline SweepSpec read_sweep_spec(const json& j) {
    SweepSpec s;
    s.base = read_eval_task(j.value("task", json::object()), s.base, "task");
    s.widths = {s.base.width};
    s.depths = {s.base.depth};
    s.steps = {s.base.steps};
    read_field(j, "widths", s.widths, "");
    read_field(j, "depths", s.depths, "");
    read_field(j, "steps", s.steps, "");
    if (s.widths.empty()) throw ConfigError("widths", "must be non-empty");
    if (s.depths.empty()) throw ConfigError("depths", "must be non-empty");
    if (s.steps.empty()) throw ConfigError("steps", "must be non-empty");
    for (auto d : s.depths) if (d < 2) throw ConfigError("depths", "every depth must be >= 2");
    for (auto w : s.widths) if (w < 1) throw ConfigError("widths", "every width must be >= 1");
    for (auto n : s.steps) if (n < 1) throw ConfigError("steps", "every step budget must be >= 1");
    if (!j.contains("optimizers") || !j["optimizers"].is_array() || j["optimizers"].empty()) {
        throw ConfigError("optimizers", "must be a non-empty array");
    }
    for (std::size_t i = 0; i < j["optimizers"].size(); ++i) {
        s.optimizers.push_back(read_optimizer_spec(j["optimizers"][i], "optimizers[" + std::to_string(i) + "]"));
    }
    return s;
}

inline std::vector<EvalTask> expand_tasks(const SweepSpec& s) {
    std::vector<EvalTask> out;
    for (auto d : s.depths) {
        for (auto w : s.widths) {
            for (auto n : s.steps) {
                EvalTask t = s.base;
                t.width = w;
                t.depth = d;
                t.steps = n;
                t.id = s.base.id + "_w" + std::to_string(w) + "_d" + std::to_string(d) + "_s" + std::to_string(n);
                out.push_back(std::move(t));
            }
        }
    }
    return out;
}

// Every (task, optimizer, seed) cell runs as an independent job; results are
// gathered in (task, optimizer, seed) order.
inline std::vector<CurveSet> run_sweep(const SweepSpec& spec, unsigned threads = 1) {
    const Dataset ds = spec.base.dataset.load();
    const auto tasks = expand_tasks(spec);
    std::vector<CurveSet> sets;
    std::vector<Batch> eval_batches;
    for (const auto& t : tasks) {
        eval_batches.push_back(eval_batch_for(t, ds));
        for (const auto& o : spec.optimizers) {
            CurveSet cs{t.id, o.name, o.mode, t.width, t.depth, o.meta_horizon(), {}};
            cs.curves.resize(t.seeds.size());
            sets.push_back(std::move(cs));
        }
    }
    const std::size_t nopt = spec.optimizers.size();
    const std::size_t nseed = spec.base.seeds.size();
    parallel_for(tasks.size() * nopt * nseed, threads, [&](std::size_t k) {
        const std::size_t ti = k / (nopt * nseed), oi = (k / nseed) % nopt, si = k % nseed;
        sets[ti * nopt + oi].curves[si] = run_seed(tasks[ti], ds, eval_batches[ti], spec.optimizers[oi], tasks[ti].seeds[si]);
    });
    return sets;
}

// Grid-search evaluator on an MLP task: muAdam (or Adam) with the config's lr
// and multipliers, scored by the final evaluation loss.
inline auto mlp_grid_evaluator(const EvalTask& task, const Dataset& ds, ParamMode mode) {
    EvalTask t = task;
    t.log_interval = t.steps;
    auto eval_batch = std::make_shared<const Batch>(eval_batch_for(t, ds));
    return [t, &ds, mode, eval_batch](const GridConfig& c, std::uint64_t seed) {
        AdamHyper hp;
        hp.lr = c.lr;
        hp.multipliers = c.mult;
        const OptimizerSpec opt = adam_spec("adam", hp, mode);
        const Curve curve = run_seed(t, ds, *eval_batch, opt, seed);
        return GridEval{curve.loss.back(), curve.diverged.back()};
    };
}

}  // namespace mulo
