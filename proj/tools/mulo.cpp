// mulo: command-line entry point for meta-training, evaluation, sweeps,
// coordinate checks, Adam tuning and dataset/checkpoint utilities.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mulo/mulo.hpp"

namespace fs = std::filesystem;
using namespace mulo;

namespace {

struct CommonOptions {
    std::string config;
    std::optional<std::uint64_t> seed;
    int threads = 0;
    std::string out_dir = "out";
};

void add_common(CLI::App* cmd, CommonOptions& o, bool config_required = true) {
    auto* c = cmd->add_option("--config", o.config, "JSON run config");
    if (config_required) c->required();
    cmd->add_option("--seed", o.seed, "override the config seed");
    cmd->add_option("--threads", o.threads, "worker threads (default: MULO_THREADS, else 1)");
    cmd->add_option("--out-dir", o.out_dir, "output directory")->capture_default_str();
}

// Relative "path" and "checkpoint" entries are taken relative to the config file.
void resolve_paths(json& j, const fs::path& base) {
    if (j.is_object()) {
        for (auto& [k, v] : j.items()) {
            if ((k == "path" || k == "checkpoint") && v.is_string()) {
                const fs::path p = v.get<std::string>();
                if (p.is_relative()) v = (base / p).lexically_normal().string();
            } else {
                resolve_paths(v, base);
            }
        }
    } else if (j.is_array()) {
        for (auto& v : j) resolve_paths(v, base);
    }
}

json load_config(const std::string& path) {
    json j = load_json_file(path);
    resolve_paths(j, fs::path(path).parent_path());
    return j;
}

std::ofstream open_out(const fs::path& p) {
    std::ofstream os(p, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + p.string());
    return os;
}

// --seed S turns a seed list of length n into S, S+1, ..., S+n-1.
void override_seeds(std::vector<std::uint64_t>& seeds, const std::optional<std::uint64_t>& s) {
    if (!s) return;
    for (std::size_t i = 0; i < seeds.size(); ++i) seeds[i] = *s + i;
}

void write_summary(std::ostream& os, std::span<const CurveSet> sets) {
    os << "task_id,optimizer,param_mode,width,depth,step,mean,se,num_seeds,diverged_seeds\n";
    for (const auto& cs : sets) {
        const CurveSummary s = summarize(cs);
        for (std::size_t k = 0; k < s.steps.size(); ++k) {
            os << cs.task_id << ',' << cs.optimizer << ',' << to_string(cs.mode) << ',' << cs.width << ',' << cs.depth
               << ',' << s.steps[k] << ',' << format_double(s.mean[k]) << ',' << format_double(s.se[k]) << ','
               << cs.curves.size() << ',' << s.diverged_seeds << '\n';
        }
    }
}

void report_curves(std::span<const CurveSet> sets) {
    for (const auto& cs : sets) {
        const CurveSummary s = summarize(cs);
        std::fprintf(stderr, "%-28s %-12s final mean %.6g  se %.3g  diverged %zu/%zu\n", cs.task_id.c_str(),
                     cs.optimizer.c_str(), s.final_mean(), s.se.empty() ? 0.0 : s.se.back(), s.diverged_seeds,
                     cs.curves.size());
    }
}

void write_curve_outputs(const fs::path& dir, std::span<const CurveSet> sets) {
    auto curves = open_out(dir / "curves.csv");
    emit_csv(curves, sets);
    auto summary = open_out(dir / "summary.csv");
    write_summary(summary, sets);
    report_curves(sets);
}

// Rewrites the meta log so it holds exactly the rows before `step`.
void truncate_meta_log(const fs::path& path, std::size_t step) {
    std::vector<std::string> keep;
    std::ifstream in(path);
    std::string line;
    if (in && std::getline(in, line)) {
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            if (std::stoull(line.substr(0, line.find(','))) >= step) break;
            keep.push_back(line);
        }
    }
    if (keep.size() != step) throw std::runtime_error("meta log " + path.string() + " does not cover the resumed step");
    auto out = open_out(path);
    write_meta_log_header(out);
    for (const auto& l : keep) out << l << '\n';
}

int cmd_meta_train(const CommonOptions& o, const std::string& resume, std::optional<std::size_t> total,
                   std::optional<std::size_t> stop_at) {
    MetaTrainConfig cfg = read_meta_train_config(load_config(o.config));
    if (o.seed) cfg.seed = *o.seed;
    if (total) cfg.schedule.total_steps = *total;
    const unsigned threads = resolve_threads(o.threads);
    const fs::path dir = o.out_dir;
    fs::create_directories(dir);
    {
        auto resolved = open_out(dir / "config.json");
        resolved << to_json(cfg).dump(2) << '\n';
    }

    MetaTrainer trainer(cfg);
    const fs::path log_path = dir / "meta_log.csv";
    if (!resume.empty()) {
        trainer.load_state(resume);
        truncate_meta_log(log_path, trainer.outer_step());
    } else {
        auto log = open_out(log_path);
        write_meta_log_header(log);
    }
    std::ofstream log(log_path, std::ios::app | std::ios::binary);
    const std::size_t total_steps = cfg.schedule.total_steps;
    const std::size_t report = std::max<std::size_t>(1, total_steps / 20);
    while (!trainer.done()) {
        if (stop_at && trainer.outer_step() >= *stop_at) {
            trainer.save_state(dir / "state.bin");
            std::fprintf(stderr, "stopped at outer step %zu; resume with --resume %s\n", trainer.outer_step(),
                         (dir / "state.bin").string().c_str());
            return 0;
        }
        const auto t0 = std::chrono::steady_clock::now();
        MetaLogRow row = trainer.step(threads);
        if (cfg.record_wall_time) {
            row.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        }
        write_meta_log_row(log, row);
        log.flush();
        const std::size_t done = trainer.outer_step();
        if (done % report == 0 || done == total_steps) {
            std::fprintf(stderr, "outer %zu/%zu  lr %.3g  loss %.5g  |g| %.3g  diverged %zu\n", done, total_steps,
                         row.lr, row.mean_inner_loss, row.grad_norm, row.diverged_pairs);
        }
        if (cfg.checkpoint_every > 0 && done % cfg.checkpoint_every == 0 && done < total_steps) {
            save_checkpoint(dir / ("phi_step" + std::to_string(done) + ".mulo"), trainer.checkpoint());
            trainer.save_state(dir / "state.bin");
        }
    }
    save_checkpoint(dir / "phi.mulo", trainer.checkpoint());
    trainer.save_state(dir / "state.bin");
    std::fprintf(stderr, "wrote %s\n", (dir / "phi.mulo").string().c_str());
    return 0;
}

struct EvalConfig {
    EvalTask task;
    std::vector<OptimizerSpec> optimizers;
};

EvalConfig read_eval_config(const json& j) {
    EvalConfig c;
    c.task = read_eval_task(j.value("task", json::object()), c.task, "task");
    if (!j.contains("optimizers") || !j["optimizers"].is_array() || j["optimizers"].empty()) {
        throw ConfigError("optimizers", "must be a non-empty array");
    }
    for (std::size_t i = 0; i < j["optimizers"].size(); ++i) {
        c.optimizers.push_back(read_optimizer_spec(j["optimizers"][i], "optimizers[" + std::to_string(i) + "]"));
    }
    return c;
}

int cmd_evaluate(const CommonOptions& o) {
    EvalConfig cfg = read_eval_config(load_config(o.config));
    override_seeds(cfg.task.seeds, o.seed);
    const unsigned threads = resolve_threads(o.threads);
    const Dataset ds = cfg.task.dataset.load();
    std::vector<CurveSet> sets;
    for (const auto& opt : cfg.optimizers) sets.push_back(run_eval(cfg.task, ds, opt, threads));
    fs::create_directories(o.out_dir);
    write_curve_outputs(o.out_dir, sets);
    return 0;
}

int cmd_sweep(const CommonOptions& o) {
    SweepSpec spec = read_sweep_spec(load_config(o.config));
    override_seeds(spec.base.seeds, o.seed);
    const auto sets = run_sweep(spec, resolve_threads(o.threads));
    fs::create_directories(o.out_dir);
    write_curve_outputs(o.out_dir, sets);
    return 0;
}

int cmd_coordcheck(const CommonOptions& o) {
    const json j = load_config(o.config);
    CoordCheckConfig cfg = read_coordcheck_config(j.value("coordcheck", json::object()));
    override_seeds(cfg.seeds, o.seed);
    DatasetRef dref;
    dref.synthetic = {.n = 4096, .input_dim = 64, .num_classes = 10};
    if (j.contains("dataset")) dref = read_dataset_ref(j["dataset"], dref, "dataset");
    if (!j.contains("optimizers") || !j["optimizers"].is_array() || j["optimizers"].empty()) {
        throw ConfigError("optimizers", "must be a non-empty array");
    }
    const Dataset ds = dref.load();
    const unsigned threads = resolve_threads(o.threads);
    fs::create_directories(o.out_dir);
    auto csv = open_out(fs::path(o.out_dir) / "coordcheck.csv");
    auto ratios = open_out(fs::path(o.out_dir) / "ratios.csv");
    write_coordcheck_header(csv);
    ratios << "optimizer,param_mode,layer,ratio\n";
    for (std::size_t i = 0; i < j["optimizers"].size(); ++i) {
        const OptimizerSpec opt = read_optimizer_spec(j["optimizers"][i], "optimizers[" + std::to_string(i) + "]");
        const auto recs = run_coordcheck(cfg, opt, ds, threads);
        write_coordcheck(csv, recs);
        const auto r = width_ratios(recs);
        for (std::size_t l = 0; l < r.size(); ++l) {
            ratios << opt.name << ',' << to_string(opt.mode) << ',' << l << ',' << format_double(r[l]) << '\n';
            std::fprintf(stderr, "%-12s layer %zu  widest/narrowest max std ratio %.4g\n", opt.name.c_str(), l, r[l]);
        }
    }
    return 0;
}

int cmd_tune_adam(const CommonOptions& o) {
    const json j = load_config(o.config);
    AdamGrid grid;
    if (j.contains("grid")) {
        const json& g = j["grid"];
        read_field(g, "lrs", grid.lrs, "grid");
        read_field(g, "input_mults", grid.input_mults, "grid");
        read_field(g, "output_mults", grid.output_mults, "grid");
        read_field(g, "hidden_lr_mults", grid.hidden_lr_mults, "grid");
    }
    const auto configs = grid.expand();
    if (configs.empty()) throw ConfigError("grid", "every axis must be non-empty");
    const ParamMode mode = read_mode(j, "param_mode", ParamMode::MuP, "");
    double loss_cap = 1e6;
    read_field(j, "loss_cap", loss_cap, "");
    const unsigned threads = resolve_threads(o.threads);

    GridResult res;
    std::vector<std::uint64_t> seeds;
    if (j.contains("oracle")) {
        QuadraticOracle q;
        const json& oj = j["oracle"];
        const auto type = require_field<std::string>(oj, "type", "oracle");
        if (type != "quadratic") throw ConfigError("oracle.type", "expected quadratic");
        read_field(oj, "curvature", q.curvature, "oracle");
        read_field(oj, "steps", q.steps, "oracle");
        read_field(oj, "w0", q.w0, "oracle");
        seeds = {0};
        read_field(j, "seeds", seeds, "");
        override_seeds(seeds, o.seed);
        res = grid_search(configs, seeds, q, loss_cap, threads);
    } else {
        const EvalTask task = read_eval_task(j.value("task", json::object()), EvalTask{}, "task");
        seeds = task.seeds;
        read_field(j, "seeds", seeds, "");
        override_seeds(seeds, o.seed);
        const Dataset ds = task.dataset.load();
        res = grid_search(configs, seeds, mlp_grid_evaluator(task, ds, mode), loss_cap, threads);
    }
    if (seeds.empty()) throw ConfigError("seeds", "must be non-empty");

    fs::create_directories(o.out_dir);
    auto csv = open_out(fs::path(o.out_dir) / "grid.csv");
    write_grid_csv(csv, res);
    const GridOutcome& best = res.ranked.front();
    const json best_json = {{"name", std::string(to_string(mode)) == "mup" ? "muAdam" : "adam"},
                            {"type", "adam"},
                            {"param_mode", std::string(to_string(mode))},
                            {"lr", best.config.lr},
                            {"input_mult", best.config.mult.input_mult},
                            {"output_mult", best.config.mult.output_mult},
                            {"hidden_lr_mult", best.config.mult.hidden_lr_mult},
                            {"mean_final_loss", best.mean_loss},
                            {"diverged_seeds", best.diverged_seeds},
                            {"num_configs", configs.size()}};
    auto out = open_out(fs::path(o.out_dir) / "best.json");
    out << best_json.dump(2) << '\n';
    std::fprintf(stderr, "%zu configs x %zu seeds; best lr %g input %g output %g hidden-lr %g (mean loss %.6g)\n",
                 configs.size(), seeds.size(), best.config.lr, best.config.mult.input_mult,
                 best.config.mult.output_mult, best.config.mult.hidden_lr_mult, best.mean_loss);
    return 0;
}

int cmd_make_dataset(const CommonOptions& o, SyntheticSpec spec, const std::string& out_path) {
    if (!o.config.empty()) {
        const json j = load_config(o.config);
        spec = read_synthetic(j.value("synthetic", j), spec, "synthetic");
    }
    if (o.seed) spec.seed = *o.seed;
    const Dataset ds = make_synthetic(spec);
    fs::path path = out_path.empty() ? fs::path(o.out_dir) / "dataset.bin" : fs::path(out_path);
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    save_dataset(ds, path);
    std::fprintf(stderr, "wrote %s: %zu examples, input_dim %zu, %zu classes\n", path.string().c_str(), ds.size(),
                 ds.input_dim, ds.num_classes);
    return 0;
}

int cmd_inspect(const std::string& path) {
    const Checkpoint ck = load_checkpoint(path);
    const LOWeights phi = ck.weights();
    double sq = 0.0;
    for (double v : ck.flat) sq += v * v;
    json betas = json::array();
    for (double z : phi.beta_logits) betas.push_back(sigmoid(z));
    const json info = {{"path", path},
                       {"version", kCheckpointVersion},
                       {"length", ck.flat.size()},
                       {"phi_l2_norm", std::sqrt(sq)},
                       {"betas", betas},
                       {"meta", to_json(ck.meta)}};
    std::cout << info.dump(2) << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"mu-parametrized learned optimizers: meta-training and evaluation"};
    app.require_subcommand(1);

    CommonOptions meta_o, eval_o, sweep_o, cc_o, tune_o, data_o;
    std::string resume;
    std::optional<std::size_t> total_steps, stop_at;
    auto* meta = app.add_subcommand("meta-train", "meta-train a learned optimizer with PES");
    add_common(meta, meta_o);
    meta->add_option("--resume", resume, "resume from a state.bin written by an earlier run");
    meta->add_option("--total-steps", total_steps, "override schedule.total_steps");
    meta->add_option("--stop-at", stop_at, "stop after this many outer steps, leaving a resumable state.bin");

    auto* eval = app.add_subcommand("evaluate", "train optimizees with fixed optimizers and log loss curves");
    add_common(eval, eval_o);
    auto* sweep = app.add_subcommand("sweep", "run a width x depth x steps x optimizer sweep");
    add_common(sweep, sweep_o);
    auto* cc = app.add_subcommand("coordcheck", "per-layer pre-activation change across widths");
    add_common(cc, cc_o);
    auto* tune = app.add_subcommand("tune-adam", "grid search over lr and muP multipliers");
    add_common(tune, tune_o);

    SyntheticSpec synth;
    std::string data_out;
    auto* data = app.add_subcommand("make-dataset", "write a synthetic Gaussian-mixture dataset");
    add_common(data, data_o, false);
    data->add_option("--n", synth.n, "examples")->capture_default_str();
    data->add_option("--input-dim", synth.input_dim, "feature dimension")->capture_default_str();
    data->add_option("--classes", synth.num_classes, "number of classes")->capture_default_str();
    data->add_option("--noise-std", synth.noise_std, "per-coordinate noise")->capture_default_str();
    data->add_option("--out", data_out, "output path (default <out-dir>/dataset.bin)");

    std::string ck_path;
    auto* inspect = app.add_subcommand("inspect-checkpoint", "print a checkpoint's metadata as JSON");
    inspect->add_option("checkpoint", ck_path, "path to a .mulo file")->required();

    CLI11_PARSE(app, argc, argv);
    try {
        if (*meta) return cmd_meta_train(meta_o, resume, total_steps, stop_at);
        if (*eval) return cmd_evaluate(eval_o);
        if (*sweep) return cmd_sweep(sweep_o);
        if (*cc) return cmd_coordcheck(cc_o);
        if (*tune) return cmd_tune_adam(tune_o);
        if (*data) return cmd_make_dataset(data_o, synth, data_out);
        if (*inspect) return cmd_inspect(ck_path);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
