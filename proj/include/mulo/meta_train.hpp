#pragma once

// Meta-training of phi: the learned-optimizer inner problem exposed to the
// PES estimator, and the outer loop that feeds PES estimates to AdamW.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "mulo/checkpoint.hpp"
#include "mulo/csv.hpp"
#include "mulo/config.hpp"
#include "mulo/optimizee.hpp"
#include "mulo/optimizers.hpp"
#include "mulo/pes.hpp"

namespace mulo {

// One meta-training task: an MLP geometry, its data and the batch size.
struct TaskSpec {
    std::string id = "task";
    std::size_t width = 128;
    std::size_t depth = 3;
    std::size_t batch_size = 32;
    DatasetRef dataset{};
};

inline TaskSpec read_task_spec(const json& j, const std::string& prefix) {
    TaskSpec t;
    read_field(j, "id", t.id, prefix);
    read_field(j, "width", t.width, prefix);
    read_field(j, "depth", t.depth, prefix);
    read_field(j, "batch_size", t.batch_size, prefix);
    if (j.contains("dataset")) t.dataset = read_dataset_ref(j["dataset"], t.dataset, detail::join_path(prefix, "dataset"));
    if (t.depth < 2) throw ConfigError(detail::join_path(prefix, "depth"), "must be >= 2");
    if (t.width < 1) throw ConfigError(detail::join_path(prefix, "width"), "must be >= 1");
    if (t.batch_size < 1) throw ConfigError(detail::join_path(prefix, "batch_size"), "must be >= 1");
    return t;
}

inline json to_json(const TaskSpec& t) {
    return {{"id", t.id}, {"width", t.width}, {"depth", t.depth}, {"batch_size", t.batch_size},
            {"dataset", to_json(t.dataset)}};
}

struct InnerTask {
    MLPSpec mlp;
    std::shared_ptr<const Dataset> data;
    std::size_t batch_size = 32;
};

inline MLPSpec mlp_for(const TaskSpec& t, const Dataset& ds, ParamMode mode, MultiplierSet mult = {}) {
    MLPSpec s;
    s.input_dim = ds.input_dim;
    s.num_classes = ds.num_classes;
    s.width = t.width;
    s.depth = t.depth;
    s.mode = mode;
    s.multipliers = mult;
    return s;
}

// Inner problem for PES: each state is an optimizee trained by phi. Batches
// are keyed by (episode stream, step) so both members of a pair see the same
// data.
class LOInnerTask {
public:
    struct State {
        OptimizeeParams params;
        FeatureState features;
        std::size_t step = 0;
        std::size_t task = 0;
        RngStream batch_rng;
        double initial_loss = std::numeric_limits<double>::quiet_NaN();
    };

    LOInnerTask(std::vector<InnerTask> tasks, LOConfig lo, ParamMode mode, double loss_cap_factor, RngStream rng)
        : tasks_(std::move(tasks)), lo_(lo), mode_(mode), cap_factor_(loss_cap_factor), rng_(rng) {
        if (tasks_.empty()) throw std::invalid_argument("task set must be non-empty");
    }

    const std::vector<InnerTask>& tasks() const noexcept { return tasks_; }
    ParamMode mode() const noexcept { return mode_; }
    const LOConfig& lo_config() const noexcept { return lo_; }

    State blank_state(std::size_t task) const {
        State s;
        s.task = task;
        s.params = init_mlp(tasks_[task].mlp, RngStream{});
        s.features = init_state(s.params);
        return s;
    }

    State fresh_state(std::size_t pair, std::uint64_t episode) const {
        RngStream ep = rng_child(rng_, pair, episode);
        RngStream pick = rng_child(ep, 0);
        State s;
        s.task = static_cast<std::size_t>(pick.below(tasks_.size()));
        s.params = init_mlp(tasks_[s.task].mlp, rng_child(ep, 1));
        s.features = init_state(s.params);
        s.batch_rng = rng_child(ep, 2);
        return s;
    }

    std::size_t steps_done(const State& s) const { return s.step; }

    UnrollResult unroll(std::span<const double> theta, State& s, std::size_t steps) const {
        const LOWeights phi = unflatten(theta);
        const InnerTask& task = tasks_[s.task];
        UnrollResult res;
        double sum = 0.0;
        std::size_t taken = 0;
        for (std::size_t k = 0; k < steps; ++k) {
            RngStream br = rng_child(s.batch_rng, s.step);
            const Batch batch = sample_batch(*task.data, task.batch_size, br);
            const ForwardRecord rec = forward(s.params, batch);
            if (s.step == 0) s.initial_loss = rec.loss;
            const double ref = reference(s);
            ++s.step;
            if (rec.diverged || rec.loss > cap_factor_ * ref) {
                res.diverged = true;
                break;
            }
            sum += rec.loss;
            ++taken;
            const Grads g = backward(s.params, rec, batch);
            if (!lo_step(phi, lo_, mode_, s.features, s.params, g)) {
                res.diverged = true;
                break;
            }
        }
        res.reference_loss = reference(s);
        res.mean_loss = taken == 0 ? std::numeric_limits<double>::quiet_NaN() : sum / static_cast<double>(taken);
        return res;
    }

private:
    static double reference(const State& s) {
        return std::isfinite(s.initial_loss) && s.initial_loss > 0.0 ? s.initial_loss : 1.0;
    }

    std::vector<InnerTask> tasks_;
    LOConfig lo_;
    ParamMode mode_;
    double cap_factor_;
    RngStream rng_;
};

static_assert(PesTask<LOInnerTask>);

enum class TruncationSchedule { Fixed, Linear };

struct MetaTrainConfig {
    std::vector<TaskSpec> tasks{TaskSpec{}};
    PESConfig pes{};
    OuterSchedule schedule{};
    LOConfig lo{};
    ParamMode mode = ParamMode::MuP;
    std::uint64_t seed = 0;
    double lo_init_std = 0.01;
    std::size_t checkpoint_every = 0;  // 0: final checkpoint only
    TruncationSchedule truncation_schedule = TruncationSchedule::Fixed;
    std::size_t min_truncation = 1;  // start of the linear schedule
    bool record_wall_time = false;
};

inline MetaTrainConfig read_meta_train_config(const json& j) {
    MetaTrainConfig c;
    if (j.contains("tasks")) {
        const json& ts = j["tasks"];
        if (!ts.is_array() || ts.empty()) throw ConfigError("tasks", "must be a non-empty array");
        c.tasks.clear();
        for (std::size_t i = 0; i < ts.size(); ++i) c.tasks.push_back(read_task_spec(ts[i], "tasks[" + std::to_string(i) + "]"));
    }
    if (j.contains("pes")) c.pes = read_pes_config(j["pes"], c.pes, "pes");
    if (j.contains("schedule")) c.schedule = read_schedule(j["schedule"], c.schedule, "schedule");
    if (j.contains("lo")) c.lo = read_lo_config(j["lo"], c.lo, "lo");
    c.mode = read_mode(j, "param_mode", c.mode, "");
    read_field(j, "seed", c.seed, "");
    read_field(j, "lo_init_std", c.lo_init_std, "");
    read_field(j, "checkpoint_every", c.checkpoint_every, "");
    read_field(j, "min_truncation", c.min_truncation, "");
    read_field(j, "record_wall_time", c.record_wall_time, "");
    std::string sched = "fixed";
    read_field(j, "truncation_schedule", sched, "");
    if (sched == "fixed") c.truncation_schedule = TruncationSchedule::Fixed;
    else if (sched == "linear") c.truncation_schedule = TruncationSchedule::Linear;
    else throw ConfigError("truncation_schedule", "expected 'fixed' or 'linear'");
    return c;
}

inline json to_json(const MetaTrainConfig& c) {
    json tasks = json::array();
    for (const auto& t : c.tasks) tasks.push_back(to_json(t));
    return {{"tasks", tasks},
            {"pes", to_json(c.pes)},
            {"schedule", to_json(c.schedule)},
            {"lo", to_json(c.lo)},
            {"param_mode", std::string(to_string(c.mode))},
            {"seed", c.seed},
            {"lo_init_std", c.lo_init_std},
            {"checkpoint_every", c.checkpoint_every},
            {"truncation_schedule", c.truncation_schedule == TruncationSchedule::Fixed ? "fixed" : "linear"},
            {"min_truncation", c.min_truncation},
            {"record_wall_time", c.record_wall_time}};
}

struct MetaLogRow {
    std::size_t outer_step = 0;
    double lr = 0.0;
    double mean_inner_loss = 0.0;
    double grad_norm = 0.0;
    std::size_t diverged_pairs = 0;
    double wall_ms = 0.0;
};

inline void write_meta_log_header(std::ostream& os) {
    os << "outer_step,lr,mean_inner_loss,grad_norm,diverged_pairs,wall_ms\n";
}

inline void write_meta_log_row(std::ostream& os, const MetaLogRow& r) {
    os << r.outer_step << ',' << format_double(r.lr) << ',' << format_double(r.mean_inner_loss) << ','
       << format_double(r.grad_norm) << ',' << r.diverged_pairs << ',' << format_double(r.wall_ms) << '\n';
}

namespace detail {
struct BinWriter {
    std::ostream& os;
    template <class T>
    void put(const T& v) { os.write(reinterpret_cast<const char*>(&v), sizeof(T)); }
    void put_vec(std::span<const double> v) {
        put<std::uint64_t>(v.size());
        os.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
    }
};
struct BinReader {
    std::istream& is;
    template <class T>
    T get() {
        T v{};
        is.read(reinterpret_cast<char*>(&v), sizeof(T));
        if (!is) throw FormatError("truncated training state", static_cast<std::uint64_t>(is.tellg()));
        return v;
    }
    void get_into(std::span<double> v) {
        const auto n = get<std::uint64_t>();
        if (n != v.size()) throw FormatError("training state tensor size mismatch", static_cast<std::uint64_t>(is.tellg()));
        is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
        if (!is) throw FormatError("truncated training state", 0);
    }
    std::vector<double> get_vec() {
        const auto n = get<std::uint64_t>();
        std::vector<double> v(n);
        is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
        if (!is) throw FormatError("truncated training state", 0);
        return v;
    }
};
}  // namespace detail

class MetaTrainer {
public:
    explicit MetaTrainer(MetaTrainConfig cfg) : cfg_(std::move(cfg)) {
        validate(cfg_.pes);
        validate(cfg_.schedule);
        validate(cfg_.lo.rule);
        RngStream root(cfg_.seed, 0x4D554C4FULL);
        std::vector<InnerTask> inner;
        for (const auto& t : cfg_.tasks) {
            auto ds = std::make_shared<const Dataset>(t.dataset.load());
            inner.push_back({mlp_for(t, *ds, cfg_.mode), ds, t.batch_size});
        }
        task_ = std::make_unique<LOInnerTask>(std::move(inner), cfg_.lo, cfg_.mode, cfg_.pes.loss_cap_factor,
                                              rng_child(root, 1));
        phi_ = flatten(init_lo(rng_child(root, 2), cfg_.lo_init_std));
        pes_ = std::make_unique<PesEstimator<LOInnerTask>>(*task_, cfg_.pes, phi_.size(), rng_child(root, 3));
    }

    MetaTrainer(const MetaTrainer&) = delete;
    MetaTrainer& operator=(const MetaTrainer&) = delete;

    const MetaTrainConfig& config() const noexcept { return cfg_; }
    const std::vector<double>& phi() const noexcept { return phi_; }
    std::size_t outer_step() const noexcept { return step_; }
    bool done() const noexcept { return step_ >= cfg_.schedule.total_steps; }
    const LOInnerTask& task() const noexcept { return *task_; }
    PesEstimator<LOInnerTask>& estimator() noexcept { return *pes_; }

    std::size_t truncation_length(std::size_t t) const {
        if (cfg_.truncation_schedule == TruncationSchedule::Fixed) return cfg_.pes.truncation;
        const std::size_t lo = std::min(std::max<std::size_t>(cfg_.min_truncation, 1), cfg_.pes.truncation);
        const std::size_t span = std::max<std::size_t>(cfg_.schedule.total_steps - 1, 1);
        const double frac = static_cast<double>(std::min(t, span)) / static_cast<double>(span);
        return lo + static_cast<std::size_t>(std::llround(frac * static_cast<double>(cfg_.pes.truncation - lo)));
    }

    MetaLogRow step(unsigned threads = 1) {
        if (done()) throw std::logic_error("meta-training already finished");
        const PesEstimate est = pes_->estimate(phi_, step_, threads, truncation_length(step_));
        const OuterStepInfo info = mulo::outer_step(phi_, est.grad, adamw_, cfg_.schedule, step_);
        MetaLogRow row{step_, info.lr, est.mean_loss, info.grad_norm, est.diverged_pairs, 0.0};
        ++step_;
        return row;
    }

    Checkpoint checkpoint() const {
        Checkpoint ck;
        ck.flat = phi_;
        ck.meta.lo = cfg_.lo;
        ck.meta.mode = cfg_.mode;
        ck.meta.meta_horizon = cfg_.pes.max_unroll;
        ck.meta.outer_step = step_;
        return ck;
    }

    // Full resumable state: phi, AdamW moments, and every particle.
    void save_state(const std::filesystem::path& path) const {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write training state " + path.string());
        detail::BinWriter w{out};
        out.write("MUST", 4);
        w.put<std::uint32_t>(1);
        w.put<std::uint64_t>(step_);
        w.put_vec(phi_);
        w.put<std::uint64_t>(adamw_.t);
        w.put_vec(adamw_.m);
        w.put_vec(adamw_.v);
        const auto& pairs = pes_->pairs();
        w.put<std::uint64_t>(pairs.size());
        for (const auto& p : pairs) {
            w.put<std::uint64_t>(p.episode);
            w.put_vec(p.xi);
            save_inner(w, p.plus);
            save_inner(w, p.minus);
        }
        if (!out) throw std::runtime_error("write failed: " + path.string());
    }

    void load_state(const std::filesystem::path& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw std::runtime_error("cannot open training state " + path.string());
        char magic[4];
        in.read(magic, 4);
        if (!in || std::string(magic, 4) != "MUST") throw FormatError("bad training state magic", 0);
        detail::BinReader r{in};
        if (r.get<std::uint32_t>() != 1) throw FormatError("unsupported training state version", 4);
        step_ = r.get<std::uint64_t>();
        r.get_into(phi_);
        adamw_.t = r.get<std::uint64_t>();
        adamw_.m = r.get_vec();
        adamw_.v = r.get_vec();
        auto& pairs = pes_->pairs();
        if (r.get<std::uint64_t>() != pairs.size()) throw FormatError("training state has a different pair count", 0);
        for (auto& p : pairs) {
            p.episode = r.get<std::uint64_t>();
            r.get_into(p.xi);
            p.plus = load_inner(r);
            p.minus = load_inner(r);
        }
    }

private:
    void save_inner(detail::BinWriter& w, const LOInnerTask::State& s) const {
        w.put<std::uint64_t>(s.task);
        w.put<std::uint64_t>(s.step);
        w.put<double>(s.initial_loss);
        w.put<std::uint64_t>(s.batch_rng.seed());
        w.put<std::uint64_t>(s.batch_rng.stream_id());
        w.put<std::uint64_t>(s.batch_rng.counter());
        for (std::size_t i = 0; i < s.params.tensor_count(); ++i) w.put_vec(s.params.tensor(i).flat());
        for (const auto& t : s.features.tensors) {
            for (const auto& m : t.m) w.put_vec(m.flat());
            w.put_vec(t.v.flat());
            for (const auto& x : t.row) w.put_vec(x.flat());
            for (const auto& x : t.col) w.put_vec(x.flat());
        }
    }

    LOInnerTask::State load_inner(detail::BinReader& r) const {
        const auto task = r.get<std::uint64_t>();
        if (task >= task_->tasks().size()) throw FormatError("training state references an unknown task", 0);
        LOInnerTask::State s = task_->blank_state(task);
        s.step = r.get<std::uint64_t>();
        s.initial_loss = r.get<double>();
        const auto seed = r.get<std::uint64_t>();
        const auto stream = r.get<std::uint64_t>();
        s.batch_rng = RngStream(seed, stream);
        s.batch_rng.set_counter(r.get<std::uint64_t>());
        for (std::size_t i = 0; i < s.params.tensor_count(); ++i) r.get_into(s.params.tensor(i).flat());
        for (auto& t : s.features.tensors) {
            for (auto& m : t.m) r.get_into(m.flat());
            r.get_into(t.v.flat());
            for (auto& x : t.row) r.get_into(x.flat());
            for (auto& x : t.col) r.get_into(x.flat());
        }
        return s;
    }

    MetaTrainConfig cfg_;
    std::unique_ptr<LOInnerTask> task_;
    std::unique_ptr<PesEstimator<LOInnerTask>> pes_;
    std::vector<double> phi_;
    AdamWState adamw_;
    std::size_t step_ = 0;
};

}  // namespace mulo
