#pragma once

// JSON <-> config structs. Every reader accepts partial objects (missing keys
// keep their defaults) and reports type errors with the dotted field path.

#include <filesystem>
#include <fstream>
#include <string>
#include <type_traits>

#include <nlohmann/json.hpp>

#include "mulo/dataset.hpp"
#include "mulo/optimizee.hpp"
#include "mulo/optimizers.hpp"
#include "mulo/pes.hpp"

namespace mulo {

using json = nlohmann::json;

class ConfigError : public ValidationError {
public:
    ConfigError(const std::string& field, const std::string& what)
        : ValidationError("config field '" + field + "': " + what), field_(field) {}
    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

namespace detail {
inline std::string join_path(const std::string& prefix, const std::string& key) {
    return prefix.empty() ? key : prefix + "." + key;
}
}  // namespace detail

template <class T>
void read_field(const json& j, const char* key, T& out, const std::string& prefix) {
    if (!j.is_object()) throw ConfigError(prefix.empty() ? "<root>" : prefix, "expected an object");
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return;
    if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
        if (!it->is_number_integer()) throw ConfigError(detail::join_path(prefix, key), "expected an integer");
        if constexpr (std::is_unsigned_v<T>) {
            if (!it->is_number_unsigned() && it->template get<std::int64_t>() < 0) throw ConfigError(detail::join_path(prefix, key), "must be non-negative");
        }
    }
    try {
        out = it->template get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(detail::join_path(prefix, key), e.what());
    }
}

template <class T>
T require_field(const json& j, const char* key, const std::string& prefix) {
    if (!j.is_object() || !j.contains(key)) throw ConfigError(detail::join_path(prefix, key), "missing required field");
    T out{};
    read_field(j, key, out, prefix);
    return out;
}

inline json load_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ValidationError("config " + path.string() + " is not valid JSON: " + e.what());
    }
}

inline ParamMode read_mode(const json& j, const char* key, ParamMode def, const std::string& prefix) {
    std::string s(to_string(def));
    read_field(j, key, s, prefix);
    try {
        return parse_param_mode(s);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(detail::join_path(prefix, key), e.what());
    }
}

inline Activation read_activation(const json& j, const char* key, Activation def, const std::string& prefix) {
    std::string s = def == Activation::ReLU ? "relu" : "tanh";
    read_field(j, key, s, prefix);
    try {
        return parse_activation(s);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(detail::join_path(prefix, key), e.what());
    }
}

inline MultiplierSet read_multipliers(const json& j, MultiplierSet m, const std::string& prefix) {
    read_field(j, "input_mult", m.input_mult, prefix);
    read_field(j, "output_mult", m.output_mult, prefix);
    read_field(j, "hidden_lr_mult", m.hidden_lr_mult, prefix);
    return m;
}

inline json to_json(const MultiplierSet& m) {
    return {{"input_mult", m.input_mult}, {"output_mult", m.output_mult}, {"hidden_lr_mult", m.hidden_lr_mult}};
}

inline SyntheticSpec read_synthetic(const json& j, SyntheticSpec s, const std::string& prefix) {
    read_field(j, "n", s.n, prefix);
    read_field(j, "input_dim", s.input_dim, prefix);
    read_field(j, "num_classes", s.num_classes, prefix);
    read_field(j, "center_radius", s.center_radius, prefix);
    read_field(j, "noise_std", s.noise_std, prefix);
    read_field(j, "seed", s.seed, prefix);
    return s;
}

inline json to_json(const SyntheticSpec& s) {
    return {{"n", s.n},
            {"input_dim", s.input_dim},
            {"num_classes", s.num_classes},
            {"center_radius", s.center_radius},
            {"noise_std", s.noise_std},
            {"seed", s.seed}};
}

// A dataset reference: {"path": "..."} or {"synthetic": {...}}.
struct DatasetRef {
    std::string path;
    SyntheticSpec synthetic{};

    Dataset load() const { return path.empty() ? make_synthetic(synthetic) : load_dataset(path); }
};

inline DatasetRef read_dataset_ref(const json& j, DatasetRef d, const std::string& prefix) {
    read_field(j, "path", d.path, prefix);
    if (j.is_object() && j.contains("synthetic")) {
        d.synthetic = read_synthetic(j["synthetic"], d.synthetic, detail::join_path(prefix, "synthetic"));
    }
    return d;
}

inline json to_json(const DatasetRef& d) {
    if (!d.path.empty()) return {{"path", d.path}};
    return {{"synthetic", to_json(d.synthetic)}};
}

inline FeatureConfig read_feature_config(const json& j, FeatureConfig f, const std::string& prefix) {
    read_field(j, "momentum_betas", f.momentum_betas, prefix);
    read_field(j, "second_moment_beta", f.second_moment_beta, prefix);
    read_field(j, "adafactor_betas", f.adafactor_betas, prefix);
    read_field(j, "eps", f.eps, prefix);
    read_field(j, "normalize", f.normalize, prefix);
    try {
        validate(f);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(prefix, e.what());
    }
    return f;
}

inline json to_json(const FeatureConfig& f) {
    return {{"momentum_betas", f.momentum_betas},
            {"second_moment_beta", f.second_moment_beta},
            {"adafactor_betas", f.adafactor_betas},
            {"eps", f.eps},
            {"normalize", f.normalize}};
}

inline LOConfig read_lo_config(const json& j, LOConfig c, const std::string& prefix) {
    read_field(j, "lambda1", c.rule.lambda1, prefix);
    read_field(j, "lambda2", c.rule.lambda2, prefix);
    read_field(j, "learn_betas", c.learn_betas, prefix);
    c.activation = read_activation(j, "activation", c.activation, prefix);
    if (j.is_object() && j.contains("features")) {
        c.features = read_feature_config(j["features"], c.features, detail::join_path(prefix, "features"));
    }
    try {
        validate(c.rule);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(prefix, e.what());
    }
    return c;
}

inline json to_json(const LOConfig& c) {
    return {{"lambda1", c.rule.lambda1},
            {"lambda2", c.rule.lambda2},
            {"learn_betas", c.learn_betas},
            {"activation", c.activation == Activation::ReLU ? "relu" : "tanh"},
            {"features", to_json(c.features)}};
}

inline PESConfig read_pes_config(const json& j, PESConfig c, const std::string& prefix) {
    read_field(j, "num_pairs", c.num_pairs, prefix);
    read_field(j, "sigma", c.sigma, prefix);
    read_field(j, "truncation", c.truncation, prefix);
    read_field(j, "max_unroll", c.max_unroll, prefix);
    read_field(j, "loss_cap_factor", c.loss_cap_factor, prefix);
    auto bad = [&](const char* key, const char* what) { throw ConfigError(detail::join_path(prefix, key), what); };
    if (c.num_pairs < 1) bad("num_pairs", "must be >= 1");
    if (!(c.sigma > 0.0)) bad("sigma", "must be positive");
    if (c.truncation < 1 || c.truncation > c.max_unroll) bad("truncation", "must satisfy 1 <= truncation <= max_unroll");
    if (!(c.loss_cap_factor > 0.0)) bad("loss_cap_factor", "must be positive");
    try {
        validate(c);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(prefix, e.what());
    }
    return c;
}

inline json to_json(const PESConfig& c) {
    return {{"num_pairs", c.num_pairs},
            {"sigma", c.sigma},
            {"truncation", c.truncation},
            {"max_unroll", c.max_unroll},
            {"loss_cap_factor", c.loss_cap_factor}};
}

inline OuterSchedule read_schedule(const json& j, OuterSchedule s, const std::string& prefix) {
    read_field(j, "max_lr", s.max_lr, prefix);
    read_field(j, "warmup_steps", s.warmup_steps, prefix);
    read_field(j, "total_steps", s.total_steps, prefix);
    read_field(j, "final_lr", s.final_lr, prefix);
    read_field(j, "clip_norm", s.clip_norm, prefix);
    read_field(j, "weight_decay", s.weight_decay, prefix);
    try {
        validate(s);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(prefix, e.what());
    }
    return s;
}

inline json to_json(const OuterSchedule& s) {
    return {{"max_lr", s.max_lr},       {"warmup_steps", s.warmup_steps}, {"total_steps", s.total_steps},
            {"final_lr", s.final_lr},   {"clip_norm", s.clip_norm},       {"weight_decay", s.weight_decay}};
}

inline AdamHyper read_adam_hyper(const json& j, AdamHyper h, const std::string& prefix) {
    read_field(j, "lr", h.lr, prefix);
    read_field(j, "beta1", h.beta1, prefix);
    read_field(j, "beta2", h.beta2, prefix);
    read_field(j, "eps", h.eps, prefix);
    read_field(j, "weight_decay", h.weight_decay, prefix);
    h.multipliers = read_multipliers(j, h.multipliers, prefix);
    if (!(h.lr > 0.0)) throw ConfigError(detail::join_path(prefix, "lr"), "must be positive");
    return h;
}

}  // namespace mulo
