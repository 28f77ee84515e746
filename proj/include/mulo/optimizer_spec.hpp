#pragma once

// Declarative description of an inner optimizer, as it appears in evaluation,
// sweep and coordinate-check configs:
//
//   {"name": "muLO", "type": "lo", "checkpoint": "out/phi.mulo"}
//   {"name": "muAdam", "type": "adam", "param_mode": "mup", "lr": 0.1,
//    "input_mult": 0.0625, "output_mult": 0.25, "hidden_lr_mult": 4}
//   {"name": "sgd", "type": "sgd", "lr": 0.1}
//   {"name": "frozen", "type": "zero"}

#include <memory>
#include <string>

#include "mulo/checkpoint.hpp"
#include "mulo/config.hpp"
#include "mulo/optimizers.hpp"

namespace mulo {

enum class OptimizerKind { LearnedOptimizer, Adam, SGD, Zero };

struct OptimizerSpec {
    std::string name = "adam";
    OptimizerKind kind = OptimizerKind::Adam;
    ParamMode mode = ParamMode::SP;
    AdamHyper hp{};
    std::string checkpoint_path;
    std::shared_ptr<const Checkpoint> checkpoint;  // LO only
    std::shared_ptr<const LOWeights> phi;           // LO only

    // Forward multipliers the optimizee must be built with.
    MultiplierSet optimizee_multipliers() const {
        return kind == OptimizerKind::Adam || kind == OptimizerKind::SGD ? hp.multipliers : MultiplierSet{};
    }

    // Inner steps the optimizer saw per episode during meta-training; 0 if not
    // meta-trained.
    std::size_t meta_horizon() const { return checkpoint ? checkpoint->meta.meta_horizon : 0; }

    std::unique_ptr<Optimizer> make() const {
        switch (kind) {
            case OptimizerKind::Adam: return std::make_unique<AdamOptimizer>(hp, mode);
            case OptimizerKind::SGD: return std::make_unique<SgdOptimizer>(hp, mode);
            case OptimizerKind::Zero: return std::make_unique<ZeroOptimizer>();
            case OptimizerKind::LearnedOptimizer:
                if (!phi || !checkpoint) throw std::logic_error("learned optimizer spec has no weights");
                return std::make_unique<LearnedOptimizer>(phi, checkpoint->meta.lo, mode);
        }
        throw std::logic_error("unknown optimizer kind");
    }
};

inline OptimizerSpec lo_spec(std::string name, Checkpoint ck) {
    OptimizerSpec s;
    s.name = std::move(name);
    s.kind = OptimizerKind::LearnedOptimizer;
    s.mode = ck.meta.mode;
    s.phi = std::make_shared<const LOWeights>(ck.weights());
    s.checkpoint = std::make_shared<const Checkpoint>(std::move(ck));
    return s;
}

inline OptimizerSpec adam_spec(std::string name, AdamHyper hp, ParamMode mode) {
    OptimizerSpec s;
    s.name = std::move(name);
    s.kind = OptimizerKind::Adam;
    s.mode = mode;
    s.hp = hp;
    return s;
}

inline std::string_view to_string(OptimizerKind k) {
    switch (k) {
        case OptimizerKind::LearnedOptimizer: return "lo";
        case OptimizerKind::Adam: return "adam";
        case OptimizerKind::SGD: return "sgd";
        case OptimizerKind::Zero: return "zero";
    }
    return "?";
}

inline OptimizerSpec read_optimizer_spec(const json& j, const std::string& prefix) {
    OptimizerSpec s;
    const auto type = require_field<std::string>(j, "type", prefix);
    read_field(j, "name", s.name, prefix);
    if (!j.contains("name")) s.name = type;
    if (type == "lo") {
        s.checkpoint_path = require_field<std::string>(j, "checkpoint", prefix);
        Checkpoint ck = load_checkpoint(s.checkpoint_path);
        const std::string name = s.name;
        s = lo_spec(name, std::move(ck));
        s.checkpoint_path = require_field<std::string>(j, "checkpoint", prefix);
        s.mode = read_mode(j, "param_mode", s.mode, prefix);
    } else if (type == "adam" || type == "sgd") {
        s.kind = type == "adam" ? OptimizerKind::Adam : OptimizerKind::SGD;
        s.mode = read_mode(j, "param_mode", ParamMode::SP, prefix);
        s.hp = read_adam_hyper(j, s.hp, prefix);
    } else if (type == "zero") {
        s.kind = OptimizerKind::Zero;
        s.mode = read_mode(j, "param_mode", ParamMode::SP, prefix);
    } else {
        throw ConfigError(detail::join_path(prefix, "type"), "expected one of lo, adam, sgd, zero");
    }
    return s;
}

}  // namespace mulo
