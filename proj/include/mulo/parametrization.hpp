#pragma once

// SP and muP scaling rules for weight tensors.
//
//                 init std          forward multiplier         update scale
//   muP Input     1/sqrt(fan_in)    input_mult                 1
//   muP Hidden    1/sqrt(fan_in)    1                          1/fan_in
//   muP Output    1                 output_mult / fan_in       1
//   SP  any       1/sqrt(fan_in)    1                          1
//
// The init "N(0, 1/sqrt(fan_in))" is read as a standard deviation by default;
// InitReading::Variance switches to treating it as a variance.

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace mulo {

enum class ParamMode { SP, MuP };
enum class LayerRole { Input, Hidden, Output };
enum class InitReading { StdDev, Variance };

struct LayerGeometry {
    std::size_t fan_in = 1;
    std::size_t fan_out = 1;
};

struct MultiplierSet {
    double input_mult = 1.0;
    double output_mult = 1.0;
    double hidden_lr_mult = 1.0;

    bool operator==(const MultiplierSet&) const = default;
};

inline std::string_view to_string(ParamMode m) { return m == ParamMode::MuP ? "mup" : "sp"; }

inline ParamMode parse_param_mode(std::string_view s) {
    if (s == "mup" || s == "muP" || s == "MuP") return ParamMode::MuP;
    if (s == "sp" || s == "SP") return ParamMode::SP;
    throw std::invalid_argument("unknown param mode: " + std::string(s));
}

inline std::string_view to_string(LayerRole r) {
    switch (r) {
        case LayerRole::Input: return "input";
        case LayerRole::Hidden: return "hidden";
        case LayerRole::Output: return "output";
    }
    return "?";
}

// Layer 0 is Input, layer L-1 is Output, everything else Hidden.
inline LayerRole role_of_layer(std::size_t layer, std::size_t depth) {
    if (depth < 2) throw std::invalid_argument("depth must be >= 2");
    if (layer == 0) return LayerRole::Input;
    if (layer + 1 == depth) return LayerRole::Output;
    return LayerRole::Hidden;
}

inline void validate(const LayerGeometry& g) {
    if (g.fan_in < 1 || g.fan_out < 1) throw std::invalid_argument("layer geometry must be >= 1");
}

inline double init_std(LayerRole role, LayerGeometry geom, ParamMode mode,
                       InitReading reading = InitReading::StdDev) {
    validate(geom);
    const double n = static_cast<double>(geom.fan_in);
    const double fan_in_std = reading == InitReading::StdDev ? 1.0 / std::sqrt(n) : std::pow(n, -0.25);
    if (mode == ParamMode::MuP && role == LayerRole::Output) return 1.0;
    return fan_in_std;
}

inline double forward_multiplier(LayerRole role, LayerGeometry geom, ParamMode mode,
                                 const MultiplierSet& tunables = {}) {
    validate(geom);
    if (!(tunables.input_mult > 0.0) || !(tunables.output_mult > 0.0) || !(tunables.hidden_lr_mult > 0.0)) {
        throw std::invalid_argument("multipliers must be positive");
    }
    if (mode == ParamMode::SP) return 1.0;
    switch (role) {
        case LayerRole::Input: return tunables.input_mult;
        case LayerRole::Hidden: return 1.0;
        case LayerRole::Output: return tunables.output_mult / static_cast<double>(geom.fan_in);
    }
    return 1.0;
}

inline double update_scale(LayerRole role, LayerGeometry geom, ParamMode mode) {
    validate(geom);
    if (mode == ParamMode::MuP && role == LayerRole::Hidden) return 1.0 / static_cast<double>(geom.fan_in);
    return 1.0;
}

}  // namespace mulo
