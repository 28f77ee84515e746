#pragma once

// Classification datasets: the MLOD binary format, a Gaussian-mixture
// generator, and minibatch sampling.
//
// MLOD layout (all little-endian):
//   "MLOD" | version u32 | n u64 | input_dim u32 | num_classes u32
//   | n*input_dim float32 features | n u32 labels

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <stdexcept>
#include <string>
#include <vector>

#include "mulo/rng.hpp"
#include "mulo/tensor.hpp"

namespace mulo {

static_assert(std::endian::native == std::endian::little, "MLOD I/O assumes a little-endian host");

class FormatError : public std::runtime_error {
public:
    FormatError(const std::string& what, std::uint64_t offset)
        : std::runtime_error(what + " at byte offset " + std::to_string(offset)), offset_(offset) {}
    std::uint64_t offset() const noexcept { return offset_; }

private:
    std::uint64_t offset_;
};

class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

inline constexpr std::uint32_t kDatasetVersion = 1;
inline constexpr std::size_t kDatasetHeaderBytes = 4 + 4 + 8 + 4 + 4;

struct Dataset {
    std::size_t input_dim = 0;
    std::size_t num_classes = 0;
    std::vector<float> features;  // n x input_dim
    std::vector<std::uint32_t> labels;

    std::size_t size() const noexcept { return labels.size(); }
};

inline void validate(const Dataset& ds) {
    if (ds.size() == 0) throw ValidationError("dataset is empty");
    if (ds.input_dim == 0 || ds.num_classes == 0) throw ValidationError("dataset dims must be >= 1");
    if (ds.features.size() != ds.size() * ds.input_dim) throw ValidationError("feature count mismatch");
    for (std::size_t i = 0; i < ds.size(); ++i) {
        if (ds.labels[i] >= ds.num_classes) {
            throw ValidationError("label " + std::to_string(ds.labels[i]) + " at index " + std::to_string(i) +
                                  " out of range [0, " + std::to_string(ds.num_classes) + ")");
        }
    }
}

namespace detail {
template <class T>
void put(std::vector<char>& buf, T v) {
    char raw[sizeof(T)];
    std::memcpy(raw, &v, sizeof(T));
    buf.insert(buf.end(), raw, raw + sizeof(T));
}

template <class T>
T get(const std::vector<char>& buf, std::size_t& off, const char* field) {
    if (off + sizeof(T) > buf.size()) throw FormatError(std::string("truncated file reading ") + field, off);
    T v;
    std::memcpy(&v, buf.data() + off, sizeof(T));
    off += sizeof(T);
    return v;
}
}  // namespace detail

inline std::vector<char> encode_dataset(const Dataset& ds) {
    validate(ds);
    std::vector<char> buf{'M', 'L', 'O', 'D'};
    buf.reserve(kDatasetHeaderBytes + ds.features.size() * 4 + ds.labels.size() * 4);
    detail::put<std::uint32_t>(buf, kDatasetVersion);
    detail::put<std::uint64_t>(buf, ds.size());
    detail::put<std::uint32_t>(buf, static_cast<std::uint32_t>(ds.input_dim));
    detail::put<std::uint32_t>(buf, static_cast<std::uint32_t>(ds.num_classes));
    for (float f : ds.features) detail::put(buf, f);
    for (std::uint32_t l : ds.labels) detail::put(buf, l);
    return buf;
}

inline Dataset decode_dataset(const std::vector<char>& buf) {
    std::size_t off = 0;
    if (buf.size() < 4 || std::memcmp(buf.data(), "MLOD", 4) != 0) throw FormatError("bad magic", 0);
    off = 4;
    const auto version = detail::get<std::uint32_t>(buf, off, "version");
    if (version != kDatasetVersion) throw FormatError("unsupported version " + std::to_string(version), 4);
    const auto n = detail::get<std::uint64_t>(buf, off, "n");
    const auto dim = detail::get<std::uint32_t>(buf, off, "input_dim");
    const auto classes = detail::get<std::uint32_t>(buf, off, "num_classes");
    if (n == 0) throw FormatError("n must be >= 1", 8);
    if (dim == 0) throw FormatError("input_dim must be >= 1", 16);
    if (classes == 0) throw FormatError("num_classes must be >= 1", 20);
    const std::uint64_t need = kDatasetHeaderBytes + n * dim * 4 + n * 4;
    if (buf.size() < need) {
        throw FormatError("truncated payload (expected " + std::to_string(need) + " bytes)", buf.size());
    }
    if (buf.size() > need) throw FormatError("trailing bytes after payload", need);
    Dataset ds;
    ds.input_dim = dim;
    ds.num_classes = classes;
    ds.features.resize(n * dim);
    ds.labels.resize(n);
    std::memcpy(ds.features.data(), buf.data() + off, n * dim * 4);
    off += n * dim * 4;
    std::memcpy(ds.labels.data(), buf.data() + off, n * 4);
    for (std::size_t i = 0; i < n; ++i) {
        if (ds.labels[i] >= classes) {
            throw ValidationError("label " + std::to_string(ds.labels[i]) + " at index " + std::to_string(i) +
                                  " out of range [0, " + std::to_string(classes) + ")");
        }
    }
    return ds;
}

inline void save_dataset(const Dataset& ds, const std::filesystem::path& path) {
    const auto buf = encode_dataset(ds);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

inline Dataset load_dataset(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::vector<char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_dataset(buf);
}

struct SyntheticSpec {
    std::size_t n = 4096;
    std::size_t input_dim = 64;
    std::size_t num_classes = 10;
    double center_radius = 1.0;  // cluster centers lie on a sphere of this radius, scaled by sqrt(input_dim)
    double noise_std = 1.0;      // per-coordinate noise around the center
    std::uint64_t seed = 0;
};

// Gaussian-mixture classification: one center per class drawn uniformly on a
// sphere, labels uniform, features = center + isotropic noise.
inline Dataset make_synthetic(const SyntheticSpec& spec) {
    if (spec.n == 0 || spec.input_dim == 0 || spec.num_classes == 0) {
        throw ValidationError("synthetic dataset dims must be >= 1");
    }
    RngStream root(spec.seed, 0x5EED);
    RngStream center_rng = rng_child(root, 1);
    RngStream label_rng = rng_child(root, 2);
    RngStream noise_rng = rng_child(root, 3);

    const double radius = spec.center_radius * std::sqrt(static_cast<double>(spec.input_dim));
    Tensor centers = gaussian(spec.num_classes, spec.input_dim, 0.0, 1.0, center_rng);
    for (std::size_t c = 0; c < spec.num_classes; ++c) {
        const double norm = std::sqrt(sum_squares(centers.row(c)));
        for (double& v : centers.row(c)) v *= radius / norm;
    }

    Dataset ds;
    ds.input_dim = spec.input_dim;
    ds.num_classes = spec.num_classes;
    ds.labels.resize(spec.n);
    ds.features.resize(spec.n * spec.input_dim);
    std::vector<double> noise(spec.input_dim);
    for (std::size_t i = 0; i < spec.n; ++i) {
        const auto label = static_cast<std::uint32_t>(label_rng.below(spec.num_classes));
        ds.labels[i] = label;
        fill_gaussian(noise, 0.0, spec.noise_std, noise_rng);
        for (std::size_t j = 0; j < spec.input_dim; ++j) {
            ds.features[i * spec.input_dim + j] = static_cast<float>(centers(label, j) + noise[j]);
        }
    }
    return ds;
}

struct Batch {
    Tensor x;  // batch x input_dim
    std::vector<std::uint32_t> y;

    std::size_t size() const noexcept { return y.size(); }
};

inline Batch gather_batch(const Dataset& ds, std::span<const std::size_t> indices) {
    Batch b{Tensor(indices.size(), ds.input_dim), std::vector<std::uint32_t>(indices.size())};
    for (std::size_t r = 0; r < indices.size(); ++r) {
        const std::size_t i = indices[r];
        const float* src = ds.features.data() + i * ds.input_dim;
        for (std::size_t j = 0; j < ds.input_dim; ++j) b.x(r, j) = src[j];
        b.y[r] = ds.labels[i];
    }
    return b;
}

enum class SampleMode { WithReplacement, Permutation };

// WithReplacement draws i.i.d. indices; Permutation returns the first
// batch_size entries of a seeded Fisher-Yates shuffle (so batch_size = n
// visits every index exactly once).
inline Batch sample_batch(const Dataset& ds, std::size_t batch_size, RngStream& rng,
                          SampleMode mode = SampleMode::WithReplacement) {
    if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    std::vector<std::size_t> idx;
    if (mode == SampleMode::WithReplacement) {
        idx.resize(batch_size);
        for (auto& i : idx) i = static_cast<std::size_t>(rng.below(ds.size()));
    } else {
        if (batch_size > ds.size()) throw std::invalid_argument("permutation batch larger than dataset");
        idx.resize(ds.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        for (std::size_t i = idx.size(); i > 1; --i) {
            std::swap(idx[i - 1], idx[static_cast<std::size_t>(rng.below(i))]);
        }
        idx.resize(batch_size);
    }
    return gather_batch(ds, idx);
}

}  // namespace mulo
