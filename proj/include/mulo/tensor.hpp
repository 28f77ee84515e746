#pragma once

// Dense row-major 2-D tensor of doubles plus the handful of kernels the
// optimizee, feature extractor and learned optimizer need. Vectors are
// represented as n x 1 tensors.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace mulo {

class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class Tensor {
public:
    Tensor() = default;
    Tensor(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    Tensor(std::size_t rows, std::size_t cols, std::vector<double> data)
        : rows_(rows), cols_(cols), data_(std::move(data)) {
        if (data_.size() != rows_ * cols_) {
            throw DimensionError("tensor data length does not match shape");
        }
    }

    static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows) {
        const std::size_t r = rows.size();
        const std::size_t c = r == 0 ? 0 : rows.begin()->size();
        Tensor t(r, c);
        std::size_t i = 0;
        for (const auto& row : rows) {
            if (row.size() != c) {
                throw DimensionError("ragged initializer");
            }
            std::copy(row.begin(), row.end(), t.data_.begin() + static_cast<std::ptrdiff_t>(i * c));
            ++i;
        }
        return t;
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }
    double& operator[](std::size_t i) noexcept { return data_[i]; }
    double operator[](std::size_t i) const noexcept { return data_[i]; }

    std::span<double> flat() noexcept { return data_; }
    std::span<const double> flat() const noexcept { return data_; }
    std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const noexcept { return {data_.data() + r * cols_, cols_}; }

    double* data() noexcept { return data_.data(); }
    const double* data() const noexcept { return data_.data(); }

    bool same_shape(const Tensor& o) const noexcept { return rows_ == o.rows_ && cols_ == o.cols_; }

    void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

    bool operator==(const Tensor& o) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

namespace detail {
inline std::string shape_str(const Tensor& t) {
    std::ostringstream os;
    os << '(' << t.rows() << ", " << t.cols() << ')';
    return os.str();
}

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_shape(b)) {
        throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b));
    }
}
}  // namespace detail

// a (m x k) * b (k x n)
inline Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.cols() != b.rows()) {
        throw DimensionError("matmul: " + detail::shape_str(a) + " x " + detail::shape_str(b));
    }
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    Tensor out(m, n);
    for (std::size_t i = 0; i < m; ++i) {
        double* o = out.data() + i * n;
        const double* ai = a.data() + i * k;
        for (std::size_t p = 0; p < k; ++p) {
            const double s = ai[p];
            if (s == 0.0) continue;
            const double* bp = b.data() + p * n;
            for (std::size_t j = 0; j < n; ++j) o[j] += s * bp[j];
        }
    }
    return out;
}

// a^T (k x m)^T * b (k x n) -> m x n
inline Tensor matmul_tn(const Tensor& a, const Tensor& b) {
    if (a.rows() != b.rows()) {
        throw DimensionError("matmul_tn: " + detail::shape_str(a) + "^T x " + detail::shape_str(b));
    }
    const std::size_t k = a.rows(), m = a.cols(), n = b.cols();
    Tensor out(m, n);
    for (std::size_t p = 0; p < k; ++p) {
        const double* ap = a.data() + p * m;
        const double* bp = b.data() + p * n;
        for (std::size_t i = 0; i < m; ++i) {
            const double s = ap[i];
            if (s == 0.0) continue;
            double* o = out.data() + i * n;
            for (std::size_t j = 0; j < n; ++j) o[j] += s * bp[j];
        }
    }
    return out;
}

// a (m x k) * b^T (n x k)^T -> m x n
inline Tensor matmul_nt(const Tensor& a, const Tensor& b) {
    if (a.cols() != b.cols()) {
        throw DimensionError("matmul_nt: " + detail::shape_str(a) + " x " + detail::shape_str(b) + "^T");
    }
    const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
    Tensor out(m, n);
    for (std::size_t i = 0; i < m; ++i) {
        const double* ai = a.data() + i * k;
        for (std::size_t j = 0; j < n; ++j) {
            const double* bj = b.data() + j * k;
            double s = 0.0;
            for (std::size_t p = 0; p < k; ++p) s += ai[p] * bj[p];
            out(i, j) = s;
        }
    }
    return out;
}

template <class F>
Tensor map(const Tensor& a, F&& f) {
    Tensor out(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i]);
    return out;
}

template <class F>
Tensor zip(const Tensor& a, const Tensor& b, F&& f, const char* op) {
    detail::require_same_shape(a, b, op);
    Tensor out(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i], b[i]);
    return out;
}

inline Tensor add(const Tensor& a, const Tensor& b) {
    return zip(a, b, [](double x, double y) { return x + y; }, "add");
}
inline Tensor sub(const Tensor& a, const Tensor& b) {
    return zip(a, b, [](double x, double y) { return x - y; }, "sub");
}
inline Tensor mul(const Tensor& a, const Tensor& b) {
    return zip(a, b, [](double x, double y) { return x * y; }, "mul");
}
inline Tensor scale(const Tensor& a, double s) {
    return map(a, [s](double x) { return x * s; });
}
inline Tensor exp(const Tensor& a) {
    return map(a, [](double x) { return std::exp(x); });
}
inline Tensor sqrt(const Tensor& a) {
    return map(a, [](double x) { return std::sqrt(x); });
}
inline Tensor rsqrt(const Tensor& a, double eps = 0.0) {
    return map(a, [eps](double x) { return 1.0 / std::sqrt(x + eps); });
}

// y += alpha * x
inline void axpy(double alpha, const Tensor& x, Tensor& y) {
    detail::require_same_shape(x, y, "axpy");
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

// Mean over each row -> rows x 1.
inline Tensor row_mean(const Tensor& a) {
    Tensor out(a.rows(), 1);
    if (a.cols() == 0) return out;
    for (std::size_t r = 0; r < a.rows(); ++r) {
        double s = 0.0;
        for (double x : a.row(r)) s += x;
        out[r] = s / static_cast<double>(a.cols());
    }
    return out;
}

// Mean over each column -> cols x 1.
inline Tensor col_mean(const Tensor& a) {
    Tensor out(a.cols(), 1);
    if (a.rows() == 0) return out;
    for (std::size_t r = 0; r < a.rows(); ++r) {
        const double* p = a.data() + r * a.cols();
        for (std::size_t c = 0; c < a.cols(); ++c) out[c] += p[c];
    }
    for (std::size_t c = 0; c < a.cols(); ++c) out[c] /= static_cast<double>(a.rows());
    return out;
}

inline double mean(std::span<const double> x) {
    if (x.empty()) return 0.0;
    double s = 0.0;
    for (double v : x) s += v;
    return s / static_cast<double>(x.size());
}
inline double mean(const Tensor& a) { return mean(a.flat()); }

// Population standard deviation, two-pass.
inline double stddev(std::span<const double> x) {
    if (x.empty()) return 0.0;
    const double m = mean(x);
    double s = 0.0;
    for (double v : x) s += (v - m) * (v - m);
    return std::sqrt(s / static_cast<double>(x.size()));
}
inline double stddev(const Tensor& a) { return stddev(a.flat()); }

inline double sum_squares(std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    return s;
}

inline bool all_finite(std::span<const double> x) {
    return std::all_of(x.begin(), x.end(), [](double v) { return std::isfinite(v); });
}
inline bool all_finite(const Tensor& a) { return all_finite(a.flat()); }

}  // namespace mulo
