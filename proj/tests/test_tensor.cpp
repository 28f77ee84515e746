#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "mulo/rng.hpp"
#include "mulo/tensor.hpp"

using namespace mulo;

namespace {

Tensor naive_matmul(const Tensor& a, const Tensor& b) {
    Tensor c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < b.cols(); ++j) {
            double s = 0;
            for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
            c(i, j) = s;
        }
    return c;
}

Tensor transpose(const Tensor& a) {
    Tensor t(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
    return t;
}

void expect_close(const Tensor& a, const Tensor& b, double rel) {
    ASSERT_TRUE(a.same_shape(b));
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_LE(std::abs(a[i] - b[i]), rel * std::max(1.0, std::abs(b[i]))) << "index " << i;
    }
}

}  // namespace

TEST(Tensor, MatmulIdentity) {
    const Tensor r = matmul(Tensor::from_rows({{1, 0}, {0, 1}}), Tensor::from_rows({{3}, {4}}));
    EXPECT_EQ(r, Tensor::from_rows({{3}, {4}}));
}

TEST(Tensor, MatmulRowByColumn) {
    const Tensor r = matmul(Tensor::from_rows({{1, 2}}), Tensor::from_rows({{3}, {4}}));
    ASSERT_EQ(r.rows(), 1u);
    ASSERT_EQ(r.cols(), 1u);
    EXPECT_EQ(r(0, 0), 11.0);
}

TEST(Tensor, MatmulMatchesTripleLoop) {
    RngStream rng(3);
    const Tensor a = gaussian(5, 7, 0, 1, rng), b = gaussian(7, 3, 0, 1, rng);
    expect_close(matmul(a, b), naive_matmul(a, b), 1e-12);
}

TEST(Tensor, TransposedProductsMatchOracle) {
    RngStream rng(4);
    const Tensor a = gaussian(6, 4, 0, 1, rng), b = gaussian(6, 5, 0, 1, rng), c = gaussian(3, 4, 0, 1, rng);
    expect_close(matmul_tn(a, b), naive_matmul(transpose(a), b), 1e-12);
    expect_close(matmul_nt(a, c), naive_matmul(a, transpose(c)), 1e-12);
}

TEST(Tensor, ShapeMismatchThrows) {
    EXPECT_THROW(matmul(Tensor(2, 3), Tensor(2, 3)), DimensionError);
    EXPECT_THROW(add(Tensor(2, 3), Tensor(3, 2)), DimensionError);
    EXPECT_THROW(matmul_tn(Tensor(2, 3), Tensor(3, 3)), DimensionError);
}

TEST(Tensor, FromRowsRejectsRagged) { EXPECT_THROW(Tensor::from_rows({{1, 2}, {3}}), DimensionError); }

TEST(Tensor, ElementwiseMatchesScalarMath) {
    RngStream rng(9);
    const Tensor a = map(gaussian(8, 8, 0, 1, rng), [](double v) { return std::abs(v) + 0.1; });
    const Tensor b = gaussian(8, 8, 0, 1, rng);
    const Tensor s = add(a, b), m = mul(a, b), e = exp(b), q = sqrt(a), r = rsqrt(a, 1e-8), d = sub(a, b);
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_DOUBLE_EQ(s[i], a[i] + b[i]);
        EXPECT_DOUBLE_EQ(d[i], a[i] - b[i]);
        EXPECT_DOUBLE_EQ(m[i], a[i] * b[i]);
        EXPECT_DOUBLE_EQ(e[i], std::exp(b[i]));
        EXPECT_DOUBLE_EQ(q[i], std::sqrt(a[i]));
        EXPECT_DOUBLE_EQ(r[i], 1.0 / std::sqrt(a[i] + 1e-8));
    }
}

TEST(Tensor, ReductionsMatchTwoPassReference) {
    RngStream rng(11);
    const Tensor a = gaussian(13, 9, 2.0, 3.0, rng);
    const Tensor rm = row_mean(a), cm = col_mean(a);
    ASSERT_EQ(rm.rows(), 13u);
    ASSERT_EQ(cm.rows(), 9u);
    for (std::size_t r = 0; r < 13; ++r) {
        double s = 0;
        for (std::size_t c = 0; c < 9; ++c) s += a(r, c);
        EXPECT_NEAR(rm[r], s / 9, 1e-12 * std::abs(s / 9) + 1e-15);
    }
    for (std::size_t c = 0; c < 9; ++c) {
        double s = 0;
        for (std::size_t r = 0; r < 13; ++r) s += a(r, c);
        EXPECT_NEAR(cm[c], s / 13, 1e-12 * std::abs(s / 13) + 1e-15);
    }
    double mu = 0;
    for (double v : a.flat()) mu += v;
    mu /= static_cast<double>(a.size());
    double ss = 0;
    for (double v : a.flat()) ss += (v - mu) * (v - mu);
    const double sd = std::sqrt(ss / static_cast<double>(a.size()));
    EXPECT_NEAR(mean(a), mu, 1e-12 * std::abs(mu));
    EXPECT_NEAR(stddev(a), sd, 1e-12 * sd);
}

TEST(Tensor, AxpyAndScale) {
    Tensor y = Tensor::from_rows({{1, 2}});
    axpy(2.0, Tensor::from_rows({{3, 4}}), y);
    EXPECT_EQ(y, Tensor::from_rows({{7, 10}}));
    EXPECT_EQ(scale(y, 0.5), Tensor::from_rows({{3.5, 5}}));
}

TEST(Tensor, AllFinite) {
    Tensor t(2, 2);
    EXPECT_TRUE(all_finite(t));
    t(1, 1) = std::nan("");
    EXPECT_FALSE(all_finite(t));
}
