#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "mulo/features.hpp"

using namespace mulo;

namespace {

Tensor golden_grad(int t, std::size_t rows, std::size_t cols) {
    Tensor g(rows, cols);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c)
            g(r, c) = std::cos(0.7 * double(r) - 1.3 * double(c) + 0.5 * t) * (1.0 + 0.1 * t);
    return g;
}

Tensor golden_weights(std::size_t rows, std::size_t cols) {
    Tensor w(rows, cols);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) w(r, c) = std::sin(double(r) + 2.0 * double(c)) * 0.3;
    return w;
}

Tensor run_features(std::size_t rows, std::size_t cols, int steps, bool normalize) {
    FeatureConfig cfg;
    cfg.normalize = normalize;
    auto s = init_tensor_state(rows, cols);
    Tensor g;
    for (int t = 0; t < steps; ++t) {
        g = golden_grad(t, rows, cols);
        update_tensor_state(s, g, cfg);
    }
    return feature_matrix(s, golden_weights(rows, cols), g, cfg);
}

}  // namespace

TEST(Features, MatchesReferenceGolden) {
    std::ifstream in(std::string(MULO_TEST_DATA_DIR) + "/features.txt");
    ASSERT_TRUE(in) << "golden file missing";
    std::string line;
    int cases = 0;
    while (std::getline(in, line)) {
        std::istringstream hs(line);
        std::string tag;
        std::size_t rows, cols;
        int steps, norm;
        hs >> tag >> rows >> cols >> steps >> norm;
        ASSERT_EQ(tag, "case");
        const Tensor f = run_features(rows, cols, steps, norm != 0);
        ASSERT_EQ(f.cols(), kNumFeatures);
        ASSERT_EQ(f.rows(), rows * cols);
        for (std::size_t r = 0; r < rows * cols; ++r) {
            ASSERT_TRUE(std::getline(in, line));
            std::istringstream ls(line);
            for (std::size_t c = 0; c < kNumFeatures; ++c) {
                double want;
                ASSERT_TRUE(ls >> want) << "row " << r << " col " << c;
                EXPECT_NEAR(f(r, c), want, 1e-10 * std::max(1.0, std::abs(want)))
                    << "case " << cases << " row " << r << " col " << c;
            }
        }
        ++cases;
    }
    EXPECT_EQ(cases, 4);
}

TEST(Features, InitStateIsZeroAndShaped) {
    OptimizeeParams p;
    Layer l;
    l.weight = Tensor(3, 5);
    l.bias = Tensor(5, 1);
    p.layers = {l};
    const auto st = init_state(p);
    ASSERT_EQ(st.tensors.size(), 2u);
    EXPECT_EQ(st.tensors[0].v.rows(), 3u);
    EXPECT_EQ(st.tensors[0].row[0].rows(), 3u);
    EXPECT_EQ(st.tensors[0].col[2].rows(), 5u);
    EXPECT_EQ(st.tensors[1].col[0].rows(), 1u);
    for (const auto& m : st.tensors[0].m) EXPECT_EQ(m, Tensor(3, 5));
}

TEST(Features, OneStepEma) {
    FeatureConfig cfg;
    auto s = init_tensor_state(2, 2);
    Tensor g(2, 2);
    g.fill(1.0);
    update_tensor_state(s, g, cfg);
    for (double v : s.m[0].flat()) EXPECT_NEAR(v, 0.1, 1e-15);
    auto s2 = init_tensor_state(2, 2);
    g.fill(2.0);
    update_tensor_state(s2, g, cfg);
    for (double v : s2.v.flat()) EXPECT_NEAR(v, 0.004, 1e-15);
}

TEST(Features, GeometricClosedForm) {
    FeatureConfig cfg;
    auto s = init_tensor_state(3, 2);
    Tensor g(3, 2);
    g.fill(-0.7);
    for (int t = 0; t < 10; ++t) update_tensor_state(s, g, cfg);
    for (int i = 0; i < 3; ++i) {
        const double want = (1.0 - std::pow(cfg.momentum_betas[i], 10)) * -0.7;
        for (double v : s.m[i].flat()) EXPECT_NEAR(v, want, 1e-14);
    }
}

TEST(Features, DegenerateZeroState) {
    FeatureConfig cfg;
    cfg.normalize = false;
    const auto s = init_tensor_state(2, 3);
    const Tensor f = feature_matrix(s, Tensor(2, 3), Tensor(2, 3), cfg);
    for (std::size_t r = 0; r < f.rows(); ++r) {
        for (std::size_t c = 0; c <= 9; ++c) {
            const double want = c == 8 ? 1e4 : 0.0;
            EXPECT_NEAR(f(r, c), want, 1e-9) << c;
        }
        for (std::size_t c = 18; c <= 23; ++c) EXPECT_NEAR(f(r, c), 1e4, 1e-9);
    }
}

TEST(Features, NormalizedColumnsHaveUnitRms) {
    const Tensor f = run_features(6, 5, 4, true);
    for (std::size_t c = 0; c < kNumFeatures; ++c) {
        double ss = 0;
        for (std::size_t r = 0; r < f.rows(); ++r) ss += f(r, c) * f(r, c);
        EXPECT_NEAR(std::sqrt(ss / double(f.rows())), 1.0, 1e-10) << c;
    }
}

TEST(Features, AllFiniteOnExtremeInputs) {
    FeatureConfig cfg;
    auto s = init_tensor_state(4, 3);
    Tensor g(4, 3);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = (i % 2 ? 1e150 : -1e-150);
    update_tensor_state(s, g, cfg);
    EXPECT_TRUE(all_finite(feature_matrix(s, g, g, cfg)));
    Tensor z(4, 3);
    auto s0 = init_tensor_state(4, 3);
    update_tensor_state(s0, z, cfg);
    EXPECT_TRUE(all_finite(feature_matrix(s0, z, z, cfg)));
}

TEST(Features, RowPermutationPermutesFeatures) {
    FeatureConfig cfg;
    const std::size_t rows = 4, cols = 3;
    const std::vector<std::size_t> perm{2, 0, 3, 1};
    auto permute = [&](const Tensor& t) {
        Tensor o(t.rows(), t.cols());
        for (std::size_t r = 0; r < t.rows(); ++r)
            for (std::size_t c = 0; c < t.cols(); ++c) o(r, c) = t(perm[r], c);
        return o;
    };
    auto a = init_tensor_state(rows, cols), b = init_tensor_state(rows, cols);
    Tensor g;
    for (int t = 0; t < 3; ++t) {
        g = golden_grad(t, rows, cols);
        update_tensor_state(a, g, cfg);
        update_tensor_state(b, permute(g), cfg);
    }
    const Tensor w = golden_weights(rows, cols);
    const Tensor fa = feature_matrix(a, w, g, cfg), fb = feature_matrix(b, permute(w), permute(g), cfg);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c)
            for (std::size_t k = 0; k < kNumFeatures; ++k)
                EXPECT_NEAR(fb(r * cols + c, k), fa(perm[r] * cols + c, k), 1e-12 * std::max(1.0, std::abs(fa(perm[r] * cols + c, k))));
}

TEST(Features, VectorTensorsWork) {
    const Tensor f = run_features(5, 1, 3, true);
    EXPECT_EQ(f.rows(), 5u);
    EXPECT_TRUE(all_finite(f));
}

TEST(Features, ConfigValidation) {
    FeatureConfig cfg;
    cfg.momentum_betas[1] = 1.0;
    EXPECT_THROW(validate(cfg), std::invalid_argument);
    FeatureConfig e;
    e.eps = 0;
    EXPECT_THROW(validate(e), std::invalid_argument);
    EXPECT_NO_THROW(validate(FeatureConfig{}));
}

TEST(Features, ShapeMismatchThrows) {
    FeatureConfig cfg;
    auto s = init_tensor_state(2, 2);
    EXPECT_THROW(update_tensor_state(s, Tensor(2, 3), cfg), DimensionError);
}
