#include <gtest/gtest.h>

#include <cmath>

#include "mulo/parametrization.hpp"

using namespace mulo;

TEST(Parametrization, InitStd) {
    EXPECT_EQ(init_std(LayerRole::Hidden, {256, 256}, ParamMode::MuP), 0.0625);
    EXPECT_EQ(init_std(LayerRole::Output, {1024, 10}, ParamMode::MuP), 1.0);
    EXPECT_EQ(init_std(LayerRole::Hidden, {256, 256}, ParamMode::SP), 0.0625);
    EXPECT_EQ(init_std(LayerRole::Output, {1024, 10}, ParamMode::SP), 1.0 / 32.0);
    EXPECT_EQ(init_std(LayerRole::Input, {64, 128}, ParamMode::MuP), 0.125);
}

TEST(Parametrization, InitVarianceReading) {
    EXPECT_DOUBLE_EQ(init_std(LayerRole::Hidden, {256, 256}, ParamMode::MuP, InitReading::Variance), 0.25);
}

TEST(Parametrization, ForwardMultiplier) {
    EXPECT_EQ(forward_multiplier(LayerRole::Output, {128, 10}, ParamMode::MuP, {1, 1, 1}), 0.0078125);
    EXPECT_EQ(forward_multiplier(LayerRole::Output, {128, 10}, ParamMode::MuP, {1, 0.25, 1}), 0.001953125);
    EXPECT_EQ(forward_multiplier(LayerRole::Hidden, {77, 3}, ParamMode::SP, {2, 3, 4}), 1.0);
    EXPECT_EQ(forward_multiplier(LayerRole::Input, {77, 3}, ParamMode::MuP, {0.0625, 3, 4}), 0.0625);
    EXPECT_EQ(forward_multiplier(LayerRole::Hidden, {77, 3}, ParamMode::MuP, {2, 3, 4}), 1.0);
}

TEST(Parametrization, NonPositiveTunableThrows) {
    EXPECT_THROW(forward_multiplier(LayerRole::Input, {4, 4}, ParamMode::MuP, {0, 1, 1}), std::invalid_argument);
    EXPECT_THROW(forward_multiplier(LayerRole::Input, {4, 4}, ParamMode::SP, {1, -1, 1}), std::invalid_argument);
}

TEST(Parametrization, UpdateScale) {
    EXPECT_EQ(update_scale(LayerRole::Hidden, {128, 128}, ParamMode::MuP), 0.0078125);
    EXPECT_EQ(update_scale(LayerRole::Input, {3072, 128}, ParamMode::MuP), 1.0);
    EXPECT_EQ(update_scale(LayerRole::Hidden, {128, 128}, ParamMode::SP), 1.0);
    EXPECT_EQ(update_scale(LayerRole::Output, {128, 10}, ParamMode::MuP), 1.0);
}

TEST(Parametrization, HiddenScaleTimesFanInIsOne) {
    // exact for powers of two; otherwise 1/n is rounded, so allow one ulp
    for (std::size_t n = 1; n <= 1 << 20; n *= 2) {
        EXPECT_EQ(update_scale(LayerRole::Hidden, {n, n}, ParamMode::MuP) * static_cast<double>(n), 1.0) << n;
    }
    for (std::size_t n = 1; n <= 5000; n += 37) {
        EXPECT_NEAR(update_scale(LayerRole::Hidden, {n, n}, ParamMode::MuP) * static_cast<double>(n), 1.0, 2.3e-16) << n;
    }
}

TEST(Parametrization, DoublingWidthScalesMupQuantities) {
    for (std::size_t n : {16u, 128u, 1024u}) {
        const LayerGeometry g{n, n}, g2{2 * n, 2 * n};
        EXPECT_EQ(update_scale(LayerRole::Hidden, g2, ParamMode::MuP), update_scale(LayerRole::Hidden, g, ParamMode::MuP) / 2);
        EXPECT_EQ(forward_multiplier(LayerRole::Output, g2, ParamMode::MuP), forward_multiplier(LayerRole::Output, g, ParamMode::MuP) / 2);
        EXPECT_NEAR(init_std(LayerRole::Hidden, g2, ParamMode::MuP), init_std(LayerRole::Hidden, g, ParamMode::MuP) / std::sqrt(2.0), 1e-16);
    }
}

TEST(Parametrization, FanInOneAgrees) {
    for (auto role : {LayerRole::Input, LayerRole::Hidden, LayerRole::Output}) {
        EXPECT_EQ(init_std(role, {1, 1}, ParamMode::MuP), init_std(role, {1, 1}, ParamMode::SP));
        EXPECT_EQ(forward_multiplier(role, {1, 1}, ParamMode::MuP), forward_multiplier(role, {1, 1}, ParamMode::SP));
        EXPECT_EQ(update_scale(role, {1, 1}, ParamMode::MuP), update_scale(role, {1, 1}, ParamMode::SP));
    }
}

TEST(Parametrization, SpIsWidthAgnosticApartFromInit) {
    for (std::size_t n : {16u, 256u, 4096u}) {
        for (auto role : {LayerRole::Input, LayerRole::Hidden, LayerRole::Output}) {
            EXPECT_EQ(forward_multiplier(role, {n, n}, ParamMode::SP), 1.0);
            EXPECT_EQ(update_scale(role, {n, n}, ParamMode::SP), 1.0);
        }
    }
}

TEST(Parametrization, Roles) {
    EXPECT_EQ(role_of_layer(0, 3), LayerRole::Input);
    EXPECT_EQ(role_of_layer(1, 3), LayerRole::Hidden);
    EXPECT_EQ(role_of_layer(2, 3), LayerRole::Output);
    EXPECT_EQ(role_of_layer(1, 2), LayerRole::Output);
    EXPECT_THROW(role_of_layer(0, 1), std::invalid_argument);
}

TEST(Parametrization, InvalidGeometryThrows) {
    EXPECT_THROW(init_std(LayerRole::Hidden, {0, 4}, ParamMode::SP), std::invalid_argument);
    EXPECT_THROW(update_scale(LayerRole::Hidden, {4, 0}, ParamMode::SP), std::invalid_argument);
}

TEST(Parametrization, ParseMode) {
    EXPECT_EQ(parse_param_mode("mup"), ParamMode::MuP);
    EXPECT_EQ(parse_param_mode("sp"), ParamMode::SP);
    EXPECT_THROW(parse_param_mode("ntk"), std::invalid_argument);
    EXPECT_EQ(to_string(ParamMode::MuP), "mup");
}
