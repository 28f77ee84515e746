#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "mulo/checkpoint.hpp"

using namespace mulo;

namespace {

std::filesystem::path tmp(const char* name) { return std::filesystem::temp_directory_path() / name; }

Checkpoint sample() {
    Checkpoint ck;
    ck.flat = flatten(init_lo(RngStream(3)));
    ck.meta.mode = ParamMode::SP;
    ck.meta.meta_horizon = 200;
    ck.meta.outer_step = 42;
    ck.meta.lo.rule.lambda1 = 0.005;
    return ck;
}

}  // namespace

TEST(Checkpoint, RoundTrip) {
    const auto p = tmp("mulo_ck.mulo");
    const Checkpoint ck = sample();
    save_checkpoint(p, ck);
    const Checkpoint back = load_checkpoint(p);
    EXPECT_EQ(back.flat, ck.flat);
    EXPECT_EQ(back.meta.mode, ParamMode::SP);
    EXPECT_EQ(back.meta.meta_horizon, 200u);
    EXPECT_EQ(back.meta.outer_step, 42u);
    EXPECT_EQ(back.meta.lo.rule.lambda1, 0.005);
    EXPECT_EQ(flatten(back.weights()), ck.flat);
    EXPECT_TRUE(std::filesystem::exists(sidecar_path(p)));
    std::filesystem::remove(p);
    std::filesystem::remove(sidecar_path(p));
}

TEST(Checkpoint, HeaderLayout) {
    const auto p = tmp("mulo_ck2.mulo");
    save_checkpoint(p, sample());
    std::ifstream in(p, std::ios::binary);
    char magic[4];
    std::uint32_t version;
    std::uint64_t n;
    in.read(magic, 4);
    in.read(reinterpret_cast<char*>(&version), 4);
    in.read(reinterpret_cast<char*>(&n), 8);
    EXPECT_EQ(std::string(magic, 4), "MULO");
    EXPECT_EQ(version, 1u);
    EXPECT_EQ(n, lo_flat_size());
    EXPECT_EQ(std::filesystem::file_size(p), 16 + 8 * lo_flat_size());
}

TEST(Checkpoint, CorruptFilesRejected) {
    const auto p = tmp("mulo_ck3.mulo");
    save_checkpoint(p, sample());
    std::filesystem::resize_file(p, std::filesystem::file_size(p) - 8);
    EXPECT_THROW(load_checkpoint(p), FormatError);
    {
        std::ofstream out(p, std::ios::binary);
        out << "NOPE and more bytes";
    }
    EXPECT_THROW(load_checkpoint(p), FormatError);
    EXPECT_THROW(load_checkpoint(tmp("does_not_exist.mulo")), std::runtime_error);
}

TEST(Checkpoint, ArchitectureMismatchRejected) {
    const auto p = tmp("mulo_ck4.mulo");
    Checkpoint ck = sample();
    ck.flat.pop_back();
    save_checkpoint(p, ck);
    EXPECT_THROW(load_checkpoint(p), FormatError);
}
