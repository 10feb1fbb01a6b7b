#include <gtest/gtest.h>

#include <cstdlib>
#include <random>
#include <stdexcept>
#include <vector>

#include "amlmc/stats.hpp"

using namespace amlmc;

TEST(RunningStats, MatchesTwoPass) {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> z(3.0, 2.0);
    std::vector<double> xs(1000);
    for (auto& x : xs) x = z(rng);
    RunningStats st;
    for (double x : xs) st.add(x);
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= xs.size();
    double var = 0.0;
    for (double x : xs) var += (x - mean) * (x - mean);
    var /= xs.size() - 1;
    EXPECT_NEAR(st.mean, mean, 1e-12);
    EXPECT_NEAR(st.variance(), var, 1e-10);
    EXPECT_NEAR(st.std_error(), std::sqrt(var / xs.size()), 1e-12);
}

TEST(RunningStats, MergeEqualsSequential) {
    std::mt19937_64 rng(2);
    std::normal_distribution<double> z;
    RunningStats all;
    RunningStats a;
    RunningStats b;
    for (int i = 0; i < 777; ++i) {
        const double x = z(rng);
        all.add(x);
        (i < 300 ? a : b).add(x);
    }
    a.merge(b);
    EXPECT_EQ(a.n, all.n);
    EXPECT_NEAR(a.mean, all.mean, 1e-14);
    EXPECT_NEAR(a.variance(), all.variance(), 1e-12);
    RunningStats empty;
    empty.merge(a);
    EXPECT_EQ(empty.mean, a.mean);
    EXPECT_EQ(RunningStats{}.variance(), 0.0);
}

TEST(VectorStats, ElementwiseAndArgmax) {
    VectorStats v;
    v.add({1.0, 5.0, 2.0});
    v.add({3.0, 1.0, 2.0});
    VectorStats w;
    w.add({2.0, 3.0, 8.0});
    v.merge(w);
    EXPECT_EQ(v.n, 3u);
    EXPECT_DOUBLE_EQ(v.mean[0], 2.0);
    EXPECT_DOUBLE_EQ(v.mean[1], 3.0);
    EXPECT_DOUBLE_EQ(v.mean[2], 4.0);
    EXPECT_EQ(v.argmax(), 2u);
    EXPECT_DOUBLE_EQ(v.variance(0), 1.0);
    EXPECT_THROW(v.add({1.0}), std::invalid_argument);
}

TEST(MapBlocks, ResultsIndependentOfWorkers) {
    auto run = [](unsigned workers) {
        auto blocks = map_blocks<RunningStats>(0, 1000, workers,
                                               [](std::uint64_t lo, std::uint64_t hi, RunningStats& st) {
                                                   for (auto i = lo; i < hi; ++i) {
                                                       st.add(std::sin(static_cast<double>(i)));
                                                   }
                                               });
        RunningStats total;
        for (const auto& b : blocks) total.merge(b);
        return total;
    };
    const auto ref = run(1);
    EXPECT_EQ(ref.n, 1000u);
    for (unsigned w : {2u, 4u, 7u, 16u}) {
        const auto got = run(w);
        EXPECT_EQ(got.mean, ref.mean);
        EXPECT_EQ(got.m2, ref.m2);
    }
}

TEST(MapBlocks, BlockLayoutAndEmptyRange) {
    std::vector<std::pair<std::uint64_t, std::uint64_t>> seen;
    auto blocks = map_blocks<std::pair<std::uint64_t, std::uint64_t>>(
        10, 150, 3, [](std::uint64_t lo, std::uint64_t hi, auto& out) { out = {lo, hi}; });
    ASSERT_EQ(blocks.size(), 3u);
    EXPECT_EQ(blocks[0], std::make_pair(std::uint64_t{10}, std::uint64_t{74}));
    EXPECT_EQ(blocks[2], std::make_pair(std::uint64_t{138}, std::uint64_t{150}));
    EXPECT_TRUE((map_blocks<int>(5, 5, 4, [](auto, auto, int&) {})).empty());
}

TEST(MapBlocks, RethrowsFirstFailureInBlockOrder) {
    auto fn = [](std::uint64_t lo, std::uint64_t, int&) {
        if (lo >= 128) throw std::runtime_error("block " + std::to_string(lo));
    };
    try {
        map_blocks<int>(0, 640, 4, fn);
        FAIL() << "expected an exception";
    } catch (const std::runtime_error& e) {
        EXPECT_STREQ(e.what(), "block 128");
    }
}

TEST(DefaultWorkers, HonorsEnvironmentCap) {
    ::setenv("AMLMC_MAX_WORKERS", "1", 1);
    EXPECT_EQ(default_workers(), 1u);
    ::setenv("AMLMC_MAX_WORKERS", "garbage", 1);
    EXPECT_GE(default_workers(), 1u);
    ::unsetenv("AMLMC_MAX_WORKERS");
    EXPECT_GE(default_workers(), 1u);
}
