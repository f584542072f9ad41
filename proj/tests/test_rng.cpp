#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "ffp/rng.hpp"
#include "ffp/stats.hpp"

using ffp::Rng;

// Known-answer vectors published with Random123 for Philox4x32-10.
TEST(Philox, KnownAnswerZero) {
    const auto r = ffp::philox4x32({0, 0, 0, 0}, {0, 0});
    EXPECT_EQ(r[0], 0x6627e8d5u);
    EXPECT_EQ(r[1], 0xe169c58du);
    EXPECT_EQ(r[2], 0xbc57ac4cu);
    EXPECT_EQ(r[3], 0x9b00dbd8u);
}

TEST(Philox, KnownAnswerOnes) {
    const auto r = ffp::philox4x32({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu});
    EXPECT_EQ(r[0], 0x408f276du);
    EXPECT_EQ(r[1], 0x41c83b0eu);
    EXPECT_EQ(r[2], 0xa20bc7c6u);
    EXPECT_EQ(r[3], 0x6d5451fdu);
}

TEST(Philox, KnownAnswerPi) {
    const auto r = ffp::philox4x32({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u});
    EXPECT_EQ(r[0], 0xd16cfe09u);
    EXPECT_EQ(r[1], 0x94fdccebu);
    EXPECT_EQ(r[2], 0x5001e420u);
    EXPECT_EQ(r[3], 0x24126ea1u);
}

TEST(Rng, SameKeySameStream) {
    Rng a(42, 3, 7), b(42, 3, 7);
    for (int i = 0; i < 1000; ++i) ASSERT_EQ(a(), b());
}

TEST(Rng, DistinctKeysDiffer) {
    std::set<std::uint64_t> first;
    for (std::uint32_t rep = 0; rep < 4; ++rep)
        for (std::uint32_t st = 0; st < 4; ++st) first.insert(Rng(1, rep, st)());
    first.insert(Rng(2, 0, 0)());
    EXPECT_EQ(first.size(), 17u);
}

TEST(Rng, SplitMatchesDirectConstruction) {
    Rng parent(9, 2, 0);
    parent();
    Rng child = parent.split(5);
    Rng direct(9, 2, 5);
    for (int i = 0; i < 10; ++i) EXPECT_EQ(child(), direct());
}

TEST(Rng, UniformInUnitInterval) {
    Rng r(5);
    double sum = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double u = r.uniform();
        ASSERT_GE(u, 0.0);
        ASSERT_LT(u, 1.0);
        sum += u;
    }
    // mean 1/2, sd of the mean sqrt(1/12/n)
    EXPECT_NEAR(sum / n, 0.5, 4.0 * std::sqrt(1.0 / 12.0 / n));
}

TEST(Rng, BelowIsUnbiasedAndInRange) {
    Rng r(6);
    std::vector<int> hist(7, 0);
    const int n = 70000;
    for (int i = 0; i < n; ++i) {
        const auto v = r.below(7);
        ASSERT_LT(v, 7u);
        ++hist[v];
    }
    for (int h : hist) EXPECT_NEAR(h, n / 7.0, 4.0 * std::sqrt(n * (1.0 / 7) * (6.0 / 7)));
}

TEST(Rng, ExponentialMean) {
    Rng r(7);
    const int n = 100000;
    double sum = 0.0;
    for (int i = 0; i < n; ++i) sum += r.exponential(18.0);
    // sd of an Exp(18) sample mean is (1/18)/sqrt(n)
    EXPECT_NEAR(sum / n, 1.0 / 18.0, 4.0 * (1.0 / 18.0) / std::sqrt(n));
}

TEST(Rng, PositionAdvancesPerBlock) {
    Rng r(1);
    EXPECT_EQ(r.position(), 0u);
    r();
    EXPECT_EQ(r.position(), 1u);
    r();
    EXPECT_EQ(r.position(), 1u);
    r();
    EXPECT_EQ(r.position(), 2u);
}

TEST(Stats, WilsonInterval) {
    const auto ci = ffp::wilson_interval(0, 100);
    EXPECT_DOUBLE_EQ(ci.low, 0.0);
    EXPECT_GT(ci.high, 0.0);
    // textbook value for 10/100 at 95%: [0.0552, 0.1744]
    const auto c2 = ffp::wilson_interval(10, 100);
    EXPECT_NEAR(c2.low, 0.0552, 5e-4);
    EXPECT_NEAR(c2.high, 0.1744, 5e-4);
}

TEST(Stats, MeanAndSe) {
    const std::vector<double> xs{1, 2, 3, 4};
    const auto ms = ffp::mean_and_se(xs);
    EXPECT_DOUBLE_EQ(ms.mean, 2.5);
    EXPECT_NEAR(ms.se, std::sqrt(5.0 / 3.0 / 4.0), 1e-15);
}
