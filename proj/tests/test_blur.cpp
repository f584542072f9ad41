#include <gtest/gtest.h>

#include <cmath>
#include <memory>

#include "ffp/blur.hpp"
#include "oracles.hpp"

using namespace ffp;

namespace {

std::shared_ptr<const Topology> window(int d, int k) {
    return std::make_shared<const Topology>(Topology::box(d, k, Mode::window));
}

Configuration with(const Topology& t, std::initializer_list<Coord> cs) {
    Configuration c(t.size());
    for (const auto& x : cs) c.set(t.site(x), true);
    return c;
}

} // namespace

TEST(EpsilonFor, ReferenceValues) {
    EXPECT_NEAR(epsilon_for(1, 6), 0.0425596, 5e-8);
    EXPECT_NEAR(epsilon_for(1, 6, 0.5), 0.0212798, 5e-8);
    EXPECT_NEAR(epsilon_for(1, 6), -std::log(23.0 / 24.0), 1e-15);
}

TEST(EpsilonFor, StrictBoundAndMonotone) {
    double prev = 1.0;
    for (int m = 1; m <= 200; ++m) {
        const double e = epsilon_for(m, 4);
        EXPECT_LT(1.0 - std::exp(-e), 1.0 / (16.0 * m));
        EXPECT_LT(e, prev);
        prev = e;
    }
    EXPECT_LT(epsilon_for(1e9, 4), 1e-9);
}

TEST(EpsilonFor, Errors) {
    EXPECT_THROW(epsilon_for(0.5, 6), InvalidParameter);
    EXPECT_THROW(epsilon_for(1, 0.5), InvalidParameter);
    EXPECT_THROW(epsilon_for(1, 6, 0.0), InvalidParameter);
    EXPECT_THROW(epsilon_for(1, 6, 1.5), InvalidParameter);
}

TEST(InitBlur, VacantConfigurationFlagsBoundaryOnly) {
    auto t = window(2, 4);
    const SiteSet s = t->box_sites(2);
    const auto b = init_blur(Configuration(t->size()), *t, s, 0.0);
    EXPECT_EQ(SiteSet(b.flagged_sites()), boundary(*t, s));
    EXPECT_EQ(b.flagged_count(), 20u);
}

TEST(InitBlur, PathFromBoundaryIsFlagged) {
    auto t = window(2, 4);
    const SiteSet s = t->box_sites(2);
    // (3,0) is in N(S); path runs inward to the origin
    const auto c = with(*t, {{3, 0}, {2, 0}, {1, 0}, {0, 0}, {-1, -1}});
    const auto b = init_blur(c, *t, s, 0.0);
    for (Coord x : std::vector<Coord>{{2, 0}, {1, 0}, {0, 0}}) EXPECT_TRUE(b.blurred(t->site(x)));
    EXPECT_FALSE(b.blurred(t->site({-1, -1})));
}

TEST(InitBlur, ClusterAdjacentToBoundaryIsFlagged) {
    auto t = window(2, 4);
    const SiteSet s = t->box_sites(2);
    // (2,1) is adjacent to the N(S) site (3,1) but the latter is vacant
    const auto c = with(*t, {{2, 1}, {1, 1}});
    const auto b = init_blur(c, *t, s, 0.0);
    EXPECT_TRUE(b.blurred(t->site({1, 1})));
}

TEST(InitBlur, WindowTooSmall) {
    auto t = window(2, 2);
    EXPECT_THROW(init_blur(Configuration(t->size()), *t, t->box_sites(2), 0.0), InvalidParameter);
}

TEST(UpdateBlur, GrowthJoiningFlaggedSite) {
    auto t = window(2, 4);
    const SiteSet s = t->box_sites(2);
    Engine e(t, {1.0}, Rng(1), with(*t, {{0, 0}, {1, 0}, {2, 1}}));
    auto b = init_blur(e.configuration(), *t, s, 0.0);
    EXPECT_TRUE(b.blurred(t->site({2, 1})));
    EXPECT_FALSE(b.blurred(t->site({0, 0})));
    const Event g{0.1, t->site({2, 0}), EventKind::growth};
    e.apply_event(g);
    update_blur(b, e, g);
    EXPECT_TRUE(b.blurred(t->site({0, 0})));
    EXPECT_TRUE(b.blurred(t->site({1, 0})));
    EXPECT_TRUE(b.blurred(t->site({2, 0})));
}

TEST(UpdateBlur, BurnKeepsFlags) {
    auto t = window(2, 4);
    const SiteSet s = t->box_sites(2);
    Engine e(t, {1.0}, Rng(1), with(*t, {{2, 0}, {1, 0}}));
    auto b = init_blur(e.configuration(), *t, s, 0.0);
    const std::size_t before = b.flagged_count();
    const Event f{0.1, t->site({1, 0}), EventKind::ignition};
    e.apply_event(f);
    update_blur(b, e, f);
    EXPECT_FALSE(e.configuration().occupied(t->site({1, 0})));
    EXPECT_TRUE(b.blurred(t->site({1, 0})));
    EXPECT_EQ(b.flagged_count(), before);
}

TEST(UpdateBlur, LocalGrowthLeavesFlags) {
    auto t = window(2, 4);
    const SiteSet s = t->box_sites(2);
    Engine e(t, {1.0}, Rng(1), with(*t, {{0, 0}}));
    auto b = init_blur(e.configuration(), *t, s, 0.0);
    const auto before = b.flagged_sites();
    const Event g{0.1, t->site({0, 1}), EventKind::growth};
    e.apply_event(g);
    update_blur(b, e, g);
    EXPECT_EQ(b.flagged_sites(), before);
}

TEST(UpdateBlur, InconsistentEventIsRejected) {
    auto t = window(2, 4);
    BlurState b(*t, t->box_sites(1), 0.0);
    Configuration c(t->size());
    EXPECT_THROW(update_blur(b, *t, Event{0.0, t->origin(), EventKind::growth}, c), ConsistencyError);
    c.set(t->origin(), true);
    EXPECT_THROW(update_blur(b, *t, Event{0.0, t->origin(), EventKind::ignition}, c), ConsistencyError);
}

// Closure property and monotonicity along random trajectories.
TEST(BlurProperties, ClosureAndMonotonicityAlongTrajectories) {
    for (double lambda : {0.3, 1.0, 3.0}) {
        auto t = window(2, 5);
        Rng init(5);
        Engine e(t, {lambda}, Rng(9, 0, 0), oracle::random_config(t->size(), 0.4, init));
        auto b = init_blur(e.configuration(), *t, t->box_sites(2), 0.0);
        ASSERT_EQ(closure_violations(b, *t, e.configuration()), 0u);
        std::size_t prev = b.flagged_count();
        auto flags = b.flagged_sites();
        for (int i = 0; i < 5000; ++i) {
            const Event ev = e.next_event();
            e.apply_event(ev);
            update_blur(b, e, ev);
            ASSERT_EQ(closure_violations(b, *t, e.configuration()), 0u) << "event " << i;
            ASSERT_GE(b.flagged_count(), prev);
            prev = b.flagged_count();
            auto now = b.flagged_sites();
            ASSERT_TRUE(std::includes(now.begin(), now.end(), flags.begin(), flags.end()));
            flags = std::move(now);
        }
    }
}

// Replaying with different exterior configuration and exterior events gives
// the same blur, and unblurred sites of S agree.
TEST(BlurProperties, Locality) {
    auto t = window(2, 5);
    const SiteSet s = t->box_sites(2);
    const SiteSet sbar = closure(*t, s);
    std::vector<SiteId> outside;
    for (SiteId x = 0; x < t->size(); ++x)
        if (!sbar.contains(x)) outside.push_back(x);
    for (int trial = 0; trial < 20; ++trial) {
        Rng rng(100 + trial);
        auto ca = oracle::random_config(t->size(), 0.5, rng);
        auto cb = ca;
        for (SiteId x : outside) cb.set(x, rng.uniform() < 0.5);
        Engine a(t, {1.0}, Rng(1), ca), b(t, {1.0}, Rng(2), cb);
        auto ba = init_blur(ca, *t, s, 0.0), bb = init_blur(cb, *t, s, 0.0);
        EventStream stream(t->size(), 1.0, Rng(300 + trial));
        double now = 0.0;
        for (int i = 0; i < 3000; ++i) {
            Event ea = stream.next(now);
            now = ea.time;
            Event eb = ea;
            if (!sbar.contains(ea.site)) {
                eb.site = outside[rng.below(outside.size())];
                eb.kind = rng.uniform() < 0.5 ? EventKind::growth : EventKind::ignition;
            }
            a.apply_event(ea);
            update_blur(ba, a, ea);
            b.apply_event(eb);
            update_blur(bb, b, eb);
            ASSERT_TRUE(ba == bb) << "trial " << trial << " event " << i;
            for (SiteId x : s)
                if (!ba.blurred(x)) {
                    ASSERT_EQ(a.configuration().occupied(x), b.configuration().occupied(x));
                }
        }
    }
}

TEST(BlurDecay, ZeroAtTimeZeroFromVacant) {
    BlurDecayParams p;
    p.init = InitKind::vacant;
    p.replicas = 50;
    p.L_list = {1, 2, 3};
    p.t_list = {0.0};
    for (const auto& r : blur_decay_experiment(p)) {
        EXPECT_EQ(r.flagged, 0u);
        EXPECT_EQ(r.p_hat, 0.0);
    }
}

TEST(BlurDecay, NondecreasingInTime) {
    BlurDecayParams p;
    p.init = InitKind::bernoulli;
    p.init_p = 0.5;
    p.replicas = 200;
    p.L_list = {1};
    p.t_list = {0.0, 0.5, 1.0, 2.0};
    const auto rows = blur_decay_experiment(p);
    // same replicas at every t, and flags are monotone, so counts never drop
    for (std::size_t i = 1; i < rows.size(); ++i) EXPECT_GE(rows[i].flagged, rows[i - 1].flagged);
}

TEST(BlurDecay, CapacityAndParameterErrors) {
    BlurDecayParams p;
    p.max_sites = 50;
    EXPECT_THROW(blur_decay_experiment(p), CapacityError);
    p.max_sites = 20000;
    p.L_list = {};
    EXPECT_THROW(blur_decay_experiment(p), InvalidParameter);
}

TEST(BlurDecay, DeterministicAcrossJobs) {
    BlurDecayParams p;
    p.replicas = 64;
    p.L_list = {1, 2};
    p.t_list = {0.02};
    p.jobs = 1;
    const auto a = blur_decay_experiment(p);
    p.jobs = 3;
    const auto b = blur_decay_experiment(p);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].flagged, b[i].flagged);
}
