#include <gtest/gtest.h>

#include <memory>

#include "ffp/exact.hpp"
#include "ffp/scan.hpp"

using namespace ffp;

TEST(MuScan, RowsPairsAndNoiseFloor) {
    MuScanParams p;
    p.k_list = {2, 1};
    p.horizon = 4000;
    const auto r = mu_convergence_scan(p);
    ASSERT_EQ(r.rows.size(), 2u);
    EXPECT_EQ(r.rows[0].k, 1);
    ASSERT_EQ(r.pairs.size(), 1u);
    EXPECT_EQ(r.pairs[0].k_next, 2);
    for (const auto& row : r.rows) {
        EXPECT_GT(row.density.value, 0.0);
        EXPECT_LT(row.density.value, 1.0);
    }
    EXPECT_GE(r.noise_floor.value, 0.0);
    std::ostringstream os;
    write_mu_scan_csv(os, r);
    EXPECT_NE(os.str().find("noise_floor"), std::string::npos);
}

// Same law on both sides: the distance should look like plug-in noise.
TEST(MuScan, SameKIsAtNoiseLevel) {
    MuScanParams p;
    p.k_list = {2, 2};
    p.horizon = 20000;
    p.window = {{0, 0}, {0, 1}};
    const auto r = mu_convergence_scan(p);
    ASSERT_EQ(r.pairs.size(), 1u);
    EXPECT_LE(r.pairs[0].tv.value, r.pairs[0].tv.ci.high + 1e-12);
    EXPECT_LT(r.pairs[0].tv.value, r.noise_floor.value + 4.0 * std::max(r.noise_floor.se, r.pairs[0].tv.se));
}

TEST(MuScan, TranslatedWindowHasSameDensity) {
    MuScanParams a, b;
    a.k_list = b.k_list = {2};
    a.horizon = b.horizon = 20000;
    b.window = {{1, -1}};
    b.seed = 2;
    const auto ra = mu_convergence_scan(a), rb = mu_convergence_scan(b);
    const auto da = ra.rows[0].density, db = rb.rows[0].density;
    EXPECT_NEAR(da.value, db.value, 3.0 * std::hypot(da.se, db.se));
}

TEST(MuScan, Errors) {
    MuScanParams p;
    p.k_list = {1};
    p.window = {{0, 1}};
    EXPECT_THROW(mu_convergence_scan(p), InvalidParameter);
    p.window.assign(21, Coord{0, 0});
    EXPECT_THROW(mu_convergence_scan(p), CapacityError);
}

TEST(Stationarity, TimeZeroIsExact) {
    auto t = std::make_shared<const Topology>(Topology::box(2, 1, Mode::torus));
    const auto r = stationarity_check(t, 1.0, CylinderEvent::site_occupied(t->origin()), 0.0, 200, 3);
    EXPECT_EQ(r.lhs, r.rhs);
    EXPECT_EQ(r.z, 0.0);
}

TEST(Stationarity, OneUnitAgainstExact) {
    auto t = std::make_shared<const Topology>(Topology::box(2, 1, Mode::torus));
    const auto a = CylinderEvent::site_occupied(t->origin());
    const auto r = stationarity_check(t, 1.0, a, 1.0, 3000, 4, 1, -1.0, 3.0);
    EXPECT_LT(std::abs(r.lhs - r.rhs), 3.0 * r.pooled_se);
    const double exact = exact_stationary(*t, 1.0).event_probability(a);
    EXPECT_NEAR(r.rhs, exact, 3.0 * r.rhs_se);
    EXPECT_NEAR(r.lhs, exact, 3.0 * r.lhs_se);
    EXPECT_GE(r.lhs, 0.0);
    EXPECT_LE(r.rhs, 1.0);
}

TEST(Stationarity, Errors) {
    auto t = std::make_shared<const Topology>(Topology::box(2, 1, Mode::torus));
    const auto a = CylinderEvent::site_occupied(t->origin());
    EXPECT_THROW(stationarity_check(t, 1.0, a, 1.0, 99, 1), InvalidParameter);
    EXPECT_THROW(stationarity_check(t, 1.0, a, -1.0, 100, 1), InvalidParameter);
}
