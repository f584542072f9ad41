#include <gtest/gtest.h>

#include <memory>

#include "ffp/ccsb.hpp"
#include "ffp/exact.hpp"
#include "oracles.hpp"

using namespace ffp;

namespace {

std::shared_ptr<const Topology> torus(int d, int k) {
    return std::make_shared<const Topology>(Topology::box(d, k, Mode::torus));
}

std::vector<Configuration> stationary_samples(const std::shared_ptr<const Topology>& t, double lambda,
                                              std::size_t n, std::uint64_t seed, double spacing = -1.0) {
    return initial_configurations(t, lambda, InitKind::stationary, 0.0, n, -1.0, spacing, seed);
}

} // namespace

TEST(Ccsb, AllVacantSamplerHolds) {
    auto t = torus(2, 2);
    const std::vector<Configuration> vacant(200, Configuration(t->size()));
    for (std::size_t m : {0u, 1u, 5u}) {
        for (double delta : {0.0, 0.01, 0.5}) {
            CcsbQuery q;
            q.x = t->origin();
            q.B = SiteSet{t->site({1, 1})};
            q.m = m;
            q.delta = delta;
            const auto r = ccsb_check(*t, vacant, q);
            EXPECT_EQ(r.joint, 0.0);
            EXPECT_EQ(r.cond, 1.0);
            EXPECT_EQ(r.verdict, Verdict::holds);
        }
    }
}

TEST(Ccsb, EmptyBReducesToUnconditionalTail) {
    auto t = torus(2, 2);
    const auto samples = stationary_samples(t, 1.0, 400, 3);
    CcsbQuery q;
    q.x = t->origin();
    q.m = 1;
    q.delta = 0.9;
    const auto r = ccsb_check(*t, samples, q);
    EXPECT_EQ(r.cond_count, samples.size());
    const std::size_t m_list[] = {1};
    const auto tail = cluster_size_tail(*t, samples, q.x, m_list);
    EXPECT_EQ(r.joint_count, tail.rows[0].count);
}

TEST(Ccsb, QuerySiteInsideDIsRejected) {
    auto t = torus(2, 1);
    CcsbQuery q;
    q.x = 0;
    q.D = SiteSet{0, 1};
    const std::vector<Configuration> none;
    EXPECT_THROW(ccsb_check(*t, none, q), InvalidParameter);
}

TEST(Ccsb, SmallConditioningCountIsInconclusive) {
    auto t = torus(2, 1);
    const std::vector<Configuration> vacant(10, Configuration(t->size()));
    CcsbQuery q;
    q.x = 0;
    const auto r = ccsb_check(*t, vacant, q);
    EXPECT_EQ(r.verdict, Verdict::inconclusive);
}

TEST(Ccsb, JointNeverExceedsConditioningAndMonotoneInM) {
    auto t = torus(2, 2);
    const auto samples = stationary_samples(t, 0.5, 500, 4);
    const SiteId x = t->origin();
    const SiteId b = t->site({2, 2});
    double prev = 1.0;
    for (std::size_t m = 0; m <= 10; ++m) {
        CcsbQuery q;
        q.x = x;
        q.B = SiteSet{b};
        q.D = SiteSet{};
        q.m = m;
        q.delta = 0.1;
        const auto r = ccsb_check(*t, samples, q);
        EXPECT_LE(r.joint, r.cond);
        EXPECT_LE(r.joint, prev);
        prev = r.joint;
    }
}

TEST(Tail, ZeroThresholdIsOccupationAndLargeIsZero) {
    auto t = torus(2, 1);
    const auto samples = stationary_samples(t, 1.0, 300, 5);
    const SiteId x = t->origin();
    const std::size_t m_list[] = {0, 2, 9, 50};
    const auto tail = cluster_size_tail(*t, samples, x, m_list);
    std::size_t occ = 0;
    for (const auto& c : samples) occ += c.occupied(x);
    EXPECT_EQ(tail.rows[0].count, occ);
    EXPECT_EQ(tail.rows[2].count, 0u);
    EXPECT_EQ(tail.rows[3].count, 0u);
    EXPECT_LE(tail.max_cluster, 9u);
    for (std::size_t i = 1; i < tail.rows.size(); ++i) EXPECT_LE(tail.rows[i].count, tail.rows[i - 1].count);
}

TEST(Tail, OccupationMatchesExactOn3x3Torus) {
    auto t = torus(2, 1);
    const auto samples = stationary_samples(t, 1.0, 4000, 6, 3.0);
    const std::size_t m_list[] = {0};
    const auto tail = cluster_size_tail(*t, samples, t->origin(), m_list);
    const double exact = exact_stationary(*t, 1.0).site_density(t->origin());
    // snapshots three time units apart are close to independent
    EXPECT_NEAR(tail.rows[0].p_hat, exact, 3.0 * binomial_se(tail.rows[0].count, samples.size()));
}

TEST(Tail, SiteIndependentOnTorus) {
    auto t = torus(2, 2);
    const auto samples = stationary_samples(t, 1.0, 2000, 7);
    const std::size_t m_list[] = {1};
    const auto a = cluster_size_tail(*t, samples, t->site({0, 0}), m_list).rows[0];
    const auto b = cluster_size_tail(*t, samples, t->site({2, -1}), m_list).rows[0];
    const double se = std::hypot(binomial_se(a.count, a.samples), binomial_se(b.count, b.samples));
    EXPECT_NEAR(a.p_hat, b.p_hat, 3.0 * se);
}

TEST(Uniformity, ProbeReportsEveryTime) {
    auto t = torus(2, 2);
    const auto probe = time_uniformity_probe(t, 1.0, t->origin(), 0, {4.0, 1.0, 8.0, 16.0}, 300,
                                             InitKind::vacant, 0.5, 9);
    ASSERT_EQ(probe.rows.size(), 4u);
    EXPECT_EQ(probe.rows[0].s, 1.0);
    EXPECT_GE(probe.settled_from, 1.0);
    EXPECT_LE(probe.settled_from, 16.0);
}

TEST(CcsbCsv, Header) {
    std::ostringstream os;
    CcsbReport r;
    r.id = "q1";
    r.verdict = Verdict::holds;
    std::vector<CcsbReport> v{r};
    write_ccsb_csv(os, v);
    EXPECT_EQ(os.str(), "query,m,delta,joint,cond,bound,verdict\nq1,0,0,0,0,0,holds\n");
}
