#include <gtest/gtest.h>

#include <algorithm>
#include <memory>

#include "ffp/cluster_index.hpp"
#include "ffp/engine.hpp"
#include "oracles.hpp"

using namespace ffp;

namespace {

// Incremental index must induce the same partition as the relaxation labels.
void expect_same_partition(ClusterIndex& idx, const Configuration& c, const Topology& t) {
    const auto lab = oracle::labels(c, t);
    for (SiteId x = 0; x < t.size(); ++x) {
        ASSERT_EQ(idx.occupied(x), lab[x] >= 0) << "site " << x;
        if (lab[x] < 0) {
            ASSERT_TRUE(idx.members(x).empty());
            continue;
        }
        std::vector<SiteId> m(idx.members(x).begin(), idx.members(x).end());
        std::sort(m.begin(), m.end());
        ASSERT_EQ(m, oracle::cluster(c, t, x)) << "site " << x;
    }
}

} // namespace

TEST(ClusterIndex, BuildFromConfiguration) {
    Rng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        const auto t = Topology::box(2, 3, Mode::torus);
        const auto c = oracle::random_config(t.size(), 0.6, rng);
        ClusterIndex idx(c, t);
        expect_same_partition(idx, c, t);
    }
}

TEST(ClusterIndex, AddMergesNeighbours) {
    const auto t = Topology::box(1, 3, Mode::window);
    ClusterIndex idx(t.size());
    idx.add(0, t);
    idx.add(2, t);
    EXPECT_FALSE(idx.same_cluster(0, 2));
    idx.add(1, t);
    EXPECT_TRUE(idx.same_cluster(0, 2));
    EXPECT_EQ(idx.cluster_size(1), 3u);
}

TEST(ClusterIndex, RemovalRetiresGeneration) {
    const auto t = Topology::box(1, 2, Mode::window);
    ClusterIndex idx(t.size());
    idx.add(1, t);
    idx.add(2, t);
    const ClusterId before = idx.id(1);
    auto gone = idx.remove_cluster(2);
    std::sort(gone.begin(), gone.end());
    EXPECT_EQ(gone, (std::vector<SiteId>{1, 2}));
    EXPECT_FALSE(idx.occupied(1));
    idx.add(1, t);
    EXPECT_EQ(idx.cluster_size(1), 1u);
    EXPECT_FALSE(idx.id(1) == before);
}

// Random trajectories: after every event the index equals a from-scratch labelling.
TEST(ClusterIndex, MatchesRecomputationAlongTrajectories) {
    for (int k : {2, 3}) {
        for (double lambda : {0.3, 1.0, 3.0}) {
            auto topo = std::make_shared<const Topology>(Topology::box(2, k, Mode::torus));
            Engine e(topo, {lambda}, Rng(17, static_cast<std::uint32_t>(k), 0));
            for (int i = 0; i < 3000; ++i) {
                e.step();
                if (i % 7 == 0) expect_same_partition(e.clusters(), e.configuration(), *topo);
            }
            expect_same_partition(e.clusters(), e.configuration(), *topo);
        }
    }
}
