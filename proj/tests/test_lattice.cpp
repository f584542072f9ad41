#include <gtest/gtest.h>

#include <sstream>

#include "ffp/lattice.hpp"
#include "oracles.hpp"

using namespace ffp;

namespace {

SiteSet at(const Topology& t, std::initializer_list<Coord> cs) {
    std::vector<SiteId> v;
    for (const auto& c : cs) v.push_back(t.site(c));
    return SiteSet(v);
}

Configuration occupied(const Topology& t, std::initializer_list<Coord> cs) {
    Configuration c(t.size());
    for (const auto& x : cs) c.set(t.site(x), true);
    return c;
}

} // namespace

TEST(Topology, TorusWrapNeighbors) {
    const auto t = Topology::box(2, 2, Mode::torus);
    EXPECT_EQ(neighbors(t, t.site({2, 0})), at(t, {{1, 0}, {2, 1}, {2, -1}, {-2, 0}}));
    EXPECT_EQ(neighbors(t, t.site({2, 2})), at(t, {{1, 2}, {2, 1}, {-2, 2}, {2, -2}}));
}

TEST(Topology, WindowTruncates) {
    const auto t = Topology::box(2, 2, Mode::window);
    EXPECT_EQ(neighbors(t, t.site({2, 0})), at(t, {{1, 0}, {2, 1}, {2, -1}}));
}

TEST(Topology, SmallTorusAndWindow) {
    const auto t = Topology::box(2, 1, Mode::torus);
    EXPECT_EQ(neighbors(t, t.site({0, 0})), at(t, {{1, 0}, {-1, 0}, {0, 1}, {0, -1}}));
    EXPECT_EQ(neighbors(t, t.site({1, 1})), at(t, {{0, 1}, {1, 0}, {-1, 1}, {1, -1}}));
    const auto w = Topology::box(2, 1, Mode::window);
    EXPECT_EQ(neighbors(w, w.site({1, 1})), at(w, {{0, 1}, {1, 0}}));
}

TEST(Topology, InvalidParameters) {
    EXPECT_THROW(Topology::box(0, 1, Mode::torus), InvalidParameter);
    EXPECT_THROW(Topology::box(2, -1, Mode::torus), InvalidParameter);
    const auto t = Topology::box(1, 1, Mode::torus);
    EXPECT_THROW(neighbors(t, 3), InvalidSite);
    EXPECT_THROW(t.site({5}), InvalidSite);
}

TEST(Topology, TorusDegreeAndEdgeCount) {
    for (int d = 1; d <= 3; ++d) {
        for (int k = 1; k <= 3; ++k) {
            const auto t = Topology::box(d, k, Mode::torus);
            std::size_t n = 1;
            for (int i = 0; i < d; ++i) n *= 2 * k + 1;
            ASSERT_EQ(t.size(), n);
            for (SiteId x = 0; x < t.size(); ++x) ASSERT_EQ(t.degree(x), static_cast<std::size_t>(2 * d));
            EXPECT_EQ(t.edge_count(), static_cast<std::size_t>(d) * n);
            EXPECT_EQ(t.degree_bound(), 3 * d);
        }
    }
}

TEST(Topology, ZeroRadiusIsSingleIsolatedSite) {
    for (auto mode : {Mode::torus, Mode::window}) {
        const auto t = Topology::box(3, 0, mode);
        EXPECT_EQ(t.size(), 1u);
        EXPECT_EQ(t.degree(0), 0u);
    }
}

TEST(Topology, WindowEdgesAreLatticeEdgesInsideBox) {
    const auto t = Topology::box(2, 2, Mode::window);
    for (SiteId x = 0; x < t.size(); ++x) {
        for (SiteId y : t.adjacent(x)) {
            int dist = 0;
            for (int j = 0; j < 2; ++j) dist += std::abs(t.coords(x)[j] - t.coords(y)[j]);
            EXPECT_EQ(dist, 1);
        }
    }
    EXPECT_EQ(t.edge_count(), 2u * 5u * 4u);
    EXPECT_EQ(t.degree_bound(), 4);
}

TEST(Topology, CanonicalOrderIsLexicographic) {
    const auto t = Topology::box(2, 1, Mode::torus);
    for (SiteId x = 0; x + 1 < t.size(); ++x) {
        auto a = t.coords(x), b = t.coords(x + 1);
        EXPECT_TRUE(std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end()));
    }
    EXPECT_EQ(t.coord_string(0), "(-1,-1)");
    EXPECT_EQ(t.origin(), 4u);
}

TEST(Topology, TranslationIsAutomorphism) {
    const auto t = Topology::box(2, 2, Mode::torus);
    const std::vector<int> off{1, -2};
    for (SiteId x = 0; x < t.size(); ++x) {
        std::vector<SiteId> v;
        for (SiteId y : t.adjacent(x)) v.push_back(t.translate(y, off));
        EXPECT_EQ(SiteSet(v), neighbors(t, t.translate(x, off)));
    }
    EXPECT_THROW(Topology::box(2, 2, Mode::window).translate(0, off), InvalidParameter);
}

TEST(Topology, DescriptorText) {
    EXPECT_EQ(Topology::box(2, 3, Mode::window).descriptor(), R"({"d":2,"k":3,"mode":"window"})");
}

TEST(Topology, EdgeListParsing) {
    std::istringstream in("# pair graph\n0 1\n\n1 2\n");
    const auto t = Topology::from_edge_list(in);
    EXPECT_EQ(t.size(), 3u);
    EXPECT_EQ(t.edge_count(), 2u);
    EXPECT_EQ(neighbors(t, 1), (SiteSet{0, 2}));
    std::istringstream bad("0 x\n");
    EXPECT_THROW(Topology::from_edge_list(bad), InvalidParameter);
    std::istringstream extra("0 1\n");
    EXPECT_EQ(Topology::from_edge_list(extra, 4).size(), 4u);
}

TEST(Topology, ExplicitGraphRejectsLoopsAndDuplicates) {
    std::vector<std::pair<SiteId, SiteId>> loop{{0, 0}};
    EXPECT_THROW(Topology::from_edges(2, loop), InvalidParameter);
    std::vector<std::pair<SiteId, SiteId>> dup{{0, 1}, {1, 0}};
    EXPECT_THROW(Topology::from_edges(2, dup), InvalidParameter);
    std::vector<std::pair<SiteId, SiteId>> out{{0, 5}};
    EXPECT_THROW(Topology::from_edges(2, out), InvalidSite);
}

TEST(SiteSetOps, BoundaryAndClosure) {
    const auto t = Topology::box(2, 2, Mode::window);
    const SiteSet s = t.box_sites(0);
    EXPECT_EQ(boundary(t, s), at(t, {{1, 0}, {-1, 0}, {0, 1}, {0, -1}}));
    EXPECT_EQ(closure(t, s).size(), 5u);
    EXPECT_EQ(boundary(t, t.box_sites(1)).size(), 12u);
    EXPECT_EQ(set_difference(closure(t, s), s), boundary(t, s));
}

TEST(Clusters, VacantSiteHasEmptyCluster) {
    const auto t = Topology::box(2, 1, Mode::torus);
    Configuration c(t.size());
    for (SiteId x = 0; x < t.size(); ++x) EXPECT_TRUE(cluster_of(c, t, x).empty());
}

TEST(Clusters, WrapEdgeJoinsOnTorusOnly) {
    const auto t = Topology::box(2, 1, Mode::torus);
    const auto c = occupied(t, {{-1, -1}, {1, -1}});
    EXPECT_EQ(cluster_of(c, t, t.site({1, -1})), at(t, {{1, -1}, {-1, -1}}));
    const auto w = Topology::box(2, 1, Mode::window);
    const auto cw = occupied(w, {{-1, -1}, {1, -1}});
    EXPECT_EQ(cluster_of(cw, w, w.site({1, -1})), at(w, {{1, -1}}));
}

TEST(Clusters, UnionExamples) {
    const auto t = Topology::box(2, 2, Mode::window);
    const auto c = occupied(t, {{0, 0}, {0, 1}, {2, 2}});
    const SiteId x = t.site({0, 0});
    EXPECT_TRUE(cluster_union(c, t, {}).empty());
    EXPECT_EQ(cluster_union(c, t, {x}), cluster_of(c, t, x));
    EXPECT_EQ(cluster_union(c, t, {x, t.site({0, 1})}), cluster_of(c, t, x));
    EXPECT_EQ(cluster_union(c, t, {x, t.site({2, 2}), t.site({-2, -2})}).size(), 3u);
}

TEST(Clusters, MatchesRelaxationOracle) {
    Rng rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        const auto t = Topology::box(2, 3, trial % 2 ? Mode::torus : Mode::window);
        const auto c = oracle::random_config(t.size(), 0.55, rng);
        for (SiteId x = 0; x < t.size(); ++x) {
            const auto ref = oracle::cluster(c, t, x);
            ASSERT_EQ(cluster_of(c, t, x), SiteSet(ref));
        }
    }
}

TEST(Configuration, StringRoundTrip) {
    const auto c = Configuration::from_string("01101");
    EXPECT_EQ(c.count(), 3u);
    EXPECT_TRUE(c.occupied(1));
    EXPECT_FALSE(c.occupied(0));
    EXPECT_EQ(c.to_string(), "01101");
    EXPECT_THROW(Configuration::from_string("012"), InvalidParameter);
}
