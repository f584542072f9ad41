#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "ffp/lattice.hpp"

namespace ffp {

// Handle to a cluster at a point in time. The generation of the root slot
// changes whenever the cluster is burned, so a stale handle never compares
// equal to a live one even if the root slot is reused.
struct ClusterId {
    SiteId root = 0;
    std::uint32_t generation = 0;

    friend bool operator==(const ClusterId&, const ClusterId&) = default;
};

// Union-find over occupied sites supporting merges on growth and whole-cluster
// deletion on burn. Each root keeps the list of its members, so a burn costs
// O(|C|) and retires every member slot; merges are union by size with path
// halving.
class ClusterIndex {
public:
    ClusterIndex() = default;
    explicit ClusterIndex(std::size_t n)
        : parent_(n), members_(n), generation_(n, 0), occupied_(n, 0) {
        for (std::size_t i = 0; i < n; ++i) parent_[i] = static_cast<SiteId>(i);
    }

    ClusterIndex(const Configuration& config, const Topology& topo) : ClusterIndex(topo.size()) {
        for (SiteId x = 0; x < topo.size(); ++x)
            if (config.occupied(x)) add(x, topo);
    }

    std::size_t size() const noexcept { return parent_.size(); }
    bool occupied(SiteId x) const { return occupied_[x] != 0; }

    SiteId find(SiteId x) {
        while (parent_[x] != x) {
            parent_[x] = parent_[parent_[x]];
            x = parent_[x];
        }
        return x;
    }

    // Root lookup without path compression.
    SiteId find(SiteId x) const {
        while (parent_[x] != x) x = parent_[x];
        return x;
    }

    ClusterId id(SiteId x) {
        const SiteId r = find(x);
        return {r, generation_[r]};
    }

    bool same_cluster(SiteId a, SiteId b) { return occupied(a) && occupied(b) && find(a) == find(b); }

    // Members of the cluster rooted at find(x); empty span for a vacant x.
    std::span<const SiteId> members(SiteId x) {
        if (!occupied(x)) return {};
        return members_[find(x)];
    }

    std::span<const SiteId> members(SiteId x) const {
        if (!occupied(x)) return {};
        return members_[find(x)];
    }

    std::size_t cluster_size(SiteId x) const { return members(x).size(); }

    // Occupy x and merge with every occupied neighbor's cluster.
    void add(SiteId x, const Topology& topo) {
        occupied_[x] = 1;
        parent_[x] = x;
        members_[x].assign(1, x);
        for (SiteId y : topo.adjacent(x))
            if (occupied_[y]) unite(x, y);
    }

    // Vacate the whole cluster containing x and return its former members.
    std::vector<SiteId> remove_cluster(SiteId x) {
        if (!occupied(x)) return {};
        const SiteId r = find(x);
        std::vector<SiteId> gone = std::move(members_[r]);
        members_[r].clear();
        for (SiteId m : gone) {
            occupied_[m] = 0;
            parent_[m] = m;
            ++generation_[m];
        }
        return gone;
    }

private:
    void unite(SiteId a, SiteId b) {
        SiteId ra = find(a);
        SiteId rb = find(b);
        if (ra == rb) return;
        if (members_[ra].size() < members_[rb].size()) std::swap(ra, rb);
        parent_[rb] = ra;
        auto& big = members_[ra];
        auto& small = members_[rb];
        big.insert(big.end(), small.begin(), small.end());
        small.clear();
        if (small.capacity() > 64) small.shrink_to_fit();
    }

    std::vector<SiteId> parent_;
    std::vector<std::vector<SiteId>> members_;
    std::vector<std::uint32_t> generation_;
    std::vector<std::uint8_t> occupied_;
};

} // namespace ffp
