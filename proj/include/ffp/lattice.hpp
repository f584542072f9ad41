#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "ffp/error.hpp"

namespace ffp {

using SiteId = std::uint32_t;
using Coord = std::vector<int>;

enum class Mode { torus, window, explicit_graph };

inline const char* to_string(Mode m) {
    switch (m) {
    case Mode::torus: return "torus";
    case Mode::window: return "window";
    case Mode::explicit_graph: return "explicit";
    }
    return "unknown";
}

inline Mode mode_from_string(const std::string& s) {
    if (s == "torus") return Mode::torus;
    if (s == "window") return Mode::window;
    if (s == "explicit") return Mode::explicit_graph;
    throw InvalidParameter("unknown topology mode '" + s + "'");
}

// Sorted, duplicate-free set of site indices. Site indices follow the
// lexicographic order of coordinates, so iteration order is canonical.
class SiteSet {
public:
    SiteSet() = default;
    SiteSet(std::initializer_list<SiteId> ids) : ids_(ids) { normalize(); }
    explicit SiteSet(std::vector<SiteId> ids) : ids_(std::move(ids)) { normalize(); }

    std::size_t size() const noexcept { return ids_.size(); }
    bool empty() const noexcept { return ids_.empty(); }
    auto begin() const noexcept { return ids_.begin(); }
    auto end() const noexcept { return ids_.end(); }
    SiteId operator[](std::size_t i) const { return ids_[i]; }
    std::span<const SiteId> ids() const noexcept { return ids_; }

    bool contains(SiteId x) const { return std::binary_search(ids_.begin(), ids_.end(), x); }

    // Position of x in canonical order, or nullopt.
    std::optional<std::size_t> position(SiteId x) const {
        auto it = std::lower_bound(ids_.begin(), ids_.end(), x);
        if (it == ids_.end() || *it != x) return std::nullopt;
        return static_cast<std::size_t>(it - ids_.begin());
    }

    bool is_subset_of(const SiteSet& other) const {
        return std::includes(other.ids_.begin(), other.ids_.end(), ids_.begin(), ids_.end());
    }

    friend SiteSet set_union(const SiteSet& a, const SiteSet& b) {
        std::vector<SiteId> out;
        out.reserve(a.size() + b.size());
        std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
        SiteSet s;
        s.ids_ = std::move(out);
        return s;
    }

    friend SiteSet set_difference(const SiteSet& a, const SiteSet& b) {
        std::vector<SiteId> out;
        std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
        SiteSet s;
        s.ids_ = std::move(out);
        return s;
    }

    friend SiteSet set_intersection(const SiteSet& a, const SiteSet& b) {
        std::vector<SiteId> out;
        std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
        SiteSet s;
        s.ids_ = std::move(out);
        return s;
    }

    friend bool operator==(const SiteSet&, const SiteSet&) = default;

private:
    void normalize() {
        std::sort(ids_.begin(), ids_.end());
        ids_.erase(std::unique(ids_.begin(), ids_.end()), ids_.end());
    }

    std::vector<SiteId> ids_;
};

// Finite graph with lattice coordinates. Box topologies hold B_k = {|x|_inf <= k};
// torus mode adds the wrap edges joining opposite faces, window mode keeps only
// the hypercubic edges inside the box. Immutable after construction.
class Topology {
public:
    static Topology box(int d, int k, Mode mode) {
        if (d < 1) throw InvalidParameter("dimension must be >= 1");
        if (k < 0) throw InvalidParameter("radius must be >= 0");
        if (mode == Mode::explicit_graph) throw InvalidParameter("box topologies are torus or window");
        const int side = 2 * k + 1;
        std::size_t n = 1;
        for (int i = 0; i < d; ++i) {
            n *= static_cast<std::size_t>(side);
            if (n > (std::size_t{1} << 31)) throw CapacityError("box too large");
        }
        Topology t;
        t.dim_ = d;
        t.radius_ = k;
        t.mode_ = mode;
        t.n_ = n;
        t.coords_.resize(n * static_cast<std::size_t>(d));
        for (std::size_t idx = 0; idx < n; ++idx) {
            std::size_t rem = idx;
            for (int j = d - 1; j >= 0; --j) {
                t.coords_[idx * d + j] = static_cast<int>(rem % side) - k;
                rem /= side;
            }
        }
        std::vector<std::vector<SiteId>> adj(n);
        Coord c(d);
        for (std::size_t idx = 0; idx < n; ++idx) {
            for (int j = 0; j < d; ++j) c[j] = t.coords_[idx * d + j];
            for (int j = 0; j < d; ++j) {
                for (int step : {-1, 1}) {
                    Coord y = c;
                    y[j] += step;
                    if (y[j] > k || y[j] < -k) {
                        // wrap edge of A_k: face coordinate k joins -k
                        if (mode != Mode::torus) continue;
                        y[j] = -c[j];
                    }
                    const auto yi = t.box_index(y);
                    if (yi != idx) adj[idx].push_back(static_cast<SiteId>(yi));
                }
            }
        }
        t.build_csr(adj);
        t.degree_bound_ = (mode == Mode::torus) ? 3 * d : 2 * d;
        return t;
    }

    // Arbitrary undirected graph on n sites with coordinates (i).
    static Topology from_edges(std::size_t n, std::span<const std::pair<SiteId, SiteId>> edges) {
        if (n == 0) throw InvalidParameter("explicit graph needs at least one site");
        Topology t;
        t.dim_ = 1;
        t.radius_ = 0;
        t.mode_ = Mode::explicit_graph;
        t.n_ = n;
        t.coords_.resize(n);
        for (std::size_t i = 0; i < n; ++i) t.coords_[i] = static_cast<int>(i);
        std::vector<std::vector<SiteId>> adj(n);
        for (auto [a, b] : edges) {
            if (a >= n || b >= n) throw InvalidSite("edge endpoint out of range");
            if (a == b) throw InvalidParameter("self-loop at site " + std::to_string(a));
            adj[a].push_back(b);
            adj[b].push_back(a);
        }
        for (std::size_t i = 0; i < n; ++i) {
            auto& l = adj[i];
            std::sort(l.begin(), l.end());
            if (std::adjacent_find(l.begin(), l.end()) != l.end())
                throw InvalidParameter("duplicate edge at site " + std::to_string(i));
        }
        t.build_csr(adj);
        std::size_t maxdeg = 0;
        for (std::size_t i = 0; i < n; ++i) maxdeg = std::max(maxdeg, t.degree(static_cast<SiteId>(i)));
        t.degree_bound_ = static_cast<int>(std::max<std::size_t>(maxdeg, 1));
        return t;
    }

    // Edge-list text: one "i j" pair per line, 0-based. Blank lines and lines
    // starting with '#' are skipped. Site count defaults to max index + 1.
    static Topology from_edge_list(std::istream& in, std::optional<std::size_t> sites = std::nullopt) {
        std::vector<std::pair<SiteId, SiteId>> edges;
        std::string line;
        std::size_t lineno = 0;
        std::size_t n = 0;
        while (std::getline(in, line)) {
            ++lineno;
            auto first = line.find_first_not_of(" \t\r");
            if (first == std::string::npos || line[first] == '#') continue;
            std::istringstream ls(line);
            long long a = -1, b = -1;
            if (!(ls >> a >> b) || a < 0 || b < 0)
                throw InvalidParameter("edge list line " + std::to_string(lineno) + ": expected 'i j'");
            edges.emplace_back(static_cast<SiteId>(a), static_cast<SiteId>(b));
            n = std::max<std::size_t>(n, static_cast<std::size_t>(std::max(a, b)) + 1);
        }
        if (sites) {
            if (*sites < n) throw InvalidParameter("edge list references sites beyond the declared count");
            n = *sites;
        }
        return from_edges(n, edges);
    }

    static Topology from_edge_file(const std::string& path, std::optional<std::size_t> sites = std::nullopt) {
        std::ifstream in(path);
        if (!in) throw InvalidParameter("cannot open edge list '" + path + "'");
        return from_edge_list(in, sites);
    }

    int dimension() const noexcept { return dim_; }
    int radius() const noexcept { return radius_; }
    Mode mode() const noexcept { return mode_; }
    std::size_t size() const noexcept { return n_; }
    int degree_bound() const noexcept { return degree_bound_; }
    bool is_box() const noexcept { return mode_ != Mode::explicit_graph; }

    std::span<const int> coords(SiteId x) const {
        check(x);
        return {coords_.data() + static_cast<std::size_t>(x) * dim_, static_cast<std::size_t>(dim_)};
    }

    std::span<const SiteId> adjacent(SiteId x) const {
        check(x);
        return {adj_.data() + offsets_[x], offsets_[x + 1] - offsets_[x]};
    }

    std::size_t degree(SiteId x) const { return adjacent(x).size(); }
    std::size_t edge_count() const noexcept { return adj_.size() / 2; }

    std::optional<SiteId> find(std::span<const int> c) const {
        if (static_cast<int>(c.size()) != dim_) return std::nullopt;
        if (mode_ == Mode::explicit_graph) {
            if (c[0] < 0 || static_cast<std::size_t>(c[0]) >= n_) return std::nullopt;
            return static_cast<SiteId>(c[0]);
        }
        for (int v : c)
            if (v < -radius_ || v > radius_) return std::nullopt;
        return static_cast<SiteId>(box_index(c));
    }

    SiteId site(std::span<const int> c) const {
        if (auto s = find(c)) return *s;
        throw InvalidSite("coordinates outside topology");
    }
    SiteId site(std::initializer_list<int> c) const { return site(std::span<const int>(c.begin(), c.size())); }

    SiteId origin() const {
        if (mode_ == Mode::explicit_graph) return 0;
        return site(Coord(static_cast<std::size_t>(dim_), 0));
    }

    SiteSet all_sites() const {
        std::vector<SiteId> v(n_);
        for (std::size_t i = 0; i < n_; ++i) v[i] = static_cast<SiteId>(i);
        return SiteSet(std::move(v));
    }

    // Sites of B_r (box topologies only).
    SiteSet box_sites(int r) const {
        require_box();
        if (r < 0 || r > radius_) throw InvalidParameter("box radius out of range");
        std::vector<SiteId> v;
        for (std::size_t i = 0; i < n_; ++i) {
            bool in = true;
            for (int j = 0; j < dim_ && in; ++j) in = std::abs(coords_[i * dim_ + j]) <= r;
            if (in) v.push_back(static_cast<SiteId>(i));
        }
        return SiteSet(std::move(v));
    }

    // True when every hypercubic neighbor of x in Z^d lies in the box and none
    // of x's edges is a wrap edge, i.e. |x|_inf < k.
    bool lattice_interior(SiteId x) const {
        if (mode_ == Mode::explicit_graph) return true;
        for (int v : coords(x))
            if (std::abs(v) >= radius_) return false;
        return true;
    }

    // Rotation of the discrete torus: shift every coordinate by offset modulo 2k+1.
    SiteId translate(SiteId x, std::span<const int> offset) const {
        if (mode_ != Mode::torus) throw InvalidParameter("translation is an automorphism only on the torus");
        if (static_cast<int>(offset.size()) != dim_) throw InvalidParameter("offset dimension mismatch");
        const int side = 2 * radius_ + 1;
        Coord y(dim_);
        auto c = coords(x);
        for (int j = 0; j < dim_; ++j) {
            int v = (c[j] + radius_ + offset[j]) % side;
            if (v < 0) v += side;
            y[j] = v - radius_;
        }
        return site(y);
    }

    std::string descriptor() const {
        std::ostringstream os;
        os << "{\"d\":" << dim_ << ",\"k\":" << radius_ << ",\"mode\":\"" << to_string(mode_) << "\"}";
        return os.str();
    }

    std::string coord_string(SiteId x) const {
        std::string s = "(";
        auto c = coords(x);
        for (std::size_t j = 0; j < c.size(); ++j) {
            if (j) s += ",";
            s += std::to_string(c[j]);
        }
        return s + ")";
    }

    void check(SiteId x) const {
        if (x >= n_) throw InvalidSite("site " + std::to_string(x) + " not in topology");
    }

private:
    Topology() = default;

    std::size_t box_index(std::span<const int> c) const {
        const std::size_t side = static_cast<std::size_t>(2 * radius_ + 1);
        std::size_t idx = 0;
        for (int j = 0; j < dim_; ++j) idx = idx * side + static_cast<std::size_t>(c[j] + radius_);
        return idx;
    }

    void require_box() const {
        if (!is_box()) throw InvalidParameter("operation requires a box topology");
    }

    void build_csr(std::vector<std::vector<SiteId>>& adj) {
        offsets_.assign(n_ + 1, 0);
        for (std::size_t i = 0; i < n_; ++i) {
            std::sort(adj[i].begin(), adj[i].end());
            adj[i].erase(std::unique(adj[i].begin(), adj[i].end()), adj[i].end());
            offsets_[i + 1] = offsets_[i] + adj[i].size();
        }
        adj_.reserve(offsets_[n_]);
        for (auto& l : adj) adj_.insert(adj_.end(), l.begin(), l.end());
    }

    int dim_ = 1;
    int radius_ = 0;
    Mode mode_ = Mode::window;
    std::size_t n_ = 0;
    int degree_bound_ = 0;
    std::vector<int> coords_;
    std::vector<std::size_t> offsets_;
    std::vector<SiteId> adj_;
};

// Occupancy assignment, one byte per site in canonical order.
class Configuration {
public:
    Configuration() = default;
    explicit Configuration(std::size_t n) : occ_(n, 0) {}

    static Configuration from_string(std::string_view bits) {
        Configuration c(bits.size());
        for (std::size_t i = 0; i < bits.size(); ++i) {
            if (bits[i] != '0' && bits[i] != '1') throw InvalidParameter("configuration string must be 0/1");
            c.occ_[i] = bits[i] == '1';
        }
        return c;
    }

    std::size_t size() const noexcept { return occ_.size(); }
    bool occupied(SiteId x) const { return occ_[x] != 0; }
    void set(SiteId x, bool v) { occ_[x] = v ? 1 : 0; }

    std::size_t count() const noexcept {
        std::size_t n = 0;
        for (auto v : occ_) n += v;
        return n;
    }

    SiteSet occupied_sites() const {
        std::vector<SiteId> v;
        for (std::size_t i = 0; i < occ_.size(); ++i)
            if (occ_[i]) v.push_back(static_cast<SiteId>(i));
        return SiteSet(std::move(v));
    }

    std::string to_string() const {
        std::string s(occ_.size(), '0');
        for (std::size_t i = 0; i < occ_.size(); ++i)
            if (occ_[i]) s[i] = '1';
        return s;
    }

    friend bool operator==(const Configuration&, const Configuration&) = default;

private:
    std::vector<std::uint8_t> occ_;
};

inline SiteSet neighbors(const Topology& topo, SiteId x) {
    auto adj = topo.adjacent(x);
    return SiteSet(std::vector<SiteId>(adj.begin(), adj.end()));
}

// N(S): sites outside S adjacent to some site of S.
inline SiteSet boundary(const Topology& topo, const SiteSet& s) {
    std::vector<SiteId> out;
    for (SiteId x : s)
        for (SiteId y : topo.adjacent(x))
            if (!s.contains(y)) out.push_back(y);
    return SiteSet(std::move(out));
}

inline SiteSet closure(const Topology& topo, const SiteSet& s) { return set_union(s, boundary(topo, s)); }

namespace detail {
inline void check_config(const Configuration& config, const Topology& topo) {
    if (config.size() != topo.size()) throw InvalidParameter("configuration size does not match topology");
}
} // namespace detail

// Occupied cluster containing x by breadth-first search; empty for vacant x.
inline SiteSet cluster_of(const Configuration& config, const Topology& topo, SiteId x) {
    detail::check_config(config, topo);
    topo.check(x);
    if (!config.occupied(x)) return {};
    std::vector<SiteId> out{x};
    std::vector<std::uint8_t> seen(topo.size(), 0);
    seen[x] = 1;
    for (std::size_t head = 0; head < out.size(); ++head) {
        for (SiteId y : topo.adjacent(out[head])) {
            if (!seen[y] && config.occupied(y)) {
                seen[y] = 1;
                out.push_back(y);
            }
        }
    }
    return SiteSet(std::move(out));
}

inline SiteSet cluster_union(const Configuration& config, const Topology& topo, const SiteSet& b) {
    detail::check_config(config, topo);
    std::vector<std::uint8_t> seen(topo.size(), 0);
    std::vector<SiteId> out;
    for (SiteId start : b) {
        topo.check(start);
        if (seen[start] || !config.occupied(start)) continue;
        seen[start] = 1;
        std::size_t head = out.size();
        out.push_back(start);
        for (; head < out.size(); ++head) {
            for (SiteId y : topo.adjacent(out[head])) {
                if (!seen[y] && config.occupied(y)) {
                    seen[y] = 1;
                    out.push_back(y);
                }
            }
        }
    }
    return SiteSet(std::move(out));
}

// Cluster label per site from scratch (0 for vacant, labels start at 1).
inline std::vector<std::uint32_t> label_clusters(const Configuration& config, const Topology& topo) {
    detail::check_config(config, topo);
    std::vector<std::uint32_t> label(topo.size(), 0);
    std::vector<SiteId> queue;
    std::uint32_t next = 0;
    for (SiteId s = 0; s < topo.size(); ++s) {
        if (label[s] || !config.occupied(s)) continue;
        label[s] = ++next;
        queue.assign(1, s);
        for (std::size_t head = 0; head < queue.size(); ++head) {
            for (SiteId y : topo.adjacent(queue[head])) {
                if (!label[y] && config.occupied(y)) {
                    label[y] = next;
                    queue.push_back(y);
                }
            }
        }
    }
    return label;
}

// Sites whose coordinates appear in the list (canonical order on output).
inline SiteSet sites_at(const Topology& topo, const std::vector<Coord>& coords) {
    std::vector<SiteId> v;
    v.reserve(coords.size());
    for (const auto& c : coords) v.push_back(topo.site(c));
    return SiteSet(std::move(v));
}

// Bernoulli(p) product configuration.
template <class Rng>
Configuration bernoulli_configuration(const Topology& topo, double p, Rng& rng) {
    Configuration c(topo.size());
    for (SiteId s = 0; s < topo.size(); ++s) c.set(s, rng.bernoulli(p));
    return c;
}

} // namespace ffp
