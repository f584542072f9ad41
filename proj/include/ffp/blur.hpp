#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "ffp/engine.hpp"
#include "ffp/error.hpp"
#include "ffp/lattice.hpp"
#include "ffp/measure.hpp"
#include "ffp/parallel.hpp"
#include "ffp/sampling.hpp"
#include "ffp/stats.hpp"

namespace ffp {

// (t0, S)-blur process: a {0,2} flag on every site of the closure S u N(S)
// marking sites whose state may depend on what lay outside S at time t0.
//
// Conventions:
//  * The closed cluster of an occupied x is C_x u N(C_x); for a vacant x it
//    is {x}. Vacant sites therefore only become blurred by being occupied
//    next to blur, never by sitting next to it.
//  * Sites of N(S) are permanent flag sources whatever their occupancy.
//  * Flags are monotone and survive burns.
//
// A single pass per event is enough. Burns change no flags. A growth at x
// merges some clusters into C_x; any site outside C_x whose closed cluster
// changed must be vacant and adjacent to C_x, and vacant sites are never
// newly flagged, so only C_x n S-bar can change. A growth outside S-bar
// never changes flags: every path from it into S crosses N(S), so every
// S-site of the new cluster already shared a cluster with a flagged source.
class BlurState {
public:
    BlurState(const Topology& topo, SiteSet region, double t0)
        : region_(std::move(region)), t0_(t0), role_(topo.size(), 0), flags_(topo.size(), 0) {
        for (SiteId x : region_) {
            topo.check(x);
            if (!topo.lattice_interior(x))
                throw InvalidParameter("blur region closure exceeds the topology (window too small) at site " +
                                       topo.coord_string(x));
        }
        boundary_ = ffp::boundary(topo, region_);
        closure_ = set_union(region_, boundary_);
        for (SiteId x : region_) role_[x] = kInterior;
        for (SiteId x : boundary_) {
            role_[x] = kBoundary;
            flags_[x] = 2;
        }
        flagged_ = boundary_.size();
    }

    const SiteSet& region() const noexcept { return region_; }
    const SiteSet& boundary() const noexcept { return boundary_; }
    const SiteSet& closure() const noexcept { return closure_; }
    double t0() const noexcept { return t0_; }

    bool in_closure(SiteId x) const { return role_[x] != 0; }
    bool in_region(SiteId x) const { return role_[x] == kInterior; }
    bool blurred(SiteId x) const { return flags_[x] != 0; }
    int value(SiteId x) const { return flags_[x]; }
    std::size_t flagged_count() const noexcept { return flagged_; }

    void flag(SiteId x) {
        if (!in_closure(x)) return;
        if (!flags_[x]) {
            flags_[x] = 2;
            ++flagged_;
        }
    }

    std::vector<SiteId> flagged_sites() const {
        std::vector<SiteId> v;
        for (SiteId x : closure_)
            if (flags_[x]) v.push_back(x);
        return v;
    }

    friend bool operator==(const BlurState& a, const BlurState& b) {
        return a.region_ == b.region_ && a.flagged_sites() == b.flagged_sites();
    }

private:
    static constexpr std::uint8_t kInterior = 1;
    static constexpr std::uint8_t kBoundary = 2;

    SiteSet region_;
    SiteSet boundary_;
    SiteSet closure_;
    double t0_ = 0.0;
    std::vector<std::uint8_t> role_;
    std::vector<std::uint8_t> flags_;
    std::size_t flagged_ = 0;
};

// Blur at t0: N(S) plus every occupied site of S-bar whose closed cluster meets N(S).
inline BlurState init_blur(const Configuration& config, const Topology& topo, const SiteSet& region, double t0) {
    detail::check_config(config, topo);
    BlurState blur(topo, region, t0);
    std::vector<std::uint8_t> seen(topo.size(), 0);
    std::vector<SiteId> queue;
    for (SiteId z : blur.boundary()) {
        if (config.occupied(z) && !seen[z]) {
            seen[z] = 1;
            queue.push_back(z);
        }
        for (SiteId y : topo.adjacent(z)) {
            if (config.occupied(y) && !seen[y]) {
                seen[y] = 1;
                queue.push_back(y);
            }
        }
    }
    for (std::size_t head = 0; head < queue.size(); ++head) {
        const SiteId x = queue[head];
        blur.flag(x);
        for (SiteId y : topo.adjacent(x)) {
            if (config.occupied(y) && !seen[y]) {
                seen[y] = 1;
                queue.push_back(y);
            }
        }
    }
    return blur;
}

// Propagate blur after `event` has been applied. `cluster` is the occupied
// cluster of event.site in the post-event configuration.
inline void update_blur(BlurState& blur, const Topology& topo, const Event& event, const Configuration& after,
                        std::span<const SiteId> cluster) {
    const bool occ = after.occupied(event.site);
    if (event.kind == EventKind::growth) {
        if (!occ) throw ConsistencyError("growth event but the site is vacant afterwards");
    } else {
        if (occ) throw ConsistencyError("ignition event but the site is occupied afterwards");
        return;
    }
    if (!blur.in_closure(event.site)) return;
    bool touches = false;
    for (SiteId y : cluster) {
        if (blur.blurred(y)) {
            touches = true;
            break;
        }
        for (SiteId z : topo.adjacent(y)) {
            if (blur.blurred(z)) {
                touches = true;
                break;
            }
        }
        if (touches) break;
    }
    if (!touches) return;
    for (SiteId y : cluster) blur.flag(y);
}

inline void update_blur(BlurState& blur, const Topology& topo, const Event& event, const Configuration& after) {
    const auto c = cluster_of(after, topo, event.site);
    update_blur(blur, topo, event, after, c.ids());
}

inline void update_blur(BlurState& blur, const Engine& engine, const Event& event) {
    update_blur(blur, engine.topology(), event, engine.configuration(), engine.cluster_members(event.site));
}

// Engine observer keeping one or more blur states current.
class BlurObserver {
public:
    explicit BlurObserver(std::span<BlurState> blurs) : blurs_(blurs) {}
    void on_event(const Engine& e, const Event& ev, const EventOutcome&) {
        for (auto& b : blurs_) update_blur(b, e, ev);
    }

private:
    std::span<BlurState> blurs_;
};

// Number of occupied closure sites left unflagged although their closed
// cluster contains a flagged site (zero whenever the state is consistent).
inline std::size_t closure_violations(const BlurState& blur, const Topology& topo, const Configuration& config) {
    std::size_t bad = 0;
    for (SiteId x : blur.closure()) {
        if (!config.occupied(x) || blur.blurred(x)) continue;
        const auto c = cluster_of(config, topo, x);
        bool hit = false;
        for (SiteId y : c) {
            if (blur.in_closure(y) && blur.blurred(y)) hit = true;
            for (SiteId z : topo.adjacent(y))
                if (blur.in_closure(z) && blur.blurred(z)) hit = true;
        }
        bad += hit;
    }
    return bad;
}

// Time span over which a unit-rate Poisson clock rings with probability below
// 1/(4 m d_G): safety * -ln(1 - 1/(4 m d_G)), nudged down until the strict
// inequality holds in floating point.
inline double epsilon_for(double m, double degree_bound, double safety = 1.0) {
    if (!(m >= 1.0)) throw InvalidParameter("m must be >= 1");
    if (!(degree_bound >= 1.0)) throw InvalidParameter("degree bound must be >= 1");
    if (!(safety > 0.0 && safety <= 1.0)) throw InvalidParameter("safety must lie in (0, 1]");
    const double denom = 4.0 * m * degree_bound;
    if (denom <= 1.0) throw InvalidParameter("4 m d_G must exceed 1");
    const double bound = 1.0 / denom;
    double eps = safety * -std::log1p(-bound);
    // step down by one ulp, then by doubling amounts; 1 - exp(-eps) is coarse for tiny eps
    double step = 0.0;
    while (eps > 0.0 && (-std::expm1(-eps) >= bound || 1.0 - std::exp(-eps) >= bound)) {
        if (step == 0.0) {
            eps = std::nextafter(eps, 0.0);
            step = std::numeric_limits<double>::denorm_min();
        } else {
            step = std::max(step * 2.0, eps * std::numeric_limits<double>::epsilon());
            eps = std::max(0.0, eps - step);
        }
    }
    return eps;
}

struct BlurDecayParams {
    int d = 2;
    double lambda = 1.0;
    Coord x;              // tracked site; origin when empty
    int r_i = 0;          // radius of I
    std::vector<int> L_list{1, 2, 3, 4};
    std::vector<double> t_list{0.0};
    std::size_t replicas = 1000;
    InitKind init = InitKind::stationary;
    double init_p = 0.5;  // Bernoulli density
    int margin = 2;
    double burn_in = -1.0;  // stationary init; negative selects the default
    double spacing = -1.0;  // stationary init; negative selects relaxation_interval
    std::size_t max_sites = 20000;
    std::uint64_t seed = 1;
    unsigned jobs = 1;
};

struct BlurDecayRow {
    int L = 0;
    double t = 0.0;
    std::size_t flagged = 0;
    std::size_t replicas = 0;
    double p_hat = 0.0;
    Interval ci;
};

// Frequency with which site x is (0, B_{r_I+L})-blurred at each time of
// t_list, for each L. All L share one window of radius r_I + max L + margin
// and one set of replicas, so the rows are positively coupled across L.
inline std::vector<BlurDecayRow> blur_decay_experiment(const BlurDecayParams& p) {
    if (p.L_list.empty() || p.t_list.empty()) throw InvalidParameter("L_list and t_list must be non-empty");
    if (p.margin < 1) throw InvalidParameter("margin must be >= 1");
    if (p.r_i < 0) throw InvalidParameter("r_I must be >= 0");
    for (int L : p.L_list)
        if (L < 0) throw InvalidParameter("L must be >= 0");
    for (double t : p.t_list)
        if (!(t >= 0.0)) throw InvalidParameter("times must be >= 0");
    const int max_l = *std::max_element(p.L_list.begin(), p.L_list.end());
    const int radius = p.r_i + max_l + p.margin;
    double sites = 1.0;
    for (int j = 0; j < p.d; ++j) sites *= 2.0 * radius + 1.0;
    if (sites > static_cast<double>(p.max_sites))
        throw CapacityError("blur window of radius " + std::to_string(radius) + " has " +
                            std::to_string(static_cast<long long>(sites)) + " sites; the cap is " +
                            std::to_string(p.max_sites));
    auto topo = std::make_shared<const Topology>(Topology::box(p.d, radius, Mode::window));
    const Coord xc = p.x.empty() ? Coord(static_cast<std::size_t>(p.d), 0) : p.x;
    const SiteId x = topo->site(xc);

    std::vector<double> times = p.t_list;
    std::sort(times.begin(), times.end());
    const auto inits = initial_configurations(topo, p.lambda, p.init, p.init_p, p.replicas, p.burn_in, p.spacing, p.seed);

    std::vector<SiteSet> regions;
    for (int L : p.L_list) regions.push_back(topo->box_sites(p.r_i + L));

    // flags[L][t] per replica
    auto run_one = [&](std::size_t rep) {
        Engine engine(topo, {p.lambda}, Rng(p.seed, static_cast<std::uint32_t>(rep), 1), inits[rep]);
        std::vector<BlurState> blurs;
        for (const auto& s : regions) blurs.push_back(init_blur(engine.configuration(), *topo, s, 0.0));
        BlurObserver obs(blurs);
        std::vector<std::uint8_t> hit(regions.size() * times.size(), 0);
        for (std::size_t ti = 0; ti < times.size(); ++ti) {
            engine.run_until(times[ti], obs);
            for (std::size_t li = 0; li < regions.size(); ++li) hit[li * times.size() + ti] = blurs[li].blurred(x);
        }
        return hit;
    };
    const auto results = parallel_map(p.replicas, p.jobs, run_one);

    std::vector<BlurDecayRow> rows;
    for (std::size_t li = 0; li < p.L_list.size(); ++li) {
        for (std::size_t ti = 0; ti < times.size(); ++ti) {
            BlurDecayRow r;
            r.L = p.L_list[li];
            r.t = times[ti];
            r.replicas = p.replicas;
            for (const auto& h : results) r.flagged += h[li * times.size() + ti];
            r.p_hat = p.replicas ? static_cast<double>(r.flagged) / static_cast<double>(p.replicas) : 0.0;
            r.ci = wilson_interval(r.flagged, r.replicas);
            rows.push_back(r);
        }
    }
    return rows;
}

} // namespace ffp
