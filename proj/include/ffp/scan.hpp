#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <ostream>
#include <vector>

#include "ffp/engine.hpp"
#include "ffp/error.hpp"
#include "ffp/lattice.hpp"
#include "ffp/measure.hpp"
#include "ffp/parallel.hpp"
#include "ffp/sampling.hpp"
#include "ffp/stats.hpp"

namespace ffp {

struct MuScanParams {
    int d = 2;
    double lambda = 1.0;
    std::vector<Coord> window{}; // offsets from the origin; origin only when empty
    std::vector<int> k_list{1, 2, 3, 4};
    double horizon = 20000.0;
    double burn_in = -1.0;       // negative: default_burn_in
    std::size_t batches = kDefaultBatches;
    std::uint64_t seed = 1;
    unsigned jobs = 1;
};

struct MuScanRow {
    int k = 0;
    EmpiricalMeasure marginal;   // over positional window labels
    Estimate density;            // P(first window site occupied), canonical order
};

struct MuScanPair {
    int k = 0;
    int k_next = 0;
    TvEstimate tv;
};

struct MuScanResult {
    std::vector<MuScanRow> rows;
    std::vector<MuScanPair> pairs;
    TvEstimate noise_floor;      // two independent runs at the largest k
};

namespace detail {

inline SiteSet window_sites(const Topology& topo, std::span<const Coord> offsets) {
    std::vector<SiteId> v;
    for (const auto& c : offsets) v.push_back(topo.site(c));
    return SiteSet(std::move(v));
}

inline EmpiricalMeasure relabel(const EmpiricalMeasure& m) {
    std::vector<SiteId> local(m.width());
    for (std::size_t i = 0; i < local.size(); ++i) local[i] = static_cast<SiteId>(i);
    EmpiricalMeasure out{SiteSet(local)};
    for (const auto& b : m.batches()) {
        out.start_batch();
        for (const auto& [p, w] : b.weights) out.add(p, w);
    }
    return out;
}

} // namespace detail

// Ergodic W-marginals of the torus laws for each k, with the TV distance
// between consecutive k and a same-law noise floor.
inline MuScanResult mu_convergence_scan(const MuScanParams& p) {
    if (p.k_list.empty()) throw InvalidParameter("k_list must be non-empty");
    std::vector<Coord> offsets = p.window;
    if (offsets.empty()) offsets.push_back(Coord(static_cast<std::size_t>(p.d), 0));
    if (offsets.size() > kMaxWindowSites) throw CapacityError("window exceeds the 20-site cap");
    int reach = 0;
    for (const auto& c : offsets) {
        if (c.size() != static_cast<std::size_t>(p.d)) throw InvalidParameter("window offset has the wrong dimension");
        for (int v : c) reach = std::max(reach, std::abs(v));
    }
    std::vector<int> ks = p.k_list;
    std::sort(ks.begin(), ks.end());
    if (reach >= ks.front()) throw InvalidParameter("window radius must be below every k");

    auto run = [&](int k, std::uint32_t stream) {
        auto topo = std::make_shared<const Topology>(Topology::box(p.d, k, Mode::torus));
        const SiteSet w = detail::window_sites(*topo, offsets);
        Engine e(topo, {p.lambda}, Rng(p.seed, static_cast<std::uint32_t>(k), stream));
        const double burn = p.burn_in >= 0.0 ? p.burn_in : default_burn_in(*topo, p.horizon);
        // positional labels: canonical site order is the same for every k
        return detail::relabel(estimate_marginal(e, w, burn, p.horizon, p.batches));
    };
    // one task per k plus the independent repeat of the largest k
    auto measures = parallel_map(ks.size() + 1, p.jobs, [&](std::size_t i) {
        return i < ks.size() ? run(ks[i], 20) : run(ks.back(), 21);
    });

    MuScanResult r;
    for (std::size_t i = 0; i < ks.size(); ++i) {
        MuScanRow row;
        row.k = ks[i];
        row.marginal = measures[i];
        row.density = measures[i].estimate_if([](Pattern q) { return (q & 1u) != 0; });
        r.rows.push_back(std::move(row));
    }
    for (std::size_t i = 0; i + 1 < ks.size(); ++i)
        r.pairs.push_back({ks[i], ks[i + 1], total_variation(measures[i], measures[i + 1], 200, p.seed)});
    r.noise_floor = total_variation(measures[ks.size() - 1], measures[ks.size()], 200, p.seed);
    return r;
}

struct StationarityResult {
    double t = 0.0;
    std::size_t replicas = 0;
    double lhs = 0.0;   // P(eta(t) in A) from stationary starts
    double lhs_se = 0.0;
    double rhs = 0.0;   // mu^k(A) from the same snapshots
    double rhs_se = 0.0;
    double pooled_se = 0.0;
    double z = 0.0;
};

// Start replicas from spaced snapshots of one long stationary run, evolve
// each for time t, and compare P(A) before and after.
inline StationarityResult stationarity_check(std::shared_ptr<const Topology> topo, double lambda,
                                             const CylinderEvent& a, double t, std::size_t replicas,
                                             std::uint64_t seed, unsigned jobs = 1, double burn_in = -1.0,
                                             double spacing = -1.0) {
    if (replicas < 100) throw InvalidParameter("stationarity check needs at least 100 replicas");
    if (!(t >= 0.0)) throw InvalidParameter("t must be >= 0");
    check_window(*topo, a.window());
    const auto inits = initial_configurations(topo, lambda, InitKind::stationary, 0.0, replicas, burn_in, spacing, seed);
    const auto after = replica_samples(topo, lambda, inits, t, seed, jobs);
    std::size_t before_hits = 0, after_hits = 0;
    for (std::size_t i = 0; i < replicas; ++i) {
        before_hits += a.holds(inits[i]);
        after_hits += a.holds(after[i]);
    }
    StationarityResult r;
    r.t = t;
    r.replicas = replicas;
    r.rhs = static_cast<double>(before_hits) / static_cast<double>(replicas);
    r.lhs = static_cast<double>(after_hits) / static_cast<double>(replicas);
    r.rhs_se = binomial_se(before_hits, replicas);
    r.lhs_se = binomial_se(after_hits, replicas);
    r.pooled_se = std::sqrt(r.lhs_se * r.lhs_se + r.rhs_se * r.rhs_se);
    r.z = r.pooled_se > 0.0 ? (r.lhs - r.rhs) / r.pooled_se : 0.0;
    return r;
}

// CSV: one row per k, TV to the next k; last row is the noise floor
inline void write_mu_scan_csv(std::ostream& os, const MuScanResult& r) {
    os << "k,k_next,density,density_se,tv,tv_low,tv_high\n";
    for (std::size_t i = 0; i < r.rows.size(); ++i) {
        const auto& row = r.rows[i];
        os << row.k << ',';
        if (i < r.pairs.size()) os << r.pairs[i].k_next;
        os << ',' << format_number(row.density.value) << ',' << format_number(row.density.se) << ',';
        if (i < r.pairs.size())
            os << format_number(r.pairs[i].tv.value) << ',' << format_number(r.pairs[i].tv.ci.low) << ','
               << format_number(r.pairs[i].tv.ci.high);
        else
            os << ",,";
        os << '\n';
    }
    os << "noise_floor,," << ",," << format_number(r.noise_floor.value) << ',' << format_number(r.noise_floor.ci.low)
       << ',' << format_number(r.noise_floor.ci.high) << '\n';
}

} // namespace ffp
