#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <span>
#include <vector>

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "ffp/engine.hpp"
#include "ffp/error.hpp"
#include "ffp/lattice.hpp"
#include "ffp/measure.hpp"

namespace ffp {

inline constexpr std::size_t kExactStateCap = 16;

// Stationary law of the finite forest-fire chain over all 2^N configurations.
// State s encodes site i in bit i.
struct ExactDistribution {
    std::vector<double> probability;
    double residual = 0.0; // max_j |(pi Q)_j|
    std::size_t sites = 0;
    bool used_fallback = false;

    double operator[](std::uint32_t state) const { return probability[state]; }

    double site_density(SiteId x) const {
        double s = 0.0;
        for (std::uint32_t st = 0; st < probability.size(); ++st)
            if (st >> x & 1u) s += probability[st];
        return s;
    }

    // Marginal on a window, keyed by window pattern.
    Distribution marginal(const SiteSet& window) const {
        Distribution d;
        for (std::uint32_t st = 0; st < probability.size(); ++st) {
            Pattern p = 0;
            for (std::size_t i = 0; i < window.size(); ++i)
                if (st >> window[i] & 1u) p |= Pattern{1} << i;
            d[p] += probability[st];
        }
        return d;
    }

    double event_probability(const CylinderEvent& a) const {
        double s = 0.0;
        for (std::uint32_t st = 0; st < probability.size(); ++st) {
            Pattern p = 0;
            for (std::size_t i = 0; i < a.window().size(); ++i)
                if (st >> a.window()[i] & 1u) p |= Pattern{1} << i;
            if (a.holds_pattern(p)) s += probability[st];
        }
        return s;
    }
};

namespace detail {

// Calls f(target, rate) for every transition out of `state`.
template <class F>
void for_each_transition(std::uint32_t state, std::span<const std::uint32_t> nbr_mask, double lambda, F&& f) {
    const std::size_t n = nbr_mask.size();
    std::uint32_t done = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint32_t bit = std::uint32_t{1} << i;
        if (!(state & bit)) {
            f(state | bit, 1.0);
            continue;
        }
        if (done & bit) continue;
        // cluster of i inside `state`, grown by flood fill on bitmasks
        std::uint32_t cluster = bit, frontier = bit;
        while (frontier) {
            std::uint32_t next = 0;
            for (std::uint32_t f2 = frontier; f2; f2 &= f2 - 1) next |= nbr_mask[std::countr_zero(f2)];
            next &= state & ~cluster;
            cluster |= next;
            frontier = next;
        }
        done |= cluster;
        f(state & ~cluster, lambda * std::popcount(cluster));
    }
}

inline std::vector<std::uint32_t> neighbor_masks(const Topology& topo) {
    std::vector<std::uint32_t> m(topo.size(), 0);
    for (SiteId x = 0; x < topo.size(); ++x)
        for (SiteId y : topo.adjacent(x)) m[x] |= std::uint32_t{1} << y;
    return m;
}

} // namespace detail

// Largest |(pi Q)_j| over all states.
inline double balance_residual(const Topology& topo, double lambda, std::span<const double> pi) {
    const auto masks = detail::neighbor_masks(topo);
    std::vector<double> flow(pi.size(), 0.0);
    for (std::uint32_t s = 0; s < pi.size(); ++s) {
        detail::for_each_transition(s, masks, lambda, [&](std::uint32_t t, double rate) {
            flow[t] += pi[s] * rate;
            flow[s] -= pi[s] * rate;
        });
    }
    double r = 0.0;
    for (double v : flow) r = std::max(r, std::abs(v));
    return r;
}

// States up to which the balance system is factorized directly; sparse LU
// fill-in on the hypercube-shaped state graph grows too fast beyond this.
inline constexpr std::uint32_t kDirectStateLimit = 1u << 10;

// Solve global balance pi Q = 0, sum pi = 1. The last state is pinned to 1
// and dropped, leaving a sparse nonsingular system; sparse LU for small
// chains, BiCGSTAB above kDirectStateLimit, and power iteration on the
// uniformized chain if neither reaches the 1e-10 residual.
inline ExactDistribution exact_stationary(const Topology& topo, double lambda,
                                          std::size_t state_cap = kExactStateCap) {
    EngineParams{lambda}.validate();
    if (state_cap > 24) throw InvalidParameter("exact solver state cap above 24 sites is not supported");
    if (topo.size() > state_cap)
        throw CapacityError("exact solver supports at most " + std::to_string(state_cap) + " sites; topology has " +
                            std::to_string(topo.size()));
    const auto masks = detail::neighbor_masks(topo);
    const std::uint32_t states = std::uint32_t{1} << topo.size();
    ExactDistribution out;
    out.sites = topo.size();
    std::vector<double> exit(states, 0.0);

    auto normalize = [](std::vector<double>& v) {
        double total = 0.0;
        for (double& x : v) {
            if (x < 0.0 && x > -1e-14) x = 0.0;
            total += x;
        }
        for (double& x : v) x /= total;
    };

    bool ok = false;
    if (states == 1) {
        out.probability.assign(1, 1.0);
        ok = true;
    } else {
        using SpMat = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;
        const std::uint32_t last = states - 1;
        const auto m = static_cast<int>(last);
        std::vector<Eigen::Triplet<double, int>> trip;
        Eigen::VectorXd b = Eigen::VectorXd::Zero(m);
        for (std::uint32_t s = 0; s < states; ++s) {
            detail::for_each_transition(s, masks, lambda, [&](std::uint32_t t, double rate) {
                exit[s] += rate;
                if (t == last) return;
                if (s == last) b[static_cast<int>(t)] -= rate;
                else trip.emplace_back(static_cast<int>(t), static_cast<int>(s), rate);
            });
        }
        for (std::uint32_t s = 0; s < last; ++s) trip.emplace_back(static_cast<int>(s), static_cast<int>(s), -exit[s]);
        SpMat a(m, m);
        a.setFromTriplets(trip.begin(), trip.end());
        a.makeCompressed();

        Eigen::VectorXd x;
        if (states <= kDirectStateLimit) {
            Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>> lu;
            lu.compute(a);
            if (lu.info() == Eigen::Success) {
                x = lu.solve(b);
                for (int it = 0; it < 3 && lu.info() == Eigen::Success; ++it) {
                    Eigen::VectorXd r = b - a * x;
                    x += lu.solve(r);
                }
                ok = lu.info() == Eigen::Success;
            }
        } else {
            Eigen::BiCGSTAB<SpMat, Eigen::DiagonalPreconditioner<double>> solver;
            solver.setTolerance(1e-14);
            solver.setMaxIterations(20000);
            solver.compute(a);
            x = solver.solve(b);
            ok = solver.info() == Eigen::Success || solver.error() < 1e-10;
        }
        if (ok && x.allFinite()) {
            out.probability.assign(x.data(), x.data() + m);
            out.probability.push_back(1.0);
            normalize(out.probability);
            ok = balance_residual(topo, lambda, out.probability) <= 1e-10;
        } else {
            ok = false;
        }
    }
    if (!ok) {
        out.used_fallback = true;
        const double unif = *std::max_element(exit.begin(), exit.end()) * 1.05;
        std::vector<double> cur(states, 1.0 / states), next(states);
        for (int it = 0; it < 1000000; ++it) {
            std::fill(next.begin(), next.end(), 0.0);
            for (std::uint32_t s = 0; s < states; ++s) {
                next[s] += cur[s] * (1.0 - exit[s] / unif);
                detail::for_each_transition(s, masks, lambda,
                                            [&](std::uint32_t t, double rate) { next[t] += cur[s] * rate / unif; });
            }
            cur.swap(next);
            if (it % 100 == 99 && balance_residual(topo, lambda, cur) <= 1e-12) break;
        }
        out.probability = std::move(cur);
        normalize(out.probability);
    }
    out.residual = balance_residual(topo, lambda, out.probability);
    return out;
}

// Largest |pi(s) - pi(T s)| over all torus translations T and states s.
inline double translation_asymmetry(const Topology& topo, const ExactDistribution& dist) {
    if (topo.mode() != Mode::torus) throw InvalidParameter("translations act on torus topologies");
    const int d = topo.dimension();
    const int side = 2 * topo.radius() + 1;
    double worst = 0.0;
    std::vector<int> offset(d, 0);
    std::vector<SiteId> image(topo.size());
    std::size_t total = 1;
    for (int j = 0; j < d; ++j) total *= static_cast<std::size_t>(side);
    for (std::size_t code = 0; code < total; ++code) {
        std::size_t rem = code;
        for (int j = 0; j < d; ++j) {
            offset[j] = static_cast<int>(rem % side);
            rem /= side;
        }
        for (SiteId x = 0; x < topo.size(); ++x) image[x] = topo.translate(x, offset);
        for (std::uint32_t s = 0; s < dist.probability.size(); ++s) {
            std::uint32_t t = 0;
            for (SiteId x = 0; x < topo.size(); ++x)
                if (s >> x & 1u) t |= std::uint32_t{1} << image[x];
            worst = std::max(worst, std::abs(dist.probability[s] - dist.probability[t]));
        }
    }
    return worst;
}

// CSV: state,probability
inline void write_exact_csv(std::ostream& os, const ExactDistribution& dist) {
    os << "state,probability\n";
    for (std::uint32_t s = 0; s < dist.probability.size(); ++s)
        os << pattern_string(s, dist.sites) << ',' << format_number(dist.probability[s]) << '\n';
}

} // namespace ffp
