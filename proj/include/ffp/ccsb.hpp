#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "ffp/error.hpp"
#include "ffp/lattice.hpp"
#include "ffp/measure.hpp"
#include "ffp/sampling.hpp"
#include "ffp/stats.hpp"

namespace ffp {

// Conditioned cluster-size bound query:
//   P(|C_x| > m and U_{y in B} C_y = D) <= delta * P(U_{y in B} C_y = D).
struct CcsbQuery {
    std::string id = "q";
    SiteSet B;
    SiteSet D;
    SiteId x = 0;
    std::size_t m = 0;
    double delta = 0.0;
    double s = 0.0; // observation time of the samples, recorded only
};

inline constexpr std::size_t kMinConditioningCount = 50;

struct CcsbReport {
    std::string id;
    std::string sampler;
    std::size_t m = 0;
    double delta = 0.0;
    std::size_t samples = 0;
    std::size_t joint_count = 0;
    std::size_t cond_count = 0;
    double joint = 0.0;
    double cond = 0.0;
    double bound = 0.0; // delta * cond
    Interval joint_ci;
    Interval cond_ci;
    Interval excess_ci; // CI of joint - delta * cond
    Verdict verdict = Verdict::inconclusive;
};

// Check the inequality on a list of configurations sampled at time s.
// Verdict: holds when the 95% CI of (joint - delta cond) lies at or below 0,
// violated when it lies above 0, inconclusive otherwise or when fewer than 50
// samples meet the conditioning event.
inline CcsbReport ccsb_check(const Topology& topo, std::span<const Configuration> samples, const CcsbQuery& q,
                             std::string sampler = "") {
    if (q.D.contains(q.x)) throw InvalidParameter("query site x must not lie in D");
    topo.check(q.x);
    for (SiteId y : q.B) topo.check(y);
    for (SiteId y : q.D) topo.check(y);
    CcsbReport r;
    r.id = q.id;
    r.sampler = std::move(sampler);
    r.m = q.m;
    r.delta = q.delta;
    r.samples = samples.size();
    std::vector<double> excess;
    excess.reserve(samples.size());
    for (const auto& c : samples) {
        const bool cond = cluster_union(c, topo, q.B) == q.D;
        const bool big = cluster_of(c, topo, q.x).size() > q.m;
        r.cond_count += cond;
        r.joint_count += cond && big;
        excess.push_back((cond && big ? 1.0 : 0.0) - q.delta * (cond ? 1.0 : 0.0));
    }
    const double n = static_cast<double>(samples.size());
    if (samples.empty()) return r;
    r.joint = static_cast<double>(r.joint_count) / n;
    r.cond = static_cast<double>(r.cond_count) / n;
    r.bound = q.delta * r.cond;
    r.joint_ci = wilson_interval(r.joint_count, samples.size());
    r.cond_ci = wilson_interval(r.cond_count, samples.size());
    const auto ms = mean_and_se(excess);
    r.excess_ci = {ms.mean - kZ95 * ms.se, ms.mean + kZ95 * ms.se};
    if (r.cond_count < kMinConditioningCount) r.verdict = Verdict::inconclusive;
    else if (r.excess_ci.high <= 0.0) r.verdict = Verdict::holds;
    else if (r.excess_ci.low > 0.0) r.verdict = Verdict::violated;
    else r.verdict = Verdict::inconclusive;
    return r;
}

struct TailRow {
    std::size_t m = 0;
    std::size_t count = 0;
    std::size_t samples = 0;
    double p_hat = 0.0;
    Interval ci;
};

struct TailTable {
    std::vector<TailRow> rows;
    std::size_t max_cluster = 0;
};

// Empirical survival function P(|C_x| > m) over the samples.
inline TailTable cluster_size_tail(const Topology& topo, std::span<const Configuration> samples, SiteId x,
                                   std::span<const std::size_t> m_list) {
    topo.check(x);
    std::vector<std::size_t> sizes;
    sizes.reserve(samples.size());
    TailTable t;
    for (const auto& c : samples) {
        sizes.push_back(cluster_of(c, topo, x).size());
        t.max_cluster = std::max(t.max_cluster, sizes.back());
    }
    for (std::size_t m : m_list) {
        TailRow row;
        row.m = m;
        row.samples = samples.size();
        row.count = static_cast<std::size_t>(std::count_if(sizes.begin(), sizes.end(), [m](std::size_t s) { return s > m; }));
        row.p_hat = samples.empty() ? 0.0 : static_cast<double>(row.count) / static_cast<double>(samples.size());
        row.ci = wilson_interval(row.count, samples.size());
        t.rows.push_back(row);
    }
    return t;
}

struct UniformityRow {
    double s = 0.0;
    std::size_t count = 0;
    std::size_t samples = 0;
    double p_hat = 0.0;
    Interval ci;
};

struct UniformityProbe {
    std::vector<UniformityRow> rows;
    double settled_from = -1.0; // first s from which every later CI overlaps the last one; -1 if none
};

// Tail P(|C_x| > m) at several times from a non-stationary start. A
// diagnostic only: agreement across s is evidence, not proof, of uniformity.
inline UniformityProbe time_uniformity_probe(const std::shared_ptr<const Topology>& topo, double lambda, SiteId x,
                                             std::size_t m, std::vector<double> s_list, std::size_t replicas,
                                             InitKind init, double init_p, std::uint64_t seed, unsigned jobs = 1) {
    topo->check(x);
    if (s_list.empty()) throw InvalidParameter("s_list must be non-empty");
    std::sort(s_list.begin(), s_list.end());
    if (!(s_list.front() >= 0.0)) throw InvalidParameter("times must be >= 0");
    const auto inits = initial_configurations(topo, lambda, init, init_p, replicas, -1.0, -1.0, seed);
    // each replica is observed at every s along one trajectory
    const auto hits = parallel_map(replicas, jobs, [&](std::size_t i) {
        Engine e(topo, {lambda}, Rng(seed, static_cast<std::uint32_t>(i), 3), inits[i]);
        std::vector<std::uint8_t> h;
        for (double s : s_list) {
            e.run_until(s);
            h.push_back(cluster_of(e.configuration(), *topo, x).size() > m);
        }
        return h;
    });
    UniformityProbe out;
    for (std::size_t j = 0; j < s_list.size(); ++j) {
        UniformityRow r;
        r.s = s_list[j];
        r.samples = replicas;
        for (const auto& h : hits) r.count += h[j];
        r.p_hat = replicas ? static_cast<double>(r.count) / static_cast<double>(replicas) : 0.0;
        r.ci = wilson_interval(r.count, replicas);
        out.rows.push_back(r);
    }
    const Interval last = out.rows.back().ci;
    for (std::size_t j = out.rows.size(); j-- > 0;) {
        const auto& c = out.rows[j].ci;
        if (c.high < last.low || c.low > last.high) break;
        out.settled_from = out.rows[j].s;
    }
    return out;
}

// CSV: query id, m, delta, joint, cond, bound, verdict
inline void write_ccsb_csv(std::ostream& os, std::span<const CcsbReport> reports) {
    os << "query,m,delta,joint,cond,bound,verdict\n";
    for (const auto& r : reports)
        os << r.id << ',' << r.m << ',' << format_number(r.delta) << ',' << format_number(r.joint) << ','
           << format_number(r.cond) << ',' << format_number(r.bound) << ',' << to_string(r.verdict) << '\n';
}

} // namespace ffp
