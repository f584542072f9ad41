#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "ffp/blur.hpp"
#include "ffp/engine.hpp"
#include "ffp/error.hpp"
#include "ffp/lattice.hpp"
#include "ffp/measure.hpp"
#include "ffp/parallel.hpp"
#include "ffp/stats.hpp"

namespace ffp {

// Snapshots of one stationary run, bucketed by their pattern on J.
struct SnapshotBank {
    std::shared_ptr<const Topology> topo;
    SiteSet J;
    double spacing = 0.0;
    std::vector<Configuration> snapshots;
    std::map<Pattern, std::vector<std::size_t>> buckets;

    // Empirical J-law; keyed by J pattern (bit i = i-th site of J).
    Distribution distribution() const {
        Distribution d;
        const double n = static_cast<double>(snapshots.size());
        for (const auto& [p, idx] : buckets) d[p] = static_cast<double>(idx.size()) / n;
        return d;
    }

    // Same law as an EmpiricalMeasure over the positional window {0..|J|-1},
    // so banks on different topologies can be compared.
    EmpiricalMeasure measure(std::size_t batches = kDefaultBatches) const {
        std::vector<SiteId> local(J.size());
        for (std::size_t i = 0; i < local.size(); ++i) local[i] = static_cast<SiteId>(i);
        EmpiricalMeasure m{SiteSet(local)};
        if (snapshots.empty()) return m;
        batches = std::max<std::size_t>(1, std::min(batches, snapshots.size()));
        for (std::size_t b = 0; b < batches; ++b) {
            m.start_batch();
            const std::size_t lo = b * snapshots.size() / batches, hi = (b + 1) * snapshots.size() / batches;
            for (std::size_t i = lo; i < hi; ++i) m.add(pattern_of(snapshots[i], J), 1.0);
        }
        return m;
    }
};

inline SnapshotBank make_snapshot_bank(std::shared_ptr<const Topology> topo, double lambda, SiteSet J,
                                       std::size_t count, double burn_in, double spacing, Rng rng) {
    if (count == 0) throw InvalidParameter("snapshot bank needs at least one snapshot");
    check_window(*topo, J);
    SnapshotBank bank;
    bank.topo = topo;
    bank.J = std::move(J);
    bank.spacing = spacing > 0.0 ? spacing : relaxation_interval(lambda);
    if (burn_in < 0.0) burn_in = 10.0 * static_cast<double>(topo->size());
    Engine chain(topo, {lambda}, rng);
    bank.snapshots = stationary_snapshots(chain, burn_in, bank.spacing, count);
    for (std::size_t i = 0; i < bank.snapshots.size(); ++i)
        bank.buckets[pattern_of(bank.snapshots[i], bank.J)].push_back(i);
    return bank;
}

struct CoupleParams {
    int d = 2;
    double lambda = 1.0;
    int K = 6;                     // window radius (stands in for the infinite volume)
    int k = 3;                     // torus radius
    int r_i = 0;
    int L = 1;
    double t = 0.0;
    std::size_t replicas = 1000;
    std::size_t bank_size = 0;     // 0: same as replicas
    double burn_in = -1.0;         // negative: 10 |sites|
    double spacing = -1.0;         // negative: relaxation_interval
    Mode outer_mode = Mode::window;
    bool share_bank = false;       // only when both systems are identical
    std::uint64_t seed = 1;
    unsigned jobs = 1;
};

// Every geometry problem with the parameters, one message each.
inline std::vector<std::string> couple_violations(const CoupleParams& p) {
    std::vector<std::string> v;
    if (p.d < 1) v.push_back("d must be >= 1");
    if (!(p.lambda > 0.0)) v.push_back("lambda must be positive");
    if (p.r_i < 0) v.push_back("r_I must be >= 0");
    if (p.L < 0) v.push_back("L must be >= 0");
    if (p.k <= p.r_i + p.L)
        v.push_back("geometry: k must exceed r_I + L (k=" + std::to_string(p.k) +
                    ", r_I+L=" + std::to_string(p.r_i + p.L) + ")");
    if (p.K < p.k) v.push_back("geometry: K must be >= k");
    if (!(p.t >= 0.0)) v.push_back("t must be >= 0");
    if (p.d >= 1 && p.r_i >= 0 && p.L >= 0) {
        double j = 1.0;
        for (int i = 0; i < p.d; ++i) j *= 2.0 * (p.r_i + p.L) + 1.0;
        if (j > static_cast<double>(kMaxWindowSites))
            v.push_back("geometry: J = B_" + std::to_string(p.r_i + p.L) + " has " +
                        std::to_string(static_cast<long long>(j)) + " sites, above the 20-site cap");
    }
    if (p.share_bank && (p.K != p.k || p.outer_mode != Mode::torus))
        v.push_back("share_bank needs two identical systems (outer_mode torus and K == k)");
    return v;
}

struct CoupledRecord {
    bool initial_J_equal = false;
    bool agree_on_I = false;
    bool any_I_blurred = false;
    bool a_outer = false;
    bool a_torus = false;
    bool blur_equal = false;          // flags on the closure of J coincide
    std::vector<std::uint8_t> I_blurred; // per site of I, canonical order
};

// Window (or outer torus) system on B_K and torus on B_k driven by one event
// stream over B_K, started from a maximal coupling of the two J-laws.
class CoupledSystem {
public:
    explicit CoupledSystem(const CoupleParams& p) : p_(p) {
        auto bad = couple_violations(p);
        if (!bad.empty()) throw ValidationError(std::move(bad));
        outer_ = std::make_shared<const Topology>(Topology::box(p.d, p.K, p.outer_mode));
        inner_ = std::make_shared<const Topology>(Topology::box(p.d, p.k, Mode::torus));
        to_inner_.assign(outer_->size(), kNone);
        for (SiteId x = 0; x < outer_->size(); ++x)
            if (auto y = inner_->find(outer_->coords(x))) to_inner_[x] = *y;
        J_outer_ = outer_->box_sites(p.r_i + p.L);
        J_inner_ = inner_->box_sites(p.r_i + p.L);
        I_outer_ = outer_->box_sites(p.r_i);
        I_inner_ = inner_->box_sites(p.r_i);
        const std::size_t n = p.bank_size ? p.bank_size : std::max<std::size_t>(p.replicas, 1);
        outer_bank_ = make_snapshot_bank(outer_, p.lambda, J_outer_, n, p.burn_in, p.spacing, Rng(p.seed, 0, 10));
        inner_bank_ = p.share_bank ? rebase(outer_bank_, inner_, J_inner_)
                                   : make_snapshot_bank(inner_, p.lambda, J_inner_, n, p.burn_in, p.spacing,
                                                        Rng(p.seed, 0, 11));
        coupling_.emplace(outer_bank_.distribution(), inner_bank_.distribution());
    }

    const CoupleParams& params() const noexcept { return p_; }
    const Topology& outer() const noexcept { return *outer_; }
    const Topology& inner() const noexcept { return *inner_; }
    const SiteSet& J() const noexcept { return J_outer_; }
    const SiteSet& I() const noexcept { return I_outer_; }
    const SnapshotBank& outer_bank() const noexcept { return outer_bank_; }
    const SnapshotBank& inner_bank() const noexcept { return inner_bank_; }
    const MaximalCoupling& coupling() const noexcept { return *coupling_; }

    // Event A is given on sites of the outer topology inside I.
    CoupledRecord run(std::size_t rep, const CylinderEvent& a) const {
        if (!a.window().is_subset_of(I_outer_)) throw InvalidParameter("event window must lie inside I");
        const SiteSet a_inner = map_inner(a.window());

        Rng pick(p_.seed, static_cast<std::uint32_t>(rep), 12);
        const auto [po, pi] = coupling_->sample(pick);
        const auto& bo = outer_bank_.buckets.at(po);
        const auto& bi = inner_bank_.buckets.at(pi);
        // one uniform for both buckets so a diagonal draw from identical
        // banks lands on the same snapshot
        const double u = pick.uniform();
        const auto idx = [u](std::size_t n) { return std::min(n - 1, static_cast<std::size_t>(u * static_cast<double>(n))); };

        Engine eo(outer_, {p_.lambda}, Rng(p_.seed, static_cast<std::uint32_t>(rep), 13),
                  outer_bank_.snapshots[bo[idx(bo.size())]]);
        Engine ei(inner_, {p_.lambda}, Rng(p_.seed, static_cast<std::uint32_t>(rep), 14),
                  inner_bank_.snapshots[bi[idx(bi.size())]]);

        CoupledRecord r;
        r.initial_J_equal = pattern_of(eo.configuration(), J_outer_) == pattern_of(ei.configuration(), J_inner_);
        BlurState blur_o = init_blur(eo.configuration(), *outer_, J_outer_, 0.0);
        BlurState blur_i = init_blur(ei.configuration(), *inner_, J_inner_, 0.0);

        EventStream stream(outer_->size(), p_.lambda, Rng(p_.seed, static_cast<std::uint32_t>(rep), 15));
        double now = 0.0;
        for (;;) {
            Event e = stream.next(now);
            if (e.time > p_.t) break;
            now = e.time;
            eo.apply_event(e);
            update_blur(blur_o, eo, e);
            if (const SiteId y = to_inner_[e.site]; y != kNone) {
                Event f = e;
                f.site = y;
                ei.apply_event(f);
                update_blur(blur_i, ei, f);
            }
        }
        eo.advance_clock(std::max(eo.clock(), p_.t));
        ei.advance_clock(std::max(ei.clock(), p_.t));

        r.agree_on_I = pattern_of(eo.configuration(), I_outer_) == pattern_of(ei.configuration(), I_inner_);
        r.I_blurred.resize(I_outer_.size());
        for (std::size_t i = 0; i < I_outer_.size(); ++i) {
            r.I_blurred[i] = blur_o.blurred(I_outer_[i]);
            r.any_I_blurred = r.any_I_blurred || r.I_blurred[i];
        }
        r.a_outer = a.holds(eo.configuration());
        r.a_torus = a.holds_pattern(pattern_of(ei.configuration(), a_inner));
        const SiteSet& co = blur_o.closure();
        const SiteSet& ci = blur_i.closure();
        r.blur_equal = co.size() == ci.size();
        for (std::size_t i = 0; r.blur_equal && i < co.size(); ++i)
            r.blur_equal = blur_o.blurred(co[i]) == blur_i.blurred(ci[i]);
        return r;
    }

    std::vector<CoupledRecord> run_all(const CylinderEvent& a) const {
        return parallel_map(p_.replicas, p_.jobs, [&](std::size_t rep) { return run(rep, a); });
    }

private:
    static constexpr SiteId kNone = ~SiteId{0};

    SiteSet map_inner(const SiteSet& s) const {
        std::vector<SiteId> v;
        for (SiteId x : s) v.push_back(to_inner_.at(x));
        return SiteSet(v);
    }

    // Copy of a bank expressed on another (identical) topology.
    static SnapshotBank rebase(const SnapshotBank& b, std::shared_ptr<const Topology> topo, SiteSet J) {
        if (topo->size() != b.topo->size()) throw PreconditionError("shared bank needs identical topologies");
        SnapshotBank out = b;
        out.topo = std::move(topo);
        out.J = std::move(J);
        return out;
    }

    CoupleParams p_;
    std::shared_ptr<const Topology> outer_, inner_;
    std::vector<SiteId> to_inner_;
    SiteSet J_outer_, J_inner_, I_outer_, I_inner_;
    SnapshotBank outer_bank_, inner_bank_;
    std::optional<MaximalCoupling> coupling_;
};

inline std::vector<CoupledRecord> coupled_run(const CoupleParams& p, const CylinderEvent& a) {
    return CoupledSystem(p).run_all(a);
}

struct Lemma1Report {
    CoupleParams params;
    std::size_t replicas = 0;
    double lhs = 0.0;
    double lhs_se = 0.0;
    double blur_term = 0.0;     // |I| max_x P(x blurred)
    double blur_se = 0.0;
    double tv = 0.0;
    Interval tv_ci;
    double tv_term = 0.0;       // 2 TV
    double tv_se = 0.0;
    double pooled_se = 0.0;
    double initial_equal_rate = 0.0;
    std::size_t domination_violations = 0;
    std::size_t blur_mismatches = 0;
    Verdict verdict = Verdict::inconclusive;
};

// Summarize coupled records into the three terms of the bound
//   |P(eta(t) in A) - P(eta^k(t) in A)| <= |I| sup_x P(blurred) + 2 TV.
inline Lemma1Report summarize_lemma1(const CoupledSystem& sys, std::span<const CoupledRecord> recs) {
    Lemma1Report r;
    r.params = sys.params();
    r.replicas = recs.size();
    const auto tv = total_variation(sys.outer_bank().measure(), sys.inner_bank().measure(), 200, sys.params().seed);
    r.tv = tv.value;
    r.tv_ci = tv.ci;
    r.tv_term = 2.0 * tv.value;
    r.tv_se = 2.0 * tv.se;
    if (recs.empty()) return r;

    std::vector<double> diff;
    diff.reserve(recs.size());
    std::vector<std::size_t> blurred(recs.front().I_blurred.size(), 0);
    std::size_t equal = 0;
    for (const auto& c : recs) {
        diff.push_back(static_cast<double>(c.a_outer) - static_cast<double>(c.a_torus));
        for (std::size_t i = 0; i < blurred.size(); ++i) blurred[i] += c.I_blurred[i];
        equal += c.initial_J_equal;
        if (c.initial_J_equal && !c.any_I_blurred && !c.agree_on_I) ++r.domination_violations;
        if (c.initial_J_equal && !c.blur_equal) ++r.blur_mismatches;
    }
    const auto ms = mean_and_se(diff);
    r.lhs = std::abs(ms.mean);
    r.lhs_se = ms.se;
    const std::size_t worst = blurred.empty() ? 0 : *std::max_element(blurred.begin(), blurred.end());
    const double isize = static_cast<double>(blurred.size());
    r.blur_term = isize * static_cast<double>(worst) / static_cast<double>(recs.size());
    r.blur_se = isize * binomial_se(worst, recs.size());
    r.initial_equal_rate = static_cast<double>(equal) / static_cast<double>(recs.size());
    r.pooled_se = std::sqrt(r.lhs_se * r.lhs_se + r.blur_se * r.blur_se + r.tv_se * r.tv_se);
    r.verdict = r.lhs <= r.blur_term + r.tv_term + 3.0 * r.pooled_se ? Verdict::holds : Verdict::violated;
    return r;
}

inline Lemma1Report lemma1_experiment(const CoupleParams& p, const CylinderEvent& a) {
    if (p.replicas < 500) throw InvalidParameter("coupling experiment needs at least 500 replicas");
    CoupledSystem sys(p);
    const auto recs = sys.run_all(a);
    return summarize_lemma1(sys, recs);
}

// CSV: replica,initial_J_equal,agree_on_I,any_I_blurred,a_outer,a_torus,blur_equal
inline void write_coupled_csv(std::ostream& os, std::span<const CoupledRecord> recs) {
    os << "replica,initial_J_equal,agree_on_I,any_I_blurred,a_outer,a_torus,blur_equal\n";
    for (std::size_t i = 0; i < recs.size(); ++i) {
        const auto& c = recs[i];
        os << i << ',' << c.initial_J_equal << ',' << c.agree_on_I << ',' << c.any_I_blurred << ',' << c.a_outer
           << ',' << c.a_torus << ',' << c.blur_equal << '\n';
    }
}

inline void write_lemma1_csv(std::ostream& os, std::span<const Lemma1Report> reps) {
    os << "d,lambda,K,k,r_I,L,t,replicas,lhs,lhs_se,blur_term,blur_se,tv,tv_low,tv_high,tv_term,pooled_se,"
          "initial_equal_rate,domination_violations,blur_mismatches,verdict\n";
    for (const auto& r : reps) {
        const auto& p = r.params;
        os << p.d << ',' << format_number(p.lambda) << ',' << p.K << ',' << p.k << ',' << p.r_i << ',' << p.L << ','
           << format_number(p.t) << ',' << r.replicas << ',' << format_number(r.lhs) << ',' << format_number(r.lhs_se)
           << ',' << format_number(r.blur_term) << ',' << format_number(r.blur_se) << ',' << format_number(r.tv) << ','
           << format_number(r.tv_ci.low) << ',' << format_number(r.tv_ci.high) << ',' << format_number(r.tv_term)
           << ',' << format_number(r.pooled_se) << ',' << format_number(r.initial_equal_rate) << ','
           << r.domination_violations << ',' << r.blur_mismatches << ',' << to_string(r.verdict) << '\n';
    }
}

} // namespace ffp
