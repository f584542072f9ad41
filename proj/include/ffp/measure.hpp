#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <map>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "ffp/engine.hpp"
#include "ffp/error.hpp"
#include "ffp/lattice.hpp"
#include "ffp/rng.hpp"
#include "ffp/stats.hpp"

namespace ffp {

// Occupancy pattern on a window: bit i is the state of the i-th window site
// in canonical order.
using Pattern = std::uint32_t;

inline constexpr std::size_t kMaxWindowSites = 20;
inline constexpr std::size_t kDefaultBatches = 30;

inline void check_window(const Topology& topo, const SiteSet& window) {
    if (window.size() > kMaxWindowSites)
        throw CapacityError("window has " + std::to_string(window.size()) + " sites; the cap is " +
                            std::to_string(kMaxWindowSites));
    for (SiteId x : window) topo.check(x);
}

inline Pattern pattern_of(const Configuration& config, const SiteSet& window) {
    Pattern p = 0;
    for (std::size_t i = 0; i < window.size(); ++i)
        if (config.occupied(window[i])) p |= Pattern{1} << i;
    return p;
}

inline std::string pattern_string(Pattern p, std::size_t width) {
    std::string s(width, '0');
    for (std::size_t i = 0; i < width; ++i)
        if (p >> i & 1u) s[i] = '1';
    return s;
}

inline Pattern parse_pattern(std::string_view s) {
    if (s.size() > 32) throw InvalidParameter("pattern longer than 32 sites");
    Pattern p = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '1') p |= Pattern{1} << i;
        else if (s[i] != '0') throw InvalidParameter("pattern must be a 0/1 string");
    }
    return p;
}

// Normalized probabilities keyed by pattern.
using Distribution = std::map<Pattern, double>;

struct Estimate {
    double value = 0.0;
    double se = 0.0;
};

// Time-weighted distribution of window patterns. Weight is split into
// batches so that standard errors come from batch means; measures from
// independent replicas merge by concatenating batches.
class EmpiricalMeasure {
public:
    struct Batch {
        std::map<Pattern, double> weights;
        double time = 0.0;
    };

    EmpiricalMeasure() = default;
    explicit EmpiricalMeasure(SiteSet window) : window_(std::move(window)) {
        if (window_.size() > kMaxWindowSites) throw CapacityError("window exceeds the 20-site cap");
    }

    const SiteSet& window() const noexcept { return window_; }
    std::size_t width() const noexcept { return window_.size(); }
    double total_time() const noexcept { return total_; }
    const std::map<Pattern, double>& weights() const noexcept { return weights_; }
    const std::vector<Batch>& batches() const noexcept { return batches_; }
    std::size_t batch_count() const noexcept { return batches_.size(); }

    void start_batch() { batches_.emplace_back(); }

    void add(Pattern p, double w) {
        if (w <= 0.0) return;
        if (batches_.empty()) start_batch();
        weights_[p] += w;
        batches_.back().weights[p] += w;
        batches_.back().time += w;
        total_ += w;
    }

    double weight(Pattern p) const {
        auto it = weights_.find(p);
        return it == weights_.end() ? 0.0 : it->second;
    }

    double probability(Pattern p) const { return total_ > 0.0 ? weight(p) / total_ : 0.0; }

    // Probability and batch-means standard error of a set of patterns.
    template <class Pred>
    Estimate estimate_if(Pred&& pred) const {
        Estimate e;
        if (total_ <= 0.0) return e;
        double w = 0.0;
        for (const auto& [p, v] : weights_)
            if (pred(p)) w += v;
        e.value = w / total_;
        const std::size_t b = batches_.size();
        if (b < 2) return e;
        double ss = 0.0;
        for (const auto& batch : batches_) {
            double wb = 0.0;
            for (const auto& [p, v] : batch.weights)
                if (pred(p)) wb += v;
            const double r = wb - e.value * batch.time;
            ss += r * r;
        }
        e.se = std::sqrt(static_cast<double>(b) / static_cast<double>(b - 1) * ss) / total_;
        return e;
    }

    Estimate estimate(Pattern p) const {
        return estimate_if([p](Pattern q) { return q == p; });
    }

    double standard_error(Pattern p) const { return estimate(p).se; }

    Distribution distribution() const {
        Distribution d;
        if (total_ <= 0.0) return d;
        for (const auto& [p, v] : weights_) d[p] = v / total_;
        return d;
    }

    // Batches and weights add; the merged measure describes the pooled sample.
    void merge(const EmpiricalMeasure& other) {
        if (!(other.window_ == window_)) throw InvalidParameter("cannot merge measures on different windows");
        for (const auto& [p, v] : other.weights_) weights_[p] += v;
        batches_.insert(batches_.end(), other.batches_.begin(), other.batches_.end());
        total_ += other.total_;
    }

    // Measure rebuilt from a subset of batches (used by the bootstrap).
    EmpiricalMeasure from_batches(std::span<const std::size_t> picks) const {
        EmpiricalMeasure m(window_);
        for (std::size_t i : picks) {
            m.start_batch();
            for (const auto& [p, v] : batches_[i].weights) m.add(p, v);
        }
        return m;
    }

private:
    SiteSet window_;
    std::map<Pattern, double> weights_;
    std::vector<Batch> batches_;
    double total_ = 0.0;
};

// Accumulates time spent in each window pattern along an engine trajectory.
class PatternObserver {
public:
    PatternObserver(EmpiricalMeasure& m) : measure_(m) {}
    void accumulate(const Engine& e, double dt) {
        if (dt > 0.0) measure_.add(pattern_of(e.configuration(), measure_.window()), dt);
    }

private:
    EmpiricalMeasure& measure_;
};

// Default burn-in: max(10 |sites|, horizon / 5) time units.
inline double default_burn_in(const Topology& topo, double horizon) {
    return std::max(10.0 * static_cast<double>(topo.size()), horizon / 5.0);
}

// Time average of the window pattern over [burn_in, horizon] along one
// trajectory, with batch-means errors.
inline EmpiricalMeasure estimate_marginal(Engine& engine, const SiteSet& window, double burn_in,
                                          double horizon, std::size_t batches = kDefaultBatches) {
    if (!(horizon > burn_in)) throw InvalidParameter("horizon must exceed burn_in");
    if (batches < 2) throw InvalidParameter("at least two batches are needed for error bars");
    check_window(engine.topology(), window);
    if (engine.clock() > burn_in) throw InvalidParameter("engine clock is already past burn_in");
    engine.run_until(burn_in);
    EmpiricalMeasure m(window);
    PatternObserver obs(m);
    const double span = horizon - burn_in;
    for (std::size_t b = 0; b < batches; ++b) {
        m.start_batch();
        const double end = (b + 1 == batches) ? horizon : burn_in + span * static_cast<double>(b + 1) /
                                                                         static_cast<double>(batches);
        engine.run_until(end, obs);
    }
    return m;
}

// Occupied time per site, per batch.
class DensityObserver {
public:
    explicit DensityObserver(std::size_t sites) : sites_(sites) {}

    void start_batch() {
        occ_.emplace_back(sites_, 0.0);
        time_.push_back(0.0);
    }

    void accumulate(const Engine& e, double dt) {
        if (dt <= 0.0) return;
        if (occ_.empty()) start_batch();
        auto& row = occ_.back();
        const auto& c = e.configuration();
        for (SiteId x = 0; x < sites_; ++x)
            if (c.occupied(x)) row[x] += dt;
        time_.back() += dt;
    }

    // Density of every site with ratio batch-means errors.
    std::vector<Estimate> estimates() const {
        std::vector<Estimate> out(sites_);
        double total = 0.0;
        for (double t : time_) total += t;
        if (total <= 0.0) return out;
        const std::size_t b = time_.size();
        for (SiteId x = 0; x < sites_; ++x) {
            double w = 0.0;
            for (const auto& row : occ_) w += row[x];
            out[x].value = w / total;
            if (b < 2) continue;
            double ss = 0.0;
            for (std::size_t i = 0; i < b; ++i) {
                const double r = occ_[i][x] - out[x].value * time_[i];
                ss += r * r;
            }
            out[x].se = std::sqrt(static_cast<double>(b) / static_cast<double>(b - 1) * ss) / total;
        }
        return out;
    }

private:
    std::size_t sites_;
    std::vector<std::vector<double>> occ_;
    std::vector<double> time_;
};

// Time-averaged occupation density of every site over [burn_in, horizon].
inline std::vector<Estimate> estimate_site_densities(Engine& engine, double burn_in, double horizon,
                                                     std::size_t batches = kDefaultBatches) {
    if (!(horizon > burn_in)) throw InvalidParameter("horizon must exceed burn_in");
    if (batches < 2) throw InvalidParameter("at least two batches are needed for error bars");
    if (engine.clock() > burn_in) throw InvalidParameter("engine clock is already past burn_in");
    engine.run_until(burn_in);
    DensityObserver obs(engine.topology().size());
    const double span = horizon - burn_in;
    for (std::size_t b = 0; b < batches; ++b) {
        obs.start_batch();
        const double end = (b + 1 == batches) ? horizon : burn_in + span * static_cast<double>(b + 1) /
                                                                         static_cast<double>(batches);
        engine.run_until(end, obs);
    }
    return obs.estimates();
}

// Snapshots of one run at fixed spacing after a burn-in.
inline std::vector<Configuration> stationary_snapshots(Engine& engine, double burn_in, double spacing,
                                                       std::size_t count) {
    if (!(spacing > 0.0)) throw InvalidParameter("snapshot spacing must be positive");
    engine.run_until(std::max(engine.clock(), burn_in));
    std::vector<Configuration> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        engine.run_until(engine.clock() + spacing);
        out.push_back(engine.snapshot());
    }
    return out;
}

// Expected time for the slower of the two per-site clocks to ring once.
inline double relaxation_interval(double lambda) { return 1.0 / std::min(1.0, lambda); }

// Empirical measure of the window patterns of a snapshot list. Each snapshot
// carries weight `spacing`; consecutive snapshots are grouped into batches.
inline EmpiricalMeasure measure_from_snapshots(std::span<const Configuration> snaps, const SiteSet& window,
                                               double spacing = 1.0,
                                               std::size_t batches = kDefaultBatches) {
    EmpiricalMeasure m(window);
    if (snaps.empty()) return m;
    batches = std::max<std::size_t>(1, std::min(batches, snaps.size()));
    for (std::size_t b = 0; b < batches; ++b) {
        m.start_batch();
        const std::size_t lo = snaps.size() * b / batches;
        const std::size_t hi = snaps.size() * (b + 1) / batches;
        for (std::size_t i = lo; i < hi; ++i) m.add(pattern_of(snaps[i], window), spacing);
    }
    return m;
}

// Plug-in total variation distance between two distributions.
inline double total_variation(const Distribution& p, const Distribution& q) {
    double s = 0.0;
    auto ip = p.begin();
    auto iq = q.begin();
    while (ip != p.end() || iq != q.end()) {
        if (iq == q.end() || (ip != p.end() && ip->first < iq->first)) {
            s += std::abs(ip->second);
            ++ip;
        } else if (ip == p.end() || iq->first < ip->first) {
            s += std::abs(iq->second);
            ++iq;
        } else {
            s += std::abs(ip->second - iq->second);
            ++ip;
            ++iq;
        }
    }
    return std::min(1.0, 0.5 * s);
}

struct TvEstimate {
    double value = 0.0;
    double se = 0.0;
    Interval ci;
};

// Plug-in TV between two empirical measures, with a batch bootstrap for the
// confidence interval and standard error.
inline TvEstimate total_variation(const EmpiricalMeasure& p, const EmpiricalMeasure& q,
                                  std::size_t resamples = 200, std::uint64_t seed = 0x7f4a7c15) {
    if (!(p.window() == q.window())) throw InvalidParameter("total variation needs identical windows");
    TvEstimate r;
    r.value = total_variation(p.distribution(), q.distribution());
    r.ci = {r.value, r.value};
    if (resamples == 0 || p.batch_count() < 2 || q.batch_count() < 2) return r;
    Rng rng(seed, 0, 0x7b);
    std::vector<double> boot;
    boot.reserve(resamples);
    std::vector<std::size_t> pick_p(p.batch_count()), pick_q(q.batch_count());
    for (std::size_t i = 0; i < resamples; ++i) {
        for (auto& v : pick_p) v = rng.below(p.batch_count());
        for (auto& v : pick_q) v = rng.below(q.batch_count());
        boot.push_back(total_variation(p.from_batches(pick_p).distribution(),
                                       q.from_batches(pick_q).distribution()));
    }
    r.se = mean_and_se(boot).se * std::sqrt(static_cast<double>(boot.size()));
    r.ci = {quantile(boot, 0.025), quantile(boot, 0.975)};
    return r;
}

// Joint law of two distributions maximizing P(first == second).
class MaximalCoupling {
public:
    MaximalCoupling(const Distribution& p, const Distribution& q) {
        auto ip = p.begin();
        auto iq = q.begin();
        auto push = [](Table& t, Pattern k, double w) {
            if (w > 0.0) {
                t.keys.push_back(k);
                t.cum.push_back((t.cum.empty() ? 0.0 : t.cum.back()) + w);
            }
        };
        while (ip != p.end() || iq != q.end()) {
            if (iq == q.end() || (ip != p.end() && ip->first < iq->first)) {
                push(excess_p_, ip->first, ip->second);
                ++ip;
            } else if (ip == p.end() || iq->first < ip->first) {
                push(excess_q_, iq->first, iq->second);
                ++iq;
            } else {
                push(overlap_, ip->first, std::min(ip->second, iq->second));
                push(excess_p_, ip->first, ip->second - iq->second);
                push(excess_q_, iq->first, iq->second - ip->second);
                ++ip;
                ++iq;
            }
        }
        const double a = overlap_.total(), b = excess_p_.total(), c = excess_q_.total();
        overlap_mass_ = a / std::max(a + std::max(b, c), 1e-300);
    }

    // Sum of min(p, q): the probability that the coupled pair agrees.
    double overlap() const noexcept { return overlap_mass_; }
    double total_variation() const noexcept { return 1.0 - overlap_mass_; }

    std::pair<Pattern, Pattern> sample(Rng& rng) const {
        const double u = rng.uniform();
        const bool diag = excess_p_.keys.empty() || excess_q_.keys.empty() || u < overlap_mass_;
        if (diag && !overlap_.keys.empty()) {
            const Pattern k = overlap_.draw(rng.uniform());
            return {k, k};
        }
        return {excess_p_.draw(rng.uniform()), excess_q_.draw(rng.uniform())};
    }

private:
    struct Table {
        std::vector<Pattern> keys;
        std::vector<double> cum;

        double total() const { return cum.empty() ? 0.0 : cum.back(); }
        Pattern draw(double u) const {
            if (keys.empty()) throw PreconditionError("sampling from an empty distribution");
            const double x = u * cum.back();
            auto it = std::upper_bound(cum.begin(), cum.end(), x);
            if (it == cum.end()) --it;
            return keys[static_cast<std::size_t>(it - cum.begin())];
        }
    };

    Table overlap_, excess_p_, excess_q_;
    double overlap_mass_ = 0.0;
};

inline std::pair<Pattern, Pattern> maximal_coupling_sample(const EmpiricalMeasure& p, const EmpiricalMeasure& q,
                                                           Rng& rng) {
    if (!(p.window() == q.window())) throw InvalidParameter("maximal coupling needs identical windows");
    return MaximalCoupling(p.distribution(), q.distribution()).sample(rng);
}

// Event determined by the occupancy of a finite window.
class CylinderEvent {
public:
    using Predicate = std::function<bool(Pattern)>;

    CylinderEvent(SiteSet window, Predicate pred) : window_(std::move(window)), pred_(std::move(pred)) {
        if (window_.size() > 32) throw CapacityError("cylinder window larger than 32 sites");
    }

    // Window shows exactly the given pattern.
    static CylinderEvent pattern(SiteSet window, Pattern required) {
        return {std::move(window), [required](Pattern p) { return p == required; }};
    }

    static CylinderEvent full_space(SiteSet window) {
        return {std::move(window), [](Pattern) { return true; }};
    }

    static CylinderEvent site_occupied(SiteId x) { return pattern(SiteSet{x}, 1); }

    CylinderEvent complement() const {
        auto pred = pred_;
        return {window_, [pred](Pattern p) { return !pred(p); }};
    }

    const SiteSet& window() const noexcept { return window_; }
    bool holds_pattern(Pattern p) const { return pred_(p); }
    bool holds(const Configuration& config) const { return pred_(pattern_of(config, window_)); }

private:
    SiteSet window_;
    Predicate pred_;
};

// Probability (with batch-means error) that a measure's window pattern lies in A.
inline Estimate cylinder_estimate(const EmpiricalMeasure& measure, const CylinderEvent& a) {
    if (!a.window().is_subset_of(measure.window()))
        throw InvalidParameter("cylinder window is not inside the measure window");
    std::vector<std::size_t> pos;
    for (SiteId x : a.window()) pos.push_back(*measure.window().position(x));
    auto project = [&pos](Pattern p) {
        Pattern out = 0;
        for (std::size_t i = 0; i < pos.size(); ++i)
            if (p >> pos[i] & 1u) out |= Pattern{1} << i;
        return out;
    };
    return measure.estimate_if([&](Pattern p) { return a.holds_pattern(project(p)); });
}

inline double cylinder_probability(const EmpiricalMeasure& measure, const CylinderEvent& a) {
    return cylinder_estimate(measure, a).value;
}

inline std::string format_number(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

// CSV: pattern,weight,probability,stderr
inline void write_measure_csv(std::ostream& os, const EmpiricalMeasure& m) {
    os << "pattern,weight,probability,stderr\n";
    for (const auto& [p, w] : m.weights()) {
        const auto e = m.estimate(p);
        os << pattern_string(p, m.width()) << ',' << format_number(w) << ',' << format_number(e.value) << ','
           << format_number(e.se) << '\n';
    }
}

} // namespace ffp
