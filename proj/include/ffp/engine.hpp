#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "ffp/cluster_index.hpp"
#include "ffp/error.hpp"
#include "ffp/lattice.hpp"
#include "ffp/rng.hpp"

namespace ffp {

struct EngineParams {
    double lambda = 1.0; // ignition rate per site; growth rate is 1

    void validate() const {
        if (!(lambda > 0.0) || !std::isfinite(lambda)) throw InvalidParameter("lambda must be positive");
    }
};

enum class EventKind : std::uint8_t { growth, ignition };

inline const char* to_string(EventKind k) { return k == EventKind::growth ? "growth" : "ignition"; }

struct Event {
    double time = 0.0;
    SiteId site = 0;
    EventKind kind = EventKind::growth;

    friend bool operator==(const Event&, const Event&) = default;
};

struct EventOutcome {
    bool effective = false;  // growth on a vacant site, or ignition on an occupied one
    std::size_t burned = 0;  // sites vacated by an effective ignition
};

// Superposition of the per-site growth (rate 1) and ignition (rate lambda)
// Poisson clocks over n sites: exponential gaps of rate n(1+lambda), a
// uniform site, and a growth/ignition mark with odds 1 : lambda.
class EventStream {
public:
    EventStream(std::size_t sites, double lambda, Rng rng)
        : sites_(sites), lambda_(lambda), total_rate_(static_cast<double>(sites) * (1.0 + lambda)),
          p_growth_(1.0 / (1.0 + lambda)), rng_(rng) {
        if (sites == 0) throw PreconditionError("event stream over an empty site set");
        EngineParams{lambda}.validate();
    }

    Event next(double after) {
        Event e;
        e.time = after + rng_.exponential(total_rate_);
        e.site = static_cast<SiteId>(rng_.below(sites_));
        e.kind = rng_.uniform() < p_growth_ ? EventKind::growth : EventKind::ignition;
        return e;
    }

    double total_rate() const noexcept { return total_rate_; }
    std::size_t sites() const noexcept { return sites_; }
    double lambda() const noexcept { return lambda_; }

private:
    std::size_t sites_;
    double lambda_;
    double total_rate_;
    double p_growth_;
    Rng rng_;
};

struct EventCounts {
    std::uint64_t growth = 0;
    std::uint64_t ignition = 0;
    std::uint64_t effective_growth = 0;
    std::uint64_t effective_ignition = 0;
    std::uint64_t sites_burned = 0;

    std::uint64_t total() const noexcept { return growth + ignition; }
};

class Engine;

// Observers passed to Engine::run_until may provide either hook:
//   accumulate(const Engine&, double holding_time)  -- called for every
//       piece of the piecewise-constant path, weighted by its duration;
//   on_event(const Engine&, const Event&, const EventOutcome&) -- called after
//       each applied event.
template <class O>
concept TimeObserver = requires(O& o, const Engine& e, double dt) { o.accumulate(e, dt); };

template <class O>
concept EventObserver = requires(O& o, const Engine& e, const Event& ev, const EventOutcome& out) {
    o.on_event(e, ev, out);
};

// Exact event-driven forest-fire simulation on a finite topology.
class Engine {
public:
    Engine(std::shared_ptr<const Topology> topo, EngineParams params, Rng rng)
        : Engine(topo, params, rng, Configuration(topo ? topo->size() : 0)) {}

    Engine(std::shared_ptr<const Topology> topo, EngineParams params, Rng rng, Configuration initial)
        : topo_(std::move(topo)), params_(params), config_(std::move(initial)) {
        if (!topo_) throw InvalidParameter("engine needs a topology");
        params_.validate();
        detail::check_config(config_, *topo_);
        stream_.emplace(topo_->size(), params_.lambda, rng);
        clusters_ = ClusterIndex(config_, *topo_);
        occupied_ = config_.count();
    }

    const Topology& topology() const noexcept { return *topo_; }
    std::shared_ptr<const Topology> topology_ptr() const noexcept { return topo_; }
    const EngineParams& params() const noexcept { return params_; }
    const Configuration& configuration() const noexcept { return config_; }
    double clock() const noexcept { return clock_; }
    const EventCounts& counts() const noexcept { return counts_; }
    std::size_t occupied_count() const noexcept { return occupied_; }
    ClusterIndex& clusters() noexcept { return clusters_; }

    // Members of x's cluster from the incremental index (empty if vacant).
    std::span<const SiteId> cluster_members(SiteId x) const { return clusters_.members(x); }
    const ClusterIndex& clusters() const noexcept { return clusters_; }

    // Sample the next event of the superposed clocks and advance the clock to it.
    Event next_event() {
        if (topo_->size() == 0) throw PreconditionError("empty topology");
        const Event e = peek();
        pending_.reset();
        clock_ = e.time;
        return e;
    }

    // Apply growth/ignition rules. Burns and births take effect at event time.
    EventOutcome apply_event(const Event& e) {
        if (e.time < clock_) throw OrderingError("stale event: time precedes engine clock");
        topo_->check(e.site);
        clock_ = e.time;
        EventOutcome out;
        if (e.kind == EventKind::growth) {
            ++counts_.growth;
            if (!config_.occupied(e.site)) {
                config_.set(e.site, true);
                clusters_.add(e.site, *topo_);
                ++occupied_;
                ++counts_.effective_growth;
                out.effective = true;
            }
        } else {
            ++counts_.ignition;
            if (config_.occupied(e.site)) {
                out.burned = burn_cluster(e.site);
                ++counts_.effective_ignition;
                out.effective = true;
            }
        }
        if (trajectory_) {
            char buf[64];
            std::snprintf(buf, sizeof buf, "%.17g %u %s\n", e.time, e.site, to_string(e.kind));
            *trajectory_ << buf;
        }
        return out;
    }

    // Vacate every site of x's cluster; returns the number of sites burned.
    std::size_t burn_cluster(SiteId x) {
        topo_->check(x);
        if (!config_.occupied(x)) throw PreconditionError("burn_cluster on a vacant site");
        const auto gone = clusters_.remove_cluster(x);
        for (SiteId y : gone) config_.set(y, false);
        occupied_ -= gone.size();
        counts_.sites_burned += gone.size();
        return gone.size();
    }

    // Move the clock forward without an event (used when another process
    // consumes an event that does not touch this one's sites).
    void advance_clock(double t) {
        if (t < clock_) throw OrderingError("clock cannot move backwards");
        clock_ = t;
    }

    // Sample and apply events until the next one would fall after horizon. The
    // event beyond the horizon is kept pending, so run_until(a); run_until(b)
    // reproduces run_until(b) exactly.
    template <class... Observers>
    void run_until(double horizon, Observers&... observers) {
        if (horizon < clock_) throw InvalidParameter("horizon precedes engine clock");
        for (;;) {
            const Event e = peek();
            if (e.time > horizon) break;
            accumulate(e.time - clock_, observers...);
            pending_.reset();
            [[maybe_unused]] const auto out = apply_event(e);
            (notify(observers, e, out), ...);
        }
        accumulate(horizon - clock_, observers...);
        clock_ = horizon;
    }

    void step() { apply_event(next_event()); }

    Configuration snapshot() const { return config_; }

    // Optional trajectory dump: "time site kind" per applied event.
    void set_trajectory_sink(std::ostream* os) noexcept { trajectory_ = os; }

private:
    Event peek() {
        if (!pending_) pending_ = stream_->next(clock_);
        return *pending_;
    }

    template <class... Observers>
    void accumulate([[maybe_unused]] double dt, Observers&... observers) {
        (accumulate_one(observers, dt), ...);
    }

    template <class O>
    void accumulate_one(O& o, double dt) {
        if constexpr (TimeObserver<O>) o.accumulate(*this, dt);
    }

    template <class O>
    void notify(O& o, const Event& e, const EventOutcome& out) {
        if constexpr (EventObserver<O>) o.on_event(*this, e, out);
    }

    std::shared_ptr<const Topology> topo_;
    EngineParams params_;
    std::optional<EventStream> stream_;
    std::optional<Event> pending_;
    Configuration config_;
    ClusterIndex clusters_;
    double clock_ = 0.0;
    std::size_t occupied_ = 0;
    EventCounts counts_;
    std::ostream* trajectory_ = nullptr;
};

} // namespace ffp
