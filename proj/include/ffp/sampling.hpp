#pragma once

#include <memory>
#include <string>
#include <vector>

#include "ffp/engine.hpp"
#include "ffp/error.hpp"
#include "ffp/lattice.hpp"
#include "ffp/measure.hpp"
#include "ffp/parallel.hpp"

namespace ffp {

enum class InitKind { vacant, bernoulli, stationary };

inline InitKind init_kind_from_string(const std::string& s) {
    if (s == "vacant") return InitKind::vacant;
    if (s == "bernoulli") return InitKind::bernoulli;
    if (s == "stationary") return InitKind::stationary;
    throw InvalidParameter("unknown init kind '" + s + "'");
}

inline const char* to_string(InitKind k) {
    switch (k) {
    case InitKind::vacant: return "vacant";
    case InitKind::bernoulli: return "bernoulli";
    case InitKind::stationary: return "stationary";
    }
    return "unknown";
}

// Initial configurations for replica experiments on one topology.
inline std::vector<Configuration> initial_configurations(const std::shared_ptr<const Topology>& topo,
                                                         double lambda, InitKind kind, double p,
                                                         std::size_t count, double burn_in, double spacing,
                                                         std::uint64_t seed) {
    std::vector<Configuration> out;
    switch (kind) {
    case InitKind::vacant:
        out.assign(count, Configuration(topo->size()));
        break;
    case InitKind::bernoulli: {
        out.reserve(count);
        for (std::size_t i = 0; i < count; ++i) {
            Rng rng(seed, static_cast<std::uint32_t>(i), 2);
            out.push_back(bernoulli_configuration(*topo, p, rng));
        }
        break;
    }
    case InitKind::stationary: {
        Engine chain(topo, {lambda}, Rng(seed, 0, 0));
        if (burn_in < 0.0) burn_in = 10.0 * static_cast<double>(topo->size());
        if (spacing <= 0.0) spacing = relaxation_interval(lambda);
        out = stationary_snapshots(chain, burn_in, spacing, count);
        break;
    }
    }
    return out;
}


// Independent replicas started from `init` configurations and run to time s.
inline std::vector<Configuration> replica_samples(const std::shared_ptr<const Topology>& topo, double lambda,
                                                  std::span<const Configuration> inits, double s,
                                                  std::uint64_t seed, unsigned jobs = 1) {
    if (!(s >= 0.0)) throw InvalidParameter("observation time must be >= 0");
    return parallel_map(inits.size(), jobs, [&](std::size_t i) {
        Engine e(topo, {lambda}, Rng(seed, static_cast<std::uint32_t>(i), 3), inits[i]);
        e.run_until(s);
        return e.snapshot();
    });
}

} // namespace ffp
