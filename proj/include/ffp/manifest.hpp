#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ffp/blur.hpp"
#include "ffp/coupling.hpp"
#include "ffp/error.hpp"
#include "ffp/lattice.hpp"
#include "ffp/measure.hpp"

namespace ffp {

using json = nlohmann::ordered_json;

inline const std::vector<std::string>& experiment_kinds() {
    static const std::vector<std::string> k{"simulate", "stationary", "exact", "blur-decay", "ccsb", "couple", "mu-scan"};
    return k;
}

inline constexpr double kMaxExpectedEvents = 1e9;

// Validated manifest: `data` holds every field with defaults filled in.
struct Manifest {
    std::string kind;
    json data;
    std::filesystem::path base_dir;

    std::uint64_t seed() const { return data.at("seed").get<std::uint64_t>(); }
    double lambda() const { return data.at("lambda").get<double>(); }
};

namespace detail {

// Reads fields out of a json object, filling defaults and recording every
// problem instead of stopping at the first.
class FieldReader {
public:
    FieldReader(json& obj, std::string prefix, std::vector<std::string>& errors)
        : obj_(obj), prefix_(std::move(prefix)), errors_(errors) {}

    bool has(const char* key) const { return obj_.contains(key); }

    std::optional<double> number(const char* key, std::optional<double> def = std::nullopt) {
        if (!fill(key, def ? json(*def) : json())) return std::nullopt;
        const auto& v = obj_[key];
        if (!v.is_number()) return fail(key, "must be a number");
        return v.get<double>();
    }

    std::optional<long long> integer(const char* key, std::optional<long long> def = std::nullopt) {
        if (!fill(key, def ? json(*def) : json())) return std::nullopt;
        const auto& v = obj_[key];
        if (!v.is_number_integer()) return fail(key, "must be an integer");
        return v.get<long long>();
    }

    std::optional<long long> count(const char* key, std::optional<long long> def = std::nullopt) {
        auto v = integer(key, def);
        if (v && *v < 0) return fail(key, "must be >= 0");
        return v;
    }

    std::optional<bool> boolean(const char* key, std::optional<bool> def = std::nullopt) {
        if (!fill(key, def ? json(*def) : json())) return std::nullopt;
        const auto& v = obj_[key];
        if (!v.is_boolean()) return fail(key, "must be true or false");
        return v.get<bool>();
    }

    std::optional<std::string> string(const char* key, std::optional<std::string> def = std::nullopt) {
        if (!fill(key, def ? json(*def) : json())) return std::nullopt;
        const auto& v = obj_[key];
        if (!v.is_string()) return fail(key, "must be a string");
        return v.get<std::string>();
    }

    template <class T>
    std::optional<std::vector<T>> list(const char* key, std::optional<std::vector<T>> def = std::nullopt) {
        if (!fill(key, def ? json(*def) : json())) return std::nullopt;
        const auto& v = obj_[key];
        if (!v.is_array()) return fail(key, "must be a list");
        std::vector<T> out;
        for (const auto& e : v) {
            if constexpr (std::is_integral_v<T>) {
                if (!e.is_number_integer()) return fail(key, "must hold integers");
            } else {
                if (!e.is_number()) return fail(key, "must hold numbers");
            }
            out.push_back(e.get<T>());
        }
        return out;
    }

    // List of coordinate tuples.
    std::optional<std::vector<Coord>> coords(const char* key, std::optional<std::vector<Coord>> def = std::nullopt) {
        if (!fill(key, def ? json(*def) : json())) return std::nullopt;
        const auto& v = obj_[key];
        if (!v.is_array()) return fail(key, "must be a list of coordinate lists");
        std::vector<Coord> out;
        for (const auto& e : v) {
            if (!e.is_array()) return fail(key, "must be a list of coordinate lists");
            Coord c;
            for (const auto& x : e) {
                if (!x.is_number_integer()) return fail(key, "coordinates must be integers");
                c.push_back(x.get<int>());
            }
            out.push_back(std::move(c));
        }
        return out;
    }

    std::optional<Coord> coord(const char* key, std::optional<Coord> def = std::nullopt) {
        if (!fill(key, def ? json(*def) : json())) return std::nullopt;
        const auto& v = obj_[key];
        if (!v.is_array()) return fail(key, "must be a coordinate list");
        Coord c;
        for (const auto& x : v) {
            if (!x.is_number_integer()) return fail(key, "coordinates must be integers");
            c.push_back(x.get<int>());
        }
        return c;
    }

    void error(const std::string& msg) { errors_.push_back(msg); }
    std::string name(const char* key) const { return prefix_ + key; }
    json& object() { return obj_; }

private:
    bool fill(const char* key, json def) {
        if (obj_.contains(key)) return true;
        if (def.is_null()) {
            errors_.push_back("missing field '" + name(key) + "'");
            return false;
        }
        obj_[key] = std::move(def);
        return true;
    }

    std::nullopt_t fail(const char* key, const std::string& why) {
        errors_.push_back("field '" + name(key) + "' " + why);
        return std::nullopt;
    }

    json& obj_;
    std::string prefix_;
    std::vector<std::string>& errors_;
};

inline json& sub_object(json& parent, const char* key, std::vector<std::string>& errors, bool required) {
    if (!parent.contains(key)) {
        if (required) errors.push_back("missing field '" + std::string(key) + "'");
        parent[key] = json::object();
    } else if (!parent[key].is_object()) {
        errors.push_back("field '" + std::string(key) + "' must be an object");
        parent[key] = json::object();
    }
    return parent[key];
}

// Site count of the topology block without building it (0 when unknown).
inline double topology_sites(const json& t) {
    if (!t.contains("mode") || !t["mode"].is_string()) return 0.0;
    if (t["mode"] == "explicit") return t.contains("sites") && t["sites"].is_number() ? t["sites"].get<double>() : 0.0;
    if (!t.contains("d") || !t.contains("k") || !t["d"].is_number() || !t["k"].is_number()) return 0.0;
    return std::pow(2.0 * t["k"].get<double>() + 1.0, t["d"].get<double>());
}

inline void check_topology(json& t, std::vector<std::string>& errors) {
    FieldReader r(t, "topology.", errors);
    auto mode = r.string("mode", "torus");
    if (!mode) return;
    if (*mode == "torus" || *mode == "window") {
        auto d = r.integer("d", 2);
        auto k = r.integer("k");
        if (d && *d < 1) r.error("field 'topology.d' must be >= 1");
        if (k && *k < 0) r.error("field 'topology.k' must be >= 0");
        if (d && k && *d >= 1 && *k >= 0 && std::pow(2.0 * *k + 1.0, static_cast<double>(*d)) > 2e9)
            r.error("topology too large: (2k+1)^d exceeds 2e9 sites");
    } else if (*mode == "explicit") {
        if (r.has("edge_file")) {
            r.string("edge_file");
            if (r.has("sites")) r.count("sites");
        } else {
            auto n = r.count("sites");
            if (n && *n < 1) r.error("field 'topology.sites' must be >= 1");
            if (!r.has("edges")) t["edges"] = json::array();
            bool ok = t["edges"].is_array();
            for (const auto& e : t["edges"])
                ok = ok && e.is_array() && e.size() == 2 && e[0].is_number_integer() && e[1].is_number_integer() &&
                     e[0].get<long long>() >= 0 && e[1].get<long long>() >= 0;
            if (!ok) r.error("field 'topology.edges' must be a list of [i, j] pairs of site indices");
        }
    } else {
        r.error("field 'topology.mode' must be torus, window or explicit");
    }
}

inline void check_event_budget(double sites, double lambda, double horizon, std::vector<std::string>& errors) {
    const double events = sites * (1.0 + lambda) * horizon;
    if (events > kMaxExpectedEvents)
        errors.push_back("expected event count " + format_number(events) + " exceeds the 1e9 bound");
}

// epsilon block {m, degree_bound, fraction, safety} -> time; fills defaults.
inline std::optional<double> epsilon_time(json& obj, int d, std::vector<std::string>& errors) {
    FieldReader r(obj, "epsilon.", errors);
    auto m = r.number("m", 1.0);
    auto dg = r.number("degree_bound", 3.0 * d);
    auto frac = r.number("fraction", 0.5);
    auto safety = r.number("safety", 1.0);
    if (!m || !dg || !frac || !safety) return std::nullopt;
    if (!(*frac >= 0.0)) {
        r.error("field 'epsilon.fraction' must be >= 0");
        return std::nullopt;
    }
    try {
        return *frac * epsilon_for(*m, *dg, *safety);
    } catch (const Error& e) {
        r.error(std::string("epsilon: ") + e.what());
        return std::nullopt;
    }
}

inline void check_event_block(json& a, int d, std::vector<std::string>& errors) {
    FieldReader r(a, "event.", errors);
    auto full = r.boolean("full", false);
    auto sites = r.coords("sites", std::vector<Coord>{Coord(static_cast<std::size_t>(d), 0)});
    auto pat = r.string("pattern", std::string(sites ? sites->size() : 1, '1'));
    if (sites) {
        for (const auto& c : *sites)
            if (c.size() != static_cast<std::size_t>(d)) r.error("field 'event.sites' has a coordinate of the wrong dimension");
        if (pat && !*full) {
            if (pat->size() != sites->size()) r.error("field 'event.pattern' must have one character per event site");
            else if (pat->find_first_not_of("01") != std::string::npos) r.error("field 'event.pattern' must use 0 and 1");
        }
    }
}

} // namespace detail

// Validate a manifest object for `kind`, filling documented defaults. Throws
// ValidationError listing every violation.
inline Manifest validate_manifest(json data, std::optional<std::string> kind = std::nullopt,
                                  std::filesystem::path base_dir = {}) {
    std::vector<std::string> errors;
    if (!data.is_object()) throw ValidationError({"manifest must be a JSON object"});
    Manifest m;
    m.base_dir = std::move(base_dir);
    if (data.contains("kind") && !data["kind"].is_string()) errors.push_back("field 'kind' must be a string");
    if (kind) {
        if (data.contains("kind") && data["kind"].is_string() && data["kind"] != *kind)
            errors.push_back("manifest kind '" + data["kind"].get<std::string>() + "' does not match requested '" + *kind + "'");
        data["kind"] = *kind;
    }
    if (!data.contains("kind")) throw ValidationError({"missing field 'kind'"});
    if (!data["kind"].is_string()) throw ValidationError(errors);
    m.kind = data["kind"].get<std::string>();
    const auto& kinds = experiment_kinds();
    if (std::find(kinds.begin(), kinds.end(), m.kind) == kinds.end())
        throw ValidationError({"unknown experiment kind '" + m.kind + "'"});

    detail::FieldReader r(data, "", errors);
    auto lambda = r.number("lambda");
    if (lambda && !(*lambda > 0.0)) errors.push_back("lambda must be positive");
    const double lam = lambda && *lambda > 0.0 ? *lambda : 1.0;
    r.count("seed", 1);
    r.string("out", "runs/" + m.kind);

    const bool needs_topology = m.kind == "simulate" || m.kind == "stationary" || m.kind == "exact" || m.kind == "ccsb";
    if (needs_topology) detail::check_topology(detail::sub_object(data, "topology", errors, true), errors);
    const double sites = needs_topology ? detail::topology_sites(data["topology"]) : 0.0;

    if (m.kind == "simulate") {
        auto h = r.number("horizon", 100.0);
        if (h && !(*h >= 0.0)) errors.push_back("horizon must be >= 0");
        auto init = r.string("init", "vacant");
        if (init && *init != "vacant" && *init != "bernoulli") errors.push_back("init must be vacant or bernoulli");
        auto p = r.number("init_p", 0.5);
        if (p && !(*p >= 0.0 && *p <= 1.0)) errors.push_back("init_p must lie in [0, 1]");
        auto every = r.number("record_every", 1.0);
        if (every && !(*every > 0.0)) errors.push_back("record_every must be positive");
        r.boolean("trajectory", false);
        if (h) detail::check_event_budget(sites, lam, *h, errors);
    } else if (m.kind == "stationary") {
        auto h = r.number("horizon", 10000.0);
        auto b = r.number("burn_in", -1.0);
        auto nb = r.count("batches", static_cast<long long>(kDefaultBatches));
        if (nb && *nb < 2) errors.push_back("batches must be >= 2");
        if (h && b && *b >= 0.0 && !(*h > *b)) errors.push_back("horizon must exceed burn_in");
        if (h && !(*h > 0.0)) errors.push_back("horizon must be positive");
        auto w = r.coords("window", std::vector<Coord>{});
        if (w && w->size() > kMaxWindowSites) errors.push_back("window exceeds the 20-site cap");
        if (h) detail::check_event_budget(sites, lam, *h, errors);
    } else if (m.kind == "exact") {
        auto cap = r.count("state_cap", static_cast<long long>(kExactStateCap));
        if (cap && *cap > 24) errors.push_back("state_cap above 24 is not supported");
        auto w = r.coords("window", std::vector<Coord>{});
        if (w && w->size() > kMaxWindowSites) errors.push_back("window exceeds the 20-site cap");
    } else if (m.kind == "blur-decay") {
        auto d = r.integer("d", 2);
        const int dd = d && *d >= 1 ? static_cast<int>(*d) : 2;
        if (d && *d < 1) errors.push_back("d must be >= 1");
        auto ri = r.integer("r_I", 0);
        if (ri && *ri < 0) errors.push_back("r_I must be >= 0");
        auto ls = r.list<int>("L_list", std::vector<int>{1, 2, 3, 4});
        if (ls) {
            if (ls->empty()) errors.push_back("L_list must be non-empty");
            for (int l : *ls)
                if (l < 0) errors.push_back("L_list entries must be >= 0");
        }
        auto ts = r.list<double>("t_list", std::vector<double>{});
        if (ts)
            for (double t : *ts)
                if (!(t >= 0.0)) errors.push_back("t_list entries must be >= 0");
        if (data.contains("epsilon")) detail::epsilon_time(detail::sub_object(data, "epsilon", errors, false), dd, errors);
        else if (ts && ts->empty()) data["t_list"] = json::array({0.0});
        r.count("replicas", 1000);
        auto init = r.string("init", "stationary");
        if (init) {
            try {
                init_kind_from_string(*init);
            } catch (const Error& e) {
                errors.push_back(e.what());
            }
        }
        auto p = r.number("init_p", 0.5);
        if (p && !(*p >= 0.0 && *p <= 1.0)) errors.push_back("init_p must lie in [0, 1]");
        auto margin = r.integer("margin", 2);
        if (margin && *margin < 1) errors.push_back("margin must be >= 1");
        r.number("burn_in", -1.0);
        r.number("spacing", -1.0);
        r.count("max_sites", 20000);
        auto x = r.coord("x", Coord(static_cast<std::size_t>(dd), 0));
        if (x && x->size() != static_cast<std::size_t>(dd)) errors.push_back("x has the wrong dimension");
    } else if (m.kind == "ccsb") {
        const int dd = data["topology"].contains("d") && data["topology"]["d"].is_number_integer()
                           ? data["topology"]["d"].get<int>()
                           : 1;
        const Coord origin(static_cast<std::size_t>(std::max(dd, 1)), 0);
        auto& sm = detail::sub_object(data, "sampler", errors, false);
        detail::FieldReader s(sm, "sampler.", errors);
        auto mode = s.string("mode", "snapshots");
        if (mode && *mode != "snapshots" && *mode != "replicas") errors.push_back("sampler.mode must be snapshots or replicas");
        auto init = s.string("init", "vacant");
        if (init) {
            try {
                init_kind_from_string(*init);
            } catch (const Error& e) {
                errors.push_back(e.what());
            }
        }
        s.number("init_p", 0.5);
        auto st = s.number("s", 0.0);
        if (st && !(*st >= 0.0)) errors.push_back("sampler.s must be >= 0");
        s.number("burn_in", -1.0);
        s.number("spacing", -1.0);
        r.count("replicas", 1000);
        if (!data.contains("queries")) data["queries"] = json::array();
        if (!data["queries"].is_array()) {
            errors.push_back("field 'queries' must be a list");
        } else {
            std::size_t i = 0;
            for (auto& q : data["queries"]) {
                const std::string pre = "queries[" + std::to_string(i) + "].";
                if (!q.is_object()) {
                    errors.push_back(pre + " must be an object");
                    continue;
                }
                detail::FieldReader qr(q, pre, errors);
                qr.string("id", "q" + std::to_string(i));
                auto B = qr.coords("B", std::vector<Coord>{});
                auto D = qr.coords("D", std::vector<Coord>{});
                auto x = qr.coord("x", origin);
                if (q.contains("m_list")) qr.list<long long>("m_list");
                else qr.count("m");
                auto delta = qr.number("delta");
                if (delta && !(*delta >= 0.0 && *delta <= 1.0)) errors.push_back(pre + "delta must lie in [0, 1]");
                if (D && x && std::find(D->begin(), D->end(), *x) != D->end())
                    errors.push_back(pre + "x must not lie in D");
                ++i;
            }
        }
        auto& tail = detail::sub_object(data, "tail", errors, false);
        detail::FieldReader tr(tail, "tail.", errors);
        tr.coord("x", origin);
        tr.list<long long>("m_list", std::vector<long long>{0, 1, 2, 4, 8});
        if (sites > 0.0 && mode && *mode == "snapshots") {
            const json& sm2 = data["sampler"]; // data grew since sm was taken
            const double b = sm2.value("burn_in", -1.0) >= 0.0 ? sm2.value("burn_in", -1.0) : 10.0 * sites;
            const double sp = sm2.value("spacing", -1.0) > 0.0 ? sm2.value("spacing", -1.0) : relaxation_interval(lam);
            detail::check_event_budget(sites, lam, b + sp * data.value("replicas", 0.0), errors);
        }
    } else if (m.kind == "couple") {
        auto d = r.integer("d", 2);
        const int dd = d && *d >= 1 ? static_cast<int>(*d) : 2;
        // scalar k / L are shorthand for one-element lists
        for (const char* key : {"k", "L"}) {
            const std::string lk = std::string(key) + "_list";
            if (data.contains(key) && !data.contains(lk)) {
                data[lk] = json::array({data[key]});
                data.erase(key);
            }
        }
        auto ks = r.list<int>("k_list", std::vector<int>{3});
        auto ls = r.list<int>("L_list", std::vector<int>{1});
        auto ri = r.integer("r_I", 0);
        auto kfac = r.number("K_factor", 2.0);
        if (data.contains("K")) r.integer("K");
        auto outer = r.string("outer_mode", "window");
        if (outer && *outer != "window" && *outer != "torus") errors.push_back("outer_mode must be window or torus");
        r.boolean("share_bank", false);
        auto reps = r.count("replicas", 1000);
        if (reps && *reps > 0 && *reps < 500) errors.push_back("replicas must be 0 or at least 500 for the coupling experiment");
        r.count("bank_size", 0);
        r.number("burn_in", -1.0);
        r.number("spacing", -1.0);
        if (data.contains("t")) {
            auto t = r.number("t");
            if (t && !(*t >= 0.0)) errors.push_back("t must be >= 0");
        } else {
            if (!data.contains("epsilon")) data["epsilon"] = json::object();
            detail::epsilon_time(detail::sub_object(data, "epsilon", errors, false), dd, errors);
        }
        detail::check_event_block(detail::sub_object(data, "event", errors, false), dd, errors);
        if (ks && ls && ri && kfac) {
            if (ks->empty()) errors.push_back("k_list must be non-empty");
            if (ls->empty()) errors.push_back("L_list must be non-empty");
            for (int k : *ks) {
                for (int l : *ls) {
                    CoupleParams p;
                    p.d = dd;
                    p.lambda = lam;
                    p.k = k;
                    p.L = l;
                    p.r_i = static_cast<int>(*ri);
                    p.K = data.contains("K") && data["K"].is_number_integer() ? data["K"].get<int>()
                                                                                : static_cast<int>(std::lround(*kfac * k));
                    p.outer_mode = outer && *outer == "torus" ? Mode::torus : Mode::window;
                    p.share_bank = data.value("share_bank", false);
                    for (auto& v : couple_violations(p))
                        if (v != "lambda must be positive" && std::find(errors.begin(), errors.end(), v) == errors.end())
                            errors.push_back(v);
                }
            }
        }
    } else if (m.kind == "mu-scan") {
        auto d = r.integer("d", 2);
        const int dd = d && *d >= 1 ? static_cast<int>(*d) : 2;
        auto w = r.coords("window", std::vector<Coord>{Coord(static_cast<std::size_t>(dd), 0)});
        if (w && w->size() > kMaxWindowSites) errors.push_back("window exceeds the 20-site cap");
        auto ks = r.list<int>("k_list", std::vector<int>{1, 2, 3, 4});
        auto h = r.number("horizon", 20000.0);
        r.number("burn_in", -1.0);
        auto nb = r.count("batches", static_cast<long long>(kDefaultBatches));
        if (nb && *nb < 2) errors.push_back("batches must be >= 2");
        if (ks && w && h) {
            if (ks->empty()) errors.push_back("k_list must be non-empty");
            int reach = 0;
            for (const auto& c : *w) {
                if (c.size() != static_cast<std::size_t>(dd)) errors.push_back("window coordinate of the wrong dimension");
                for (int v : c) reach = std::max(reach, std::abs(v));
            }
            double total = 0.0;
            for (int k : *ks) {
                if (k <= reach) errors.push_back("geometry: k=" + std::to_string(k) + " must exceed the window radius");
                total += std::pow(2.0 * k + 1.0, dd) * (1.0 + lam) * *h;
            }
            if (!ks->empty()) total += std::pow(2.0 * *std::max_element(ks->begin(), ks->end()) + 1.0, dd) * (1.0 + lam) * *h;
            if (total > kMaxExpectedEvents)
                errors.push_back("expected event count " + format_number(total) + " exceeds the 1e9 bound");
        }
    }
    if (!errors.empty()) throw ValidationError(std::move(errors));
    m.data = std::move(data);
    return m;
}

inline Manifest parse_manifest(const std::filesystem::path& path, std::optional<std::string> kind = std::nullopt) {
    std::ifstream in(path);
    if (!in) throw ValidationError({"cannot open manifest '" + path.string() + "'"});
    json data;
    try {
        data = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ValidationError({"manifest '" + path.string() + "' is not valid JSON: " + e.what()});
    }
    return validate_manifest(std::move(data), std::move(kind), path.parent_path());
}

// Build the topology block of a validated manifest.
inline std::shared_ptr<const Topology> manifest_topology(const Manifest& m) {
    const json& t = m.data.at("topology");
    const std::string mode = t.at("mode");
    if (mode == "explicit") {
        std::optional<std::size_t> n;
        if (t.contains("sites")) n = t["sites"].get<std::size_t>();
        if (t.contains("edge_file")) {
            std::filesystem::path p = t["edge_file"].get<std::string>();
            if (p.is_relative()) p = m.base_dir / p;
            return std::make_shared<const Topology>(Topology::from_edge_file(p.string(), n));
        }
        std::vector<std::pair<SiteId, SiteId>> edges;
        for (const auto& e : t.at("edges")) edges.emplace_back(e[0].get<SiteId>(), e[1].get<SiteId>());
        return std::make_shared<const Topology>(Topology::from_edges(n.value_or(1), edges));
    }
    return std::make_shared<const Topology>(Topology::box(t.at("d").get<int>(), t.at("k").get<int>(), mode_from_string(mode)));
}

} // namespace ffp
