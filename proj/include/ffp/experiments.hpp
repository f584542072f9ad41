#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "ffp/blur.hpp"
#include "ffp/ccsb.hpp"
#include "ffp/coupling.hpp"
#include "ffp/engine.hpp"
#include "ffp/exact.hpp"
#include "ffp/manifest.hpp"
#include "ffp/measure.hpp"
#include "ffp/parallel.hpp"
#include "ffp/sampling.hpp"
#include "ffp/scan.hpp"

namespace ffp {

inline constexpr const char* kVersion = "0.1.0";

struct RunOptions {
    std::optional<std::uint64_t> seed;
    unsigned jobs = default_jobs();
    std::optional<std::filesystem::path> out;
    std::ostream* log = &std::cerr;
};

struct RunResult {
    std::filesystem::path out_dir;
    std::vector<std::string> files;
    std::vector<std::string> warnings;
};

namespace detail {

inline SiteSet sites_of(const Topology& topo, const json& coords) {
    std::vector<SiteId> v;
    for (const auto& c : coords) v.push_back(topo.site(c.get<Coord>()));
    return SiteSet(std::move(v));
}

class OutputDir {
public:
    explicit OutputDir(std::filesystem::path dir, RunResult& res) : dir_(std::move(dir)), res_(res) {
        std::filesystem::create_directories(dir_);
    }

    std::ofstream open(const std::string& name) {
        std::ofstream os(dir_ / name, std::ios::binary);
        if (!os) throw Error("cannot write " + (dir_ / name).string());
        res_.files.push_back(name);
        return os;
    }

private:
    std::filesystem::path dir_;
    RunResult& res_;
};

inline void warn(RunResult& res, std::ostream* log, const std::string& msg) {
    res.warnings.push_back(msg);
    if (log) *log << "warning: " << msg << '\n';
}

inline void run_simulate(const Manifest& m, std::uint64_t seed, OutputDir& out) {
    const auto& j = m.data;
    auto topo = manifest_topology(m);
    const double lambda = m.lambda();
    Configuration init(topo->size());
    if (j["init"] == "bernoulli") {
        Rng r(seed, 0, 2);
        init = bernoulli_configuration(*topo, j["init_p"].get<double>(), r);
    }
    Engine e(topo, {lambda}, Rng(seed, 0, 0), init);
    std::ofstream traj;
    if (j["trajectory"].get<bool>()) {
        traj = out.open("trajectory.txt");
        e.set_trajectory_sink(&traj);
    }
    const double horizon = j["horizon"].get<double>();
    const double every = j["record_every"].get<double>();
    auto ts = out.open("timeseries.csv");
    ts << "time,occupied,density,growth,ignition,effective_ignition,sites_burned\n";
    auto row = [&] {
        const auto& c = e.counts();
        ts << format_number(e.clock()) << ',' << e.occupied_count() << ','
           << format_number(static_cast<double>(e.occupied_count()) / static_cast<double>(topo->size())) << ','
           << c.growth << ',' << c.ignition << ',' << c.effective_ignition << ',' << c.sites_burned << '\n';
    };
    row();
    for (std::size_t i = 1;; ++i) {
        const double t = std::min(horizon, every * static_cast<double>(i));
        e.run_until(t);
        row();
        if (t >= horizon) break;
    }
    auto fin = out.open("final.csv");
    fin << "site,coords,occupied\n";
    for (SiteId x = 0; x < topo->size(); ++x)
        fin << x << ",\"" << topo->coord_string(x) << "\"," << e.configuration().occupied(x) << '\n';
}

inline void run_stationary(const Manifest& m, std::uint64_t seed, OutputDir& out) {
    const auto& j = m.data;
    auto topo = manifest_topology(m);
    const double horizon = j["horizon"].get<double>();
    const double burn = j["burn_in"].get<double>() >= 0.0 ? j["burn_in"].get<double>() : default_burn_in(*topo, horizon);
    if (!(horizon > burn)) throw InvalidParameter("horizon must exceed burn_in");
    const auto batches = j["batches"].get<std::size_t>();
    Engine e(topo, {m.lambda()}, Rng(seed, 0, 0));
    e.run_until(burn);
    DensityObserver dens(topo->size());
    std::optional<EmpiricalMeasure> meas;
    if (!j["window"].empty()) meas.emplace(sites_of(*topo, j["window"]));
    const double span = horizon - burn;
    for (std::size_t b = 0; b < batches; ++b) {
        dens.start_batch();
        if (meas) meas->start_batch();
        const double end = b + 1 == batches ? horizon : burn + span * static_cast<double>(b + 1) / static_cast<double>(batches);
        if (meas) {
            PatternObserver po(*meas);
            e.run_until(end, dens, po);
        } else {
            e.run_until(end, dens);
        }
    }
    auto os = out.open("density.csv");
    os << "site,coords,density,stderr,ci_low,ci_high\n";
    const auto est = dens.estimates();
    for (SiteId x = 0; x < topo->size(); ++x)
        os << x << ",\"" << topo->coord_string(x) << "\"," << format_number(est[x].value) << ','
           << format_number(est[x].se) << ',' << format_number(est[x].value - kZ95 * est[x].se) << ','
           << format_number(est[x].value + kZ95 * est[x].se) << '\n';
    if (meas) {
        auto ms = out.open("measure.csv");
        write_measure_csv(ms, *meas);
    }
}

inline void run_exact(const Manifest& m, OutputDir& out) {
    const auto& j = m.data;
    auto topo = manifest_topology(m);
    const auto dist = exact_stationary(*topo, m.lambda(), j["state_cap"].get<std::size_t>());
    auto os = out.open("exact.csv");
    write_exact_csv(os, dist);
    auto sum = out.open("exact_summary.csv");
    sum << "sites,residual,used_fallback,origin_density\n"
        << dist.sites << ',' << format_number(dist.residual) << ',' << dist.used_fallback << ','
        << format_number(dist.site_density(topo->origin())) << '\n';
    if (!j["window"].empty()) {
        const SiteSet w = sites_of(*topo, j["window"]);
        auto mg = out.open("marginal.csv");
        mg << "pattern,probability\n";
        for (const auto& [p, v] : dist.marginal(w)) mg << pattern_string(p, w.size()) << ',' << format_number(v) << '\n';
    }
}

inline void run_blur_decay(const Manifest& m, std::uint64_t seed, unsigned jobs, OutputDir& out, RunResult& res,
                           std::ostream* log) {
    const auto& j = m.data;
    BlurDecayParams p;
    p.d = j["d"].get<int>();
    p.lambda = m.lambda();
    p.x = j["x"].get<Coord>();
    p.r_i = j["r_I"].get<int>();
    p.L_list = j["L_list"].get<std::vector<int>>();
    p.t_list = j["t_list"].get<std::vector<double>>();
    if (j.contains("epsilon")) {
        const auto& e = j["epsilon"];
        p.t_list.push_back(e["fraction"].get<double>() *
                           epsilon_for(e["m"].get<double>(), e["degree_bound"].get<double>(), e["safety"].get<double>()));
    }
    p.replicas = j["replicas"].get<std::size_t>();
    p.init = init_kind_from_string(j["init"]);
    p.init_p = j["init_p"].get<double>();
    p.margin = j["margin"].get<int>();
    p.burn_in = j["burn_in"].get<double>();
    p.spacing = j["spacing"].get<double>();
    p.max_sites = j["max_sites"].get<std::size_t>();
    p.seed = seed;
    p.jobs = jobs;
    auto os = out.open("blur_decay.csv");
    os << "L,t,flagged_count,replicas,p_hat,ci_low,ci_high\n";
    if (p.replicas == 0) {
        warn(res, log, "replicas = 0: nothing to run");
        return;
    }
    for (const auto& r : blur_decay_experiment(p))
        os << r.L << ',' << format_number(r.t) << ',' << r.flagged << ',' << r.replicas << ',' << format_number(r.p_hat)
           << ',' << format_number(r.ci.low) << ',' << format_number(r.ci.high) << '\n';
}

inline void run_ccsb(const Manifest& m, std::uint64_t seed, unsigned jobs, OutputDir& out, RunResult& res,
                     std::ostream* log) {
    const auto& j = m.data;
    auto topo = manifest_topology(m);
    const auto& s = j["sampler"];
    const std::size_t n = j["replicas"].get<std::size_t>();
    const std::string mode = s["mode"];
    std::vector<Configuration> samples;
    if (n == 0) {
        warn(res, log, "replicas = 0: nothing to run");
    } else if (mode == "snapshots") {
        samples = initial_configurations(topo, m.lambda(), InitKind::stationary, 0.0, n, s["burn_in"].get<double>(),
                                         s["spacing"].get<double>(), seed);
    } else {
        const auto inits = initial_configurations(topo, m.lambda(), init_kind_from_string(s["init"]),
                                                  s["init_p"].get<double>(), n, -1.0, -1.0, seed);
        samples = replica_samples(topo, m.lambda(), inits, s["s"].get<double>(), seed, jobs);
    }
    std::vector<CcsbReport> reports;
    for (const auto& q : j["queries"]) {
        CcsbQuery cq;
        cq.id = q["id"];
        cq.B = sites_of(*topo, q["B"]);
        cq.D = sites_of(*topo, q["D"]);
        cq.x = topo->site(q["x"].get<Coord>());
        cq.delta = q["delta"].get<double>();
        cq.s = s["s"].get<double>();
        std::vector<std::size_t> ms;
        if (q.contains("m_list")) ms = q["m_list"].get<std::vector<std::size_t>>();
        else ms.push_back(q["m"].get<std::size_t>());
        for (std::size_t mm : ms) {
            cq.m = mm;
            reports.push_back(ccsb_check(*topo, samples, cq, mode));
        }
    }
    auto os = out.open("ccsb.csv");
    write_ccsb_csv(os, reports);
    const auto mlist = j["tail"]["m_list"].get<std::vector<std::size_t>>();
    const auto tail = cluster_size_tail(*topo, samples, topo->site(j["tail"]["x"].get<Coord>()), mlist);
    auto ts = out.open("tail.csv");
    ts << "m,count,samples,p_hat,ci_low,ci_high,max_cluster\n";
    for (const auto& r : tail.rows)
        ts << r.m << ',' << r.count << ',' << r.samples << ',' << format_number(r.p_hat) << ','
           << format_number(r.ci.low) << ',' << format_number(r.ci.high) << ',' << tail.max_cluster << '\n';
}

inline CylinderEvent event_from(const Topology& topo, const json& a) {
    const SiteSet w = sites_of(topo, a["sites"]);
    if (a["full"].get<bool>()) return CylinderEvent::full_space(w);
    // pattern characters follow the listed sites; reorder into canonical order
    const auto pat = a["pattern"].get<std::string>();
    Pattern req = 0;
    std::size_t i = 0;
    for (const auto& c : a["sites"]) {
        const auto pos = *w.position(topo.site(c.get<Coord>()));
        if (pat[i++] == '1') req |= Pattern{1} << pos;
    }
    return CylinderEvent::pattern(w, req);
}

inline void run_couple(const Manifest& m, std::uint64_t seed, unsigned jobs, OutputDir& out, RunResult& res,
                       std::ostream* log) {
    const auto& j = m.data;
    double t = 0.0;
    if (j.contains("t")) {
        t = j["t"].get<double>();
    } else {
        const auto& e = j["epsilon"];
        t = e["fraction"].get<double>() *
            epsilon_for(e["m"].get<double>(), e["degree_bound"].get<double>(), e["safety"].get<double>());
    }
    std::vector<Lemma1Report> reports;
    auto rec = out.open("records.csv");
    rec << "k,L,replica,initial_J_equal,agree_on_I,any_I_blurred,a_outer,a_torus,blur_equal\n";
    json geometry = json::array();
    const std::size_t replicas = j["replicas"].get<std::size_t>();
    if (replicas == 0) warn(res, log, "replicas = 0: nothing to run");
    for (int k : j["k_list"].get<std::vector<int>>()) {
        for (int L : j["L_list"].get<std::vector<int>>()) {
            CoupleParams p;
            p.d = j["d"].get<int>();
            p.lambda = m.lambda();
            p.k = k;
            p.L = L;
            p.r_i = j["r_I"].get<int>();
            p.K = j.contains("K") ? j["K"].get<int>() : static_cast<int>(std::lround(j["K_factor"].get<double>() * k));
            p.t = t;
            p.replicas = replicas;
            p.bank_size = j["bank_size"].get<std::size_t>();
            p.burn_in = j["burn_in"].get<double>();
            p.spacing = j["spacing"].get<double>();
            p.outer_mode = mode_from_string(j["outer_mode"]);
            p.share_bank = j["share_bank"].get<bool>();
            p.seed = seed;
            p.jobs = jobs;
            geometry.push_back({{"d", p.d}, {"K", p.K}, {"k", p.k}, {"r_I", p.r_i}, {"L", p.L}, {"t", p.t},
                                {"outer_mode", to_string(p.outer_mode)}, {"seed", seed}});
            if (replicas == 0) continue;
            CoupledSystem sys(p);
            const auto a = event_from(sys.outer(), j["event"]);
            const auto recs = sys.run_all(a);
            for (std::size_t i = 0; i < recs.size(); ++i) {
                const auto& c = recs[i];
                rec << k << ',' << L << ',' << i << ',' << c.initial_J_equal << ',' << c.agree_on_I << ','
                    << c.any_I_blurred << ',' << c.a_outer << ',' << c.a_torus << ',' << c.blur_equal << '\n';
            }
            reports.push_back(summarize_lemma1(sys, recs));
        }
    }
    auto os = out.open("lemma1.csv");
    write_lemma1_csv(os, reports);
    auto g = out.open("geometry.json");
    g << geometry.dump(2) << '\n';
}

inline void run_mu_scan(const Manifest& m, std::uint64_t seed, unsigned jobs, OutputDir& out) {
    const auto& j = m.data;
    MuScanParams p;
    p.d = j["d"].get<int>();
    p.lambda = m.lambda();
    p.window = j["window"].get<std::vector<Coord>>();
    p.k_list = j["k_list"].get<std::vector<int>>();
    p.horizon = j["horizon"].get<double>();
    p.burn_in = j["burn_in"].get<double>();
    p.batches = j["batches"].get<std::size_t>();
    p.seed = seed;
    p.jobs = jobs;
    const auto r = mu_convergence_scan(p);
    auto os = out.open("mu_scan.csv");
    write_mu_scan_csv(os, r);
    auto mg = out.open("marginals.csv");
    mg << "k,pattern,probability,stderr\n";
    for (const auto& row : r.rows)
        for (const auto& [pat, w] : row.marginal.weights()) {
            const auto e = row.marginal.estimate(pat);
            mg << row.k << ',' << pattern_string(pat, row.marginal.width()) << ',' << format_number(e.value) << ','
               << format_number(e.se) << '\n';
        }
}

} // namespace detail

// Run a validated manifest; writes CSV tables, the echoed manifest and a
// run-info record into the output directory.
inline RunResult run_experiment(const Manifest& m, const RunOptions& opt = {}) {
    const auto started = std::chrono::steady_clock::now();
    RunResult res;
    const std::uint64_t seed = opt.seed ? *opt.seed : m.seed();
    res.out_dir = opt.out ? *opt.out : std::filesystem::path(m.data["out"].get<std::string>());
    detail::OutputDir out(res.out_dir, res);
    const unsigned jobs = std::max(1u, opt.jobs);

    if (m.kind == "simulate") detail::run_simulate(m, seed, out);
    else if (m.kind == "stationary") detail::run_stationary(m, seed, out);
    else if (m.kind == "exact") detail::run_exact(m, out);
    else if (m.kind == "blur-decay") detail::run_blur_decay(m, seed, jobs, out, res, opt.log);
    else if (m.kind == "ccsb") detail::run_ccsb(m, seed, jobs, out, res, opt.log);
    else if (m.kind == "couple") detail::run_couple(m, seed, jobs, out, res, opt.log);
    else if (m.kind == "mu-scan") detail::run_mu_scan(m, seed, jobs, out);
    else throw ValidationError({"unknown experiment kind '" + m.kind + "'"});

    json echoed = m.data;
    echoed["seed"] = seed;
    {
        auto os = out.open("manifest.json");
        os << echoed.dump(2) << '\n';
    }
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    json info = {{"kind", m.kind},
                 {"seed", seed},
                 {"jobs", jobs},
                 {"version", kVersion},
                 {"compiler", __VERSION__},
                 {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                               std::to_string(EIGEN_MINOR_VERSION)},
                 {"wall_seconds", wall},
                 {"warnings", res.warnings}};
    res.files.push_back("run_info.json");
    info["outputs"] = res.files;
    std::ofstream ri(res.out_dir / "run_info.json", std::ios::binary);
    ri << info.dump(2) << '\n';
    return res;
}

namespace detail {

using CsvTable = std::vector<std::map<std::string, std::string>>;

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out(1);
    bool quoted = false;
    for (char c : line) {
        if (c == '"') quoted = !quoted;
        else if (c == ',' && !quoted) out.emplace_back();
        else out.back() += c;
    }
    return out;
}

inline CsvTable read_csv(const std::filesystem::path& p) {
    std::ifstream in(p);
    if (!in) throw Error("missing file " + p.string());
    std::string line;
    std::getline(in, line);
    const auto header = split_csv_line(line);
    CsvTable rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto f = split_csv_line(line);
        std::map<std::string, std::string> row;
        for (std::size_t i = 0; i < header.size() && i < f.size(); ++i) row[header[i]] = f[i];
        rows.push_back(std::move(row));
    }
    return rows;
}

inline void summarize_run(const std::filesystem::path& dir, std::ostream& os) {
    std::ifstream in(dir / "run_info.json");
    const json info = json::parse(in);
    const std::string kind = info.at("kind");
    os << "== " << dir.string() << "  [" << kind << ", seed " << info.at("seed").dump() << "]\n";
    if (kind == "stationary") {
        os << "  site coords      density  95% CI\n";
        for (auto& r : read_csv(dir / "density.csv"))
            os << "  " << r["site"] << ' ' << r["coords"] << "  " << r["density"] << "  [" << r["ci_low"] << ", "
               << r["ci_high"] << "]\n";
    } else if (kind == "couple") {
        for (auto& r : read_csv(dir / "lemma1.csv"))
            os << "  k=" << r["k"] << " K=" << r["K"] << " L=" << r["L"] << " t=" << r["t"] << ": lhs " << r["lhs"]
               << "  blur term " << r["blur_term"] << "  TV term " << r["tv_term"] << " (TV " << r["tv"] << " ["
               << r["tv_low"] << ", " << r["tv_high"] << "])  pooled SE " << r["pooled_se"] << "  -> "
               << r["verdict"] << "  (domination violations " << r["domination_violations"] << ")\n";
    } else if (kind == "blur-decay") {
        for (auto& r : read_csv(dir / "blur_decay.csv"))
            os << "  L=" << r["L"] << " t=" << r["t"] << ": P(blurred) " << r["p_hat"] << "  [" << r["ci_low"] << ", "
               << r["ci_high"] << "]\n";
    } else if (kind == "exact") {
        for (auto& r : read_csv(dir / "exact_summary.csv"))
            os << "  sites " << r["sites"] << "  residual " << r["residual"] << "  origin density "
               << r["origin_density"] << (r["used_fallback"] == "1" ? "  (power iteration)" : "") << '\n';
    } else if (kind == "ccsb") {
        for (auto& r : read_csv(dir / "ccsb.csv"))
            os << "  " << r["query"] << " m=" << r["m"] << " delta=" << r["delta"] << ": joint " << r["joint"]
               << "  cond " << r["cond"] << "  bound " << r["bound"] << "  -> " << r["verdict"] << '\n';
        for (auto& r : read_csv(dir / "tail.csv"))
            os << "  P(|C_x| > " << r["m"] << ") = " << r["p_hat"] << "  [" << r["ci_low"] << ", " << r["ci_high"]
               << "]\n";
    } else if (kind == "mu-scan") {
        for (auto& r : read_csv(dir / "mu_scan.csv"))
            os << "  k=" << r["k"] << ": density " << r["density"] << " +- " << r["density_se"]
               << (r["tv"].empty() ? "" : "  TV to k=" + r["k_next"] + ": " + r["tv"] + " [" + r["tv_low"] + ", " + r["tv_high"] + "]")
               << '\n';
    } else if (kind == "simulate") {
        const auto rows = read_csv(dir / "timeseries.csv");
        if (!rows.empty()) {
            auto last = rows.back();
            os << "  t=" << last["time"] << "  density " << last["density"] << "  events " << last["growth"] << " growth, "
               << last["ignition"] << " ignition, " << last["sites_burned"] << " sites burned\n";
        }
    }
    for (const auto& w : info.value("warnings", json::array())) os << "  warning: " << w.get<std::string>() << '\n';
}

} // namespace detail

// Human-readable digest of one run directory or of every run below `dir`.
inline void summarize(const std::filesystem::path& dir, std::ostream& os) {
    if (!std::filesystem::is_directory(dir)) throw Error("missing directory " + dir.string());
    std::vector<std::filesystem::path> runs;
    if (std::filesystem::exists(dir / "run_info.json")) runs.push_back(dir);
    else
        for (const auto& e : std::filesystem::recursive_directory_iterator(dir))
            if (e.is_regular_file() && e.path().filename() == "run_info.json") runs.push_back(e.path().parent_path());
    std::sort(runs.begin(), runs.end());
    if (runs.empty()) {
        os << "no runs found\n";
        return;
    }
    for (const auto& r : runs) detail::summarize_run(r, os);
}

} // namespace ffp
