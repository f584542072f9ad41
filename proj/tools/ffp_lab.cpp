#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "ffp/ffp.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitValidation = 2;
constexpr int kExitCapacity = 3;

int run(const std::string& kind, const std::string& manifest, const ffp::RunOptions& opt) {
    const auto m = ffp::parse_manifest(manifest, kind);
    const auto res = ffp::run_experiment(m, opt);
    std::cout << "wrote " << res.files.size() << " files to " << res.out_dir.string() << '\n';
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"forest-fire process lab: simulation, stationary laws, blur and coupling experiments"};
    app.require_subcommand(1);

    std::string manifest;
    std::uint64_t seed = 0;
    unsigned jobs = ffp::default_jobs();
    std::string out;
    std::string kind;

    for (const auto& k : ffp::experiment_kinds()) {
        auto* sub = app.add_subcommand(k, "run a " + k + " experiment");
        sub->add_option("--manifest", manifest, "experiment manifest (JSON)")->required();
        sub->add_option("--seed", seed, "override the manifest seed");
        sub->add_option("--jobs", jobs, "worker threads (default FFP_LAB_JOBS or 1)")->check(CLI::PositiveNumber);
        sub->add_option("--out", out, "output directory (overrides the manifest)");
        sub->callback([&kind, k] { kind = k; });
    }
    std::string dir;
    auto* summ = app.add_subcommand("summarize", "print key numbers of finished runs");
    summ->add_option("dir", dir, "output directory")->required();
    summ->callback([&kind] { kind = "summarize"; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitValidation;
    }

    try {
        if (kind == "summarize") {
            ffp::summarize(dir, std::cout);
            return kExitOk;
        }
        ffp::RunOptions opt;
        opt.jobs = jobs;
        if (app.get_subcommand(kind)->count("--seed")) opt.seed = seed;
        if (!out.empty()) opt.out = out;
        return run(kind, manifest, opt);
    } catch (const ffp::ValidationError& e) {
        std::cerr << "invalid manifest:\n";
        for (const auto& v : e.violations()) std::cerr << "  - " << v << '\n';
        return kExitValidation;
    } catch (const ffp::CapacityError& e) {
        std::cerr << "capacity error: " << e.what() << '\n';
        return kExitCapacity;
    } catch (const ffp::InvalidParameter& e) {
        std::cerr << "invalid parameter: " << e.what() << '\n';
        return kExitValidation;
    } catch (const ffp::InvalidSite& e) {
        std::cerr << "invalid site: " << e.what() << '\n';
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitFailure;
    }
}
