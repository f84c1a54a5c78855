// Command-line driver: fit, simulate, evaluate, synth.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "dataens/errors.hpp"
#include "dataens/parallel.hpp"
#include "dataens/pipeline.hpp"

namespace fs = std::filesystem;

int main(int argc, char** argv) {
    CLI::App app{"Space-time spectral model fitting and conditional simulation of station pressure"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    std::string out;
    app.add_option("--config", config_path, "JSON run configuration")->required()->check(CLI::ExistingFile);
    app.add_option("--seed", seed, "overrides the config seed");
    app.add_option("--threads", threads, "worker threads (0 = all cores); results do not depend on it");
    app.add_option("--out", out, "output directory (overrides paths.output_dir)");

    auto* fit = app.add_subcommand("fit", "preprocess the fit stations and estimate the spectral model");
    auto* simulate = app.add_subcommand("simulate", "draw the conditional ensemble at the target sites");
    std::string report;
    simulate->add_option("--report", report, "fit report (default: <out>/fit_report.json)");
    auto* evaluate = app.add_subcommand("evaluate", "score an ensemble against held-out observations");
    std::string ensemble;
    evaluate->add_option("--ensemble", ensemble, "ensemble directory (default: <out>/ensemble)");
    auto* synth = app.add_subcommand("synth", "generate synthetic stations and observations from a known model");

    CLI11_PARSE(app, argc, argv);

    try {
        dataens::RunConfig config = dataens::load_config(config_path);
        if (seed) config.seed = *seed;
        if (threads) config.threads = *threads;
        if (!out.empty()) config.output_dir = out;
        dataens::set_thread_count(static_cast<unsigned>(config.threads));

        fs::path result;
        if (*fit) {
            result = dataens::cmd_fit(config);
        } else if (*simulate) {
            result = dataens::cmd_simulate(config, report.empty() ? config.output_dir / "fit_report.json" : fs::path(report));
        } else if (*evaluate) {
            result = dataens::cmd_evaluate(config, ensemble.empty() ? config.output_dir / "ensemble" : fs::path(ensemble));
        } else if (*synth) {
            result = dataens::cmd_synth(config);
        }
        std::cout << result.string() << '\n';
        return 0;
    } catch (const dataens::StageError& e) {
        std::cerr << "error: " << e.what() << '\n';
    } catch (const std::exception& e) {
        std::cerr << "error: [config] " << e.what() << '\n';
    }
    return 1;
}
