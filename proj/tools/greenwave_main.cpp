/**
 * @file greenwave_main.cpp
 * @brief Command line front end: solve, trace, pareto, slice and resume.
 */

#include <cstdio>
#include <exception>
#include <filesystem>
#include <string>

#include "CLI11.hpp"

#include "greenwave/bundle_io.hpp"
#include "greenwave/run.hpp"

namespace {

void report_files(const greenwave::RunArtifacts& arts) {
    for (const std::string& f : arts.files)
        std::printf("wrote %s\n", (std::filesystem::path(arts.out_dir) / f).string().c_str());
}

greenwave::RunConfig load_config_with_overrides(const std::string& config_path,
                                                const std::string& out_dir, int threads,
                                                long long seed) {
    greenwave::RunConfig cfg = greenwave::load_run_config(config_path);
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    if (threads > 0) cfg.solve.n_threads = threads;
    if (seed >= 0) cfg.seed = static_cast<std::uint64_t>(seed);
    cfg.validate();
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Optimal eco-driving through one signalized intersection with an "
                 "uncertain green duration"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::string bundle_path;
    int threads = 0;
    long long seed = -1;
    double slice_time = 0.0;

    app.add_option("--config", config_path, "run config JSON file");
    app.add_option("--out", out_dir, "output directory (overrides the config)");
    app.add_option("--threads", threads, "solver threads (overrides the config)");
    app.add_option("--seed", seed, "sampling seed echoed to metadata (overrides the config)");
    app.add_option("--resume", bundle_path, "previously saved solution bundle");
    app.fallthrough();

    CLI::App* cmd_solve = app.add_subcommand("solve", "run the full staged pipeline");
    CLI::App* cmd_trace =
        app.add_subcommand("trace", "trace the config's start states against a saved bundle");
    CLI::App* cmd_pareto = app.add_subcommand("pareto", "calibrate the time-budget front");
    CLI::App* cmd_slice = app.add_subcommand("slice", "export one value slice from a bundle");
    cmd_slice->add_option("--time", slice_time, "slice instant in seconds")->required();
    CLI::App* cmd_resume =
        app.add_subcommand("resume", "rerun the reveal chain of a bundle for a new distribution");

    CLI11_PARSE(app, argc, argv);

    auto need = [&](const std::string& value, const char* flag) -> const std::string& {
        if (value.empty()) {
            std::fprintf(stderr, "error: %s is required for this command\n", flag);
            std::exit(2);
        }
        return value;
    };

    try {
        if (cmd_solve->parsed()) {
            greenwave::RunConfig cfg =
                load_config_with_overrides(need(config_path, "--config"), out_dir, threads, seed);
            report_files(greenwave::run_pipeline(cfg));
        } else if (cmd_trace->parsed()) {
            greenwave::RunConfig cfg =
                load_config_with_overrides(need(config_path, "--config"), out_dir, threads, seed);
            greenwave::SolutionBundle bundle =
                greenwave::load_bundle(need(bundle_path, "--resume"));
            report_files(greenwave::write_trace_artifacts(cfg, bundle));
        } else if (cmd_pareto->parsed()) {
            greenwave::RunConfig cfg =
                load_config_with_overrides(need(config_path, "--config"), out_dir, threads, seed);
            report_files(greenwave::write_pareto_artifact(cfg));
        } else if (cmd_slice->parsed()) {
            greenwave::SolutionBundle bundle =
                greenwave::load_bundle(need(bundle_path, "--resume"));
            std::string dir = out_dir.empty() ? std::string(".") : out_dir;
            std::filesystem::create_directories(dir);
            char name[64];
            std::snprintf(name, sizeof(name), "slice_t%g.csv", slice_time);
            std::string path = (std::filesystem::path(dir) / name).string();
            greenwave::export_value_slice(bundle, slice_time, path);
            std::printf("wrote %s\n", path.c_str());
        } else if (cmd_resume->parsed()) {
            greenwave::RunConfig cfg =
                load_config_with_overrides(need(config_path, "--config"), out_dir, threads, seed);
            report_files(greenwave::resume_stage3(need(bundle_path, "--resume"), cfg));
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
