#include <CLI11.hpp>
#include <cstdio>
#include <iostream>

#include "scurve/pipeline.hpp"

// Batch front-end: scurve <stage> --config run.cfg [--out DIR] [--seed N]
// Stages: equilibrium | maximize | verify-s | endpoints | trace | reconstruct |
//         hausdorff | all

int main(int argc, char** argv) {
    CLI::App app{"max-min weighted Green-energy contours and wavetrain reconstruction"};
    app.require_subcommand(0, 1);

    std::string config_path, stage_opt, out_dir;
    unsigned long long seed = 0;
    bool have_seed = false, verbose = false;
    app.add_option("--config", config_path, "configuration file (key = value lines)");
    app.add_option("--stage", stage_opt, "stage to run (alternative to the subcommand)");
    app.add_option("--out", out_dir, "output directory override");
    app.add_option("--seed", seed, "random seed override")->each([&](const std::string&) {
        have_seed = true;
    });
    app.add_flag("--verbose", verbose, "print per-stage progress");

    std::vector<std::string> stages = {"equilibrium", "maximize", "verify-s", "endpoints",
                                       "trace",       "reconstruct", "hausdorff", "all"};
    for (const auto& s : stages) app.add_subcommand(s, "run the " + s + " stage");

    CLI11_PARSE(app, argc, argv);

    std::string stage = stage_opt;
    for (const auto& s : stages)
        if (app.got_subcommand(s)) stage = s;
    if (stage.empty()) stage = "all";

    try {
        scurve::RunConfig cfg = config_path.empty() ? scurve::RunConfig()
                                                    : scurve::RunConfig::parse_file(config_path);
        if (!out_dir.empty()) cfg.out_dir = out_dir;
        if (have_seed) cfg.seed = seed;
        if (verbose) cfg.verbose = true;
        scurve::RunReport report = scurve::run_pipeline(cfg, stage);
        std::string json = report.to_json();
        scurve::atomic_write(cfg.out_dir + "/report.json", json);
        if (cfg.verbose) std::cout << json;
        for (const auto& s : report.stages) {
            std::printf("%-12s %s residual=%.3e (%.2fs) %s\n", s.name.c_str(),
                        s.ok ? "ok  " : "FAIL", s.residual, s.seconds, s.detail.c_str());
        }
        return report.all_ok() ? 0 : 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
}
