// maxroam: run, sweep, verify and plot roaming-partition experiments.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "maxroam/experiment.hpp"
#include "maxroam/plot.hpp"
#include "maxroam/synth.hpp"
#include "maxroam/verify.hpp"

namespace fs = std::filesystem;
using namespace maxroam;

namespace {

int cmd_run(const std::string& config_path, std::optional<std::uint64_t> seed, const fs::path& out_dir) {
    auto cfg = load_config(config_path);
    if (seed) cfg.seeds = {*seed};
    const auto summary = run_experiment(cfg, out_dir);
    const auto s = summary.score();
    std::cout << "mode=" << to_string(cfg.mode) << " p=" << cfg.effective_sharing() << " seeds=" << cfg.seeds.size()
              << " " << summary.metric_name() << "=" << s.mean << " +/- " << s.std << "\n"
              << "wrote " << (out_dir / "metrics.csv").string() << " and " << (out_dir / "summary.json").string()
              << "\n";
    return 0;
}

int cmd_sweep(const std::string& path, std::optional<std::uint64_t> seed, std::optional<std::size_t> threads,
              const fs::path& out_dir) {
    auto spec = load_sweep(path);
    if (seed) spec.base.seeds = {*seed};
    if (threads) spec.threads = *threads;
    const auto rows = sweep(spec);
    fs::create_directories(out_dir);
    std::ofstream(out_dir / "sweep.csv", std::ios::binary) << sweep_csv(rows);
    std::size_t failed = 0;
    for (const auto& r : rows) {
        if (!r.ok) {
            ++failed;
            std::cerr << "cell " << r.cell << " seed " << r.seed << " failed: " << r.error << "\n";
        }
    }
    std::cout << rows.size() << " runs (" << failed << " failed), wrote " << (out_dir / "sweep.csv").string() << "\n";
    return failed == 0 ? 0 : 1;
}

int cmd_verify(const VerifyParams& params, const fs::path& out_dir) {
    const auto report = verify(params);
    fs::create_directories(out_dir);
    std::ofstream(out_dir / "report.json") << report.to_json().dump(2) << '\n';
    for (const auto& f : report.findings) {
        std::cout << (f.passed ? "PASS " : "FAIL ") << f.property << " p=" << f.sharing << " measured=" << f.measured
                  << " tol=" << f.tolerance << (f.detail.empty() ? "" : "  (" + f.detail + ")") << "\n";
    }
    std::cout << (report.all_passed() ? "all properties hold" : "verification FAILED") << "\n";
    return report.all_passed() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Roaming task-partition experiments: training harness, sweeps, verification, plots"};
    app.require_subcommand(1);

    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out_dir = "out";

    auto* run = app.add_subcommand("run", "Train one configuration (every seed) and write metrics.csv + summary.json");
    run->add_option("--config", config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
    run->add_option("--seed", seed, "Override the config's seed list with a single seed");
    run->add_option("--out-dir", out_dir, "Output directory");

    std::optional<std::size_t> threads;
    auto* sw = app.add_subcommand("sweep", "Run a grid of configurations and write sweep.csv");
    sw->add_option("--config", config, "Sweep file (JSON: base + grid)")->required()->check(CLI::ExistingFile);
    sw->add_option("--seed", seed, "Override the base seed list with a single seed");
    sw->add_option("--threads", threads, "Worker threads (default: all cores)");
    sw->add_option("--out-dir", out_dir, "Output directory");

    VerifyParams vp;
    auto* ver = app.add_subcommand("verify", "Check the update-plan properties and write report.json");
    ver->add_option("--S", vp.size, "Channels per layer")->capture_default_str();
    ver->add_option("--T", vp.tasks, "Number of tasks")->capture_default_str();
    ver->add_option("--p", vp.sharing, "Sharing ratios")->delimiter(',')->capture_default_str();
    ver->add_option("--runs", vp.runs, "Monte Carlo runs per p")->capture_default_str();
    ver->add_option("--seed", vp.seed, "Master seed")->capture_default_str();
    ver->add_option("--threads", vp.threads, "Worker threads (0: all cores)");
    ver->add_option("--out-dir", out_dir, "Output directory");

    std::string csv, kind, svg;
    auto* pl = app.add_subcommand("plot", "Render a sweep CSV as an SVG chart");
    pl->add_option("--csv", csv, "sweep.csv produced by `sweep`")->required()->check(CLI::ExistingFile);
    pl->add_option("--kind", kind, "bars_vs_p | heat_delta_r | lines_selection")->required();
    pl->add_option("--out", svg, "Output SVG path (default: <out-dir>/<kind>.svg)");
    pl->add_option("--out-dir", out_dir, "Output directory");

    std::string data_out;
    auto* ex = app.add_subcommand("export-data", "Write a config's synthetic dataset as CSV + JSON sidecar");
    ex->add_option("--config", config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
    ex->add_option("--out", data_out, "CSV path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        if (*run) return cmd_run(config, seed, out_dir);
        if (*sw) return cmd_sweep(config, seed, threads, out_dir);
        if (*ver) return cmd_verify(vp, out_dir);
        if (*pl) {
            const auto k = parse_plot_kind(kind);
            const fs::path target = svg.empty() ? fs::path(out_dir) / (kind + ".svg") : fs::path(svg);
            plot(csv, k, target);
            std::cout << "wrote " << target.string() << "\n";
            return 0;
        }
        if (*ex) {
            export_dataset(generate(load_config(config).data), data_out);
            std::cout << "wrote " << data_out << "\n";
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
