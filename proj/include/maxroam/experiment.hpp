#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "maxroam/masked_net.hpp"
#include "maxroam/partition.hpp"
#include "maxroam/selection.hpp"
#include "maxroam/synth.hpp"

namespace maxroam {

/// Training arms.
///  - mr:         roaming partitions (update plan enabled)
///  - fixed:      partitions frozen at initialization
///  - full_share: p = 1, every task uses every channel
///  - disjoint:   p = 0, frozen
///  - stl:        one independent unmasked network per task
enum class BaselineMode { mr, fixed, full_share, disjoint, stl };

BaselineMode parse_baseline_mode(std::string_view name);
std::string_view to_string(BaselineMode mode);

struct ExperimentConfig {
    BaselineMode mode = BaselineMode::mr;
    double sharing = 0.5;  // p
    double delta = 0.2;    // epochs between update steps
    double target_ratio = 1.0;
    SelectionKind selection = SelectionKind::uniform;
    InitMode init = InitMode::bernoulli;
    std::vector<std::size_t> widths{32, 32};
    std::size_t epochs = 20;
    std::size_t batch_size = 32;
    AdamConfig optimizer{};
    std::vector<std::uint64_t> seeds{0};
    bool check_every_update = false;
    TaskFamilySpec data{};

    std::size_t tasks() const noexcept { return data.n_tasks; }
    /// The p actually used by the arm (1 for full_share, 0 for disjoint).
    double effective_sharing() const noexcept;
    bool updates_enabled() const noexcept { return mode == BaselineMode::mr; }
    std::size_t iterations_per_epoch() const noexcept;

    void validate() const;
};

void to_json(nlohmann::json& j, const ExperimentConfig& c);
void from_json(const nlohmann::json& j, ExperimentConfig& c);

ExperimentConfig load_config(const std::filesystem::path& path);

/// One row of logged state, written once per epoch.
struct MetricsRecord {
    std::uint64_t seed = 0;
    std::size_t epoch = 0;
    std::size_t step = 0;  // update steps fired so far
    std::vector<double> train_loss;
    std::vector<double> val_loss;
    std::vector<double> val_fscore;  // NaN for regression tasks
    double mean_overlap = 0.0;
    std::size_t coverage_violations = 0;
    std::vector<double> layer_ratio;  // r(c) per layer
};

inline constexpr std::string_view kMetricsSchema = "# maxroam-metrics v1";

std::string metrics_csv_header(std::size_t tasks, std::size_t depth);
std::string metrics_csv_row(const MetricsRecord& r);

struct SeedResult {
    std::uint64_t seed = 0;
    std::vector<MetricsRecord> records;
    std::vector<double> best;  // per task: max val F-score (binary) or min val MSE
    double score = 0.0;        // mean of `best` over tasks
    std::size_t updates_fired = 0;
    std::size_t zero_norm_events = 0;
    double wall_seconds = 0.0;
};

struct Stat {
    double mean = 0.0;
    double std = 0.0;  // sample standard deviation, 0 for a single value
};

Stat mean_std(const std::vector<double>& values);

struct ExperimentSummary {
    ExperimentConfig config;
    std::vector<SeedResult> runs;

    std::string metric_name() const;  // "fscore" or "mse"
    Stat score() const;
    Stat task_best(std::size_t task) const;
    nlohmann::json to_json() const;
    std::string metrics_csv() const;
};

/// Trains one seed of `config`. Deterministic per (config, seed).
SeedResult run_seed(const ExperimentConfig& config, std::uint64_t seed);

/// Runs every seed of the config. With `out_dir`, writes metrics.csv and
/// summary.json there.
ExperimentSummary run_experiment(const ExperimentConfig& config,
                                 const std::optional<std::filesystem::path>& out_dir = std::nullopt);

// ---------------------------------------------------------------------------
// Sweeps

struct SweepGrid {
    std::vector<BaselineMode> modes;
    std::vector<double> sharing;
    std::vector<double> delta;
    std::vector<double> target_ratio;
    std::vector<SelectionKind> selection;

    bool empty() const noexcept {
        return modes.empty() && sharing.empty() && delta.empty() && target_ratio.empty() && selection.empty();
    }
};

struct SweepSpec {
    ExperimentConfig base;
    SweepGrid grid;
    std::size_t threads = 0;  // 0: hardware concurrency
};

SweepSpec load_sweep(const std::filesystem::path& path);
void from_json(const nlohmann::json& j, SweepSpec& s);

struct SweepRow {
    std::size_t cell = 0;
    ExperimentConfig config;  // cell configuration
    std::uint64_t seed = 0;
    double score = 0.0;
    bool ok = true;
    std::string error;
};

inline constexpr std::string_view kSweepSchema = "# maxroam-sweep v1";

/// Cartesian product of the grid axes in the order mode, p, delta, target_r, selection.
std::vector<ExperimentConfig> sweep_cells(const SweepSpec& spec);

/// One run per cell per seed. Failing cells are recorded and the sweep goes on.
std::vector<SweepRow> sweep(const SweepSpec& spec);

std::string sweep_csv(const std::vector<SweepRow>& rows);

/// Runs fn(0..n-1) on up to `threads` workers (0: hardware concurrency).
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn);

}  // namespace maxroam
