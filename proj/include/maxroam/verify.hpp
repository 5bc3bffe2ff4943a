#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "maxroam/partition.hpp"

namespace maxroam {

/// Outcome of replaying one layer's update plan to completion.
struct PlanReplay {
    std::size_t rounds = 0;             // update rounds until every task completed
    std::size_t max_swap_error = 0;     // max_t |swaps_t - (S - |B_t(0)|)|
    std::size_t max_size_drift = 0;     // max over steps and tasks of ||A_t(c)| - |A_t(0)||
    bool visited_monotone = true;       // B_t(c) ⊆ B_t(c+1) at every step
    bool subset_held = true;            // A_t(c) ⊆ B_t(c) at every step
};

/// Runs `advance` with uniform selection until the layer completes,
/// checking the structural properties after every round.
PlanReplay replay_plan(LayerPartition layer, Selector& selector);

/// Per-step averages over many seeded exact-count layers (uniform selection).
struct MaskTrajectory {
    std::size_t size = 0;
    std::size_t tasks = 0;
    double sharing = 0.0;
    std::size_t runs = 0;
    std::size_t horizon = 0;                                  // last step c tracked
    std::vector<std::vector<std::vector<double>>> mask_mean;  // [c][t][i] mean of m_{i,t}(c)
    std::vector<std::vector<double>> visited_fraction;        // [c][t] mean of |B_t(c)| / S

    /// max over (i, t, c) of |mask_mean - p|.
    double max_mask_deviation() const;
    /// max over (t, c) of |visited_fraction - (p + (1 - p) r(c))|.
    double max_visit_deviation() const;
};

/// Simulates `runs` independent layers; run k draws from its own stream of
/// `seed`, so results do not depend on `threads`.
MaskTrajectory simulate_mask_trajectory(std::size_t size, std::size_t tasks, double sharing, std::size_t runs,
                                        std::uint64_t seed, std::size_t threads = 0);

/// r(c) for a layer of S channels: min(1, c / ((1 - p) S)), 1 when p == 1.
double ratio_at(std::size_t step, std::size_t size, double sharing);

struct VerifyParams {
    std::size_t size = 20;
    std::size_t tasks = 3;
    std::vector<double> sharing{0.3, 0.5, 0.7};
    std::size_t runs = 10000;
    std::uint64_t seed = 0;
    std::size_t threads = 0;
};

struct Finding {
    std::string property;
    double sharing = 0.0;
    double measured = 0.0;
    double tolerance = 0.0;
    bool passed = false;
    std::string detail;
};

struct VerifyReport {
    VerifyParams params;
    std::vector<Finding> findings;

    bool all_passed() const;
    nlohmann::json to_json() const;
};

inline constexpr std::size_t kMinStatisticalRuns = 1000;
inline constexpr double kMonteCarloTolerance = 0.02;

/// Exact and Monte Carlo checks of the update plan. Never throws on a failed
/// property; failures are findings.
VerifyReport verify(const VerifyParams& params);

}  // namespace maxroam
