#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "maxroam/rng.hpp"
#include "maxroam/selection.hpp"

namespace maxroam {

/// How the initial task-assignment bits are drawn.
///  - bernoulli: every bit i.i.d. Bernoulli(p), then each uncovered channel
///    is handed to one uniformly drawn task.
///  - exact: every task receives exactly round(p * S) channels, drawn without
///    replacement. No coverage repair, so |A_t(0)| = round(p * S) holds exactly.
enum class InitMode { bernoulli, exact };

InitMode parse_init_mode(std::string_view name);
std::string_view to_string(InitMode mode);

struct UpdateOutcome {
    enum class Kind { swapped, complete };

    Kind kind = Kind::complete;
    std::size_t i_minus = 0;
    std::size_t i_plus = 0;

    bool swapped() const noexcept { return kind == Kind::swapped; }
};

/// Binary task-assignment matrix of one layer together with the per-task
/// visited sets of the roaming plan.
///
/// mask(t)[i] == 1 means channel i is used by task t (i in A_t).
/// visited(t)[i] == 1 means task t has used channel i at some step (i in B_t).
class LayerPartition {
public:
    LayerPartition() = default;

    /// Builds a partition from explicit masks; visited sets start equal to the
    /// masks. Used by tests and snapshot loading.
    static LayerPartition from_masks(std::vector<std::vector<std::uint8_t>> masks);

    std::size_t size() const noexcept { return size_; }
    std::size_t tasks() const noexcept { return mask_.size(); }

    std::span<const std::uint8_t> mask(std::size_t task) const { return mask_.at(task); }
    std::span<const std::uint8_t> visited(std::size_t task) const { return visited_.at(task); }
    bool test(std::size_t i, std::size_t task) const { return mask_.at(task).at(i) != 0; }

    /// Sorted indices of A_t.
    std::vector<std::size_t> active(std::size_t task) const;
    /// Sorted indices of {0..S-1} \ B_t.
    std::vector<std::size_t> unvisited(std::size_t task) const;

    std::size_t active_count(std::size_t task) const { return active_count_.at(task); }
    std::size_t visited_count(std::size_t task) const { return visited_count_.at(task); }

    /// Update rounds applied to this layer (the layer's c).
    std::size_t steps_done() const noexcept { return steps_; }
    /// Swaps performed for one task.
    std::size_t swaps(std::size_t task) const { return swaps_.at(task); }

    bool complete(std::size_t task) const { return visited_count(task) == size_; }
    bool complete() const;

    /// Channels used by no task at all (coverage violations). Can become
    /// nonzero while roaming; it is reported, never repaired.
    std::size_t uncovered_count() const;

    /// One swap for `task`: clears i- in A_t, sets i+ outside B_t, adds i+ to B_t.
    /// Returns `complete` and changes nothing once B_t covers the layer.
    UpdateOutcome apply_update_step(std::size_t task, Selector& selector, const WeightView* weights);

    /// One update round: a swap attempt for every task in order 0..T-1.
    /// Increments steps_done() if at least one task swapped. Returns the
    /// number of swaps performed.
    std::size_t advance(Selector& selector, const WeightView* weights);

    /// Throws InvariantViolation naming the first broken invariant.
    void check_invariants() const;

    nlohmann::json to_json(std::size_t layer_index) const;
    static LayerPartition from_json(const nlohmann::json& j);

    friend bool operator==(const LayerPartition& a, const LayerPartition& b) {
        return a.size_ == b.size_ && a.mask_ == b.mask_ && a.visited_ == b.visited_ &&
               a.steps_ == b.steps_ && a.swaps_ == b.swaps_;
    }

private:
    friend LayerPartition init_partition(std::size_t, std::size_t, double, Rng&, InitMode);

    void recount();

    std::size_t size_ = 0;
    std::vector<std::vector<std::uint8_t>> mask_;
    std::vector<std::vector<std::uint8_t>> visited_;
    std::vector<std::size_t> active_count_;
    std::vector<std::size_t> visited_count_;
    std::vector<std::size_t> initial_count_;  // |A_t(0)| == |B_t(0)|
    std::vector<std::size_t> swaps_;
    std::size_t steps_ = 0;
    bool lockstep_ = true;  // every swap so far came through advance()
};

/// Draws the initial partition of a layer with S channels for T tasks.
/// Throws ConfigError for S == 0, T == 0, p outside [0, 1], p == 0 with T > S,
/// or exact mode with round(p * S) == 0.
LayerPartition init_partition(std::size_t size, std::size_t tasks, double sharing, Rng& rng,
                              InitMode mode = InitMode::bernoulli);

/// One LayerPartition per maskable layer; all share the same task count.
class PartitionSet {
public:
    PartitionSet() = default;
    explicit PartitionSet(std::vector<LayerPartition> layers);

    static PartitionSet init(std::span<const std::size_t> sizes, std::size_t tasks, double sharing,
                             Rng& rng, InitMode mode = InitMode::bernoulli);

    std::size_t depth() const noexcept { return layers_.size(); }
    std::size_t tasks() const noexcept { return layers_.empty() ? 0 : layers_.front().tasks(); }
    std::size_t max_size() const noexcept;

    LayerPartition& layer(std::size_t d) { return layers_.at(d); }
    const LayerPartition& layer(std::size_t d) const { return layers_.at(d); }
    std::span<const LayerPartition> layers() const noexcept { return layers_; }

    void check_invariants() const;

    nlohmann::json to_json() const;
    static PartitionSet from_json(const nlohmann::json& j);

    friend bool operator==(const PartitionSet&, const PartitionSet&) = default;

private:
    std::vector<LayerPartition> layers_;
};

/// Completion rate of a layer's plan: min(1, c / ((1 - p) S)); 1 when p == 1.
double update_ratio(const LayerPartition& partition, double sharing);

/// Probability that a channel has been visited by a task: p + (1 - p) r.
double visit_probability(double sharing, double ratio);

/// Number of update rounds a layer of S channels needs: ceil((1 - p) S).
std::size_t plan_steps(std::size_t size, double sharing);

/// Epochs until every layer's plan has finished: delta * max_d ceil((1 - p) S_d).
/// Throws std::invalid_argument for delta <= 0.
double plan_duration(const PartitionSet& partitions, double sharing, double delta);

/// T x T matrix with entry (s, t) = |A_s ∩ A_t|.
std::vector<std::vector<std::size_t>> overlap_matrix(const LayerPartition& partition);

/// Mean pairwise overlap |A_s ∩ A_t| / S over task pairs s < t and layers.
/// 1 when there is a single task.
double mean_overlap(const PartitionSet& partitions);

/// Clock of the update plan. Updates fire on iteration boundaries whenever
/// floor(E / delta) increments, with delta converted to whole iterations.
class RoamingSchedule {
public:
    RoamingSchedule(double delta_epochs, double target_ratio, std::size_t iterations_per_epoch);

    double delta() const noexcept { return delta_; }
    double target_ratio() const noexcept { return target_; }
    std::size_t iterations_per_epoch() const noexcept { return iterations_per_epoch_; }

    /// max(1, floor(delta * iterations_per_epoch)).
    std::size_t interval_iterations() const noexcept { return interval_; }

    /// True when an update is due before running iteration `iteration`
    /// (0-based count of iterations already completed).
    bool fires_at(std::size_t iteration) const noexcept {
        return iteration > 0 && iteration % interval_ == 0;
    }

    /// Whether a layer still takes part in updates. Below target_r < 1 the
    /// layer stops once r(c) reaches the target; at target_r >= 1 it runs until
    /// every task has visited every channel.
    bool wants_update(const LayerPartition& layer, double sharing) const;

    std::size_t steps_applied() const noexcept { return steps_applied_; }
    void record_step() noexcept { ++steps_applied_; }

private:
    double delta_;
    double target_;
    std::size_t iterations_per_epoch_;
    std::size_t interval_;
    std::size_t steps_applied_ = 0;
};

}  // namespace maxroam
