#include "maxroam/partition.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "maxroam/errors.hpp"

namespace maxroam {

namespace {

// Guards ceil/floor of products like (1 - 0.7) * 20 = 6.000000000000001.
constexpr double kRoundingSlack = 1e-9;

std::vector<std::size_t> indices_where(std::span<const std::uint8_t> bits, std::uint8_t value) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < bits.size(); ++i) {
        if (bits[i] == value) out.push_back(i);
    }
    return out;
}

}  // namespace

InitMode parse_init_mode(std::string_view name) {
    if (name == "bernoulli") return InitMode::bernoulli;
    if (name == "exact") return InitMode::exact;
    throw ConfigError("unknown init mode '" + std::string(name) + "' (expected bernoulli | exact)");
}

std::string_view to_string(InitMode mode) {
    return mode == InitMode::bernoulli ? "bernoulli" : "exact";
}

// ---------------------------------------------------------------------------
// LayerPartition

LayerPartition LayerPartition::from_masks(std::vector<std::vector<std::uint8_t>> masks) {
    if (masks.empty()) throw ConfigError("partition needs at least one task");
    LayerPartition p;
    p.size_ = masks.front().size();
    if (p.size_ == 0) throw ConfigError("partition needs at least one channel");
    for (auto& m : masks) {
        if (m.size() != p.size_) throw ConfigError("task masks differ in length");
        for (auto& b : m) b = b ? 1 : 0;
    }
    p.visited_ = masks;
    p.mask_ = std::move(masks);
    p.swaps_.assign(p.mask_.size(), 0);
    p.recount();
    p.initial_count_ = p.active_count_;
    return p;
}

void LayerPartition::recount() {
    const auto count = [](const std::vector<std::uint8_t>& v) {
        return static_cast<std::size_t>(std::count(v.begin(), v.end(), std::uint8_t{1}));
    };
    active_count_.resize(mask_.size());
    visited_count_.resize(mask_.size());
    for (std::size_t t = 0; t < mask_.size(); ++t) {
        active_count_[t] = count(mask_[t]);
        visited_count_[t] = count(visited_[t]);
    }
}

std::vector<std::size_t> LayerPartition::active(std::size_t task) const {
    return indices_where(mask_.at(task), 1);
}

std::vector<std::size_t> LayerPartition::unvisited(std::size_t task) const {
    return indices_where(visited_.at(task), 0);
}

bool LayerPartition::complete() const {
    for (std::size_t t = 0; t < tasks(); ++t) {
        if (!complete(t)) return false;
    }
    return true;
}

std::size_t LayerPartition::uncovered_count() const {
    std::size_t n = 0;
    for (std::size_t i = 0; i < size_; ++i) {
        bool used = false;
        for (const auto& m : mask_) used = used || m[i];
        if (!used) ++n;
    }
    return n;
}

UpdateOutcome LayerPartition::apply_update_step(std::size_t task, Selector& selector,
                                                const WeightView* weights) {
    if (task >= tasks()) {
        throw std::out_of_range("apply_update_step: task " + std::to_string(task) + " >= T");
    }
    lockstep_ = false;
    const auto act = active(task);
    const auto cand = unvisited(task);
    const auto pair = selector.select(act, cand, weights);
    if (!pair) return {};

    auto& m = mask_[task];
    auto& b = visited_[task];
    m[pair->minus] = 0;
    m[pair->plus] = 1;
    b[pair->plus] = 1;
    ++visited_count_[task];
    ++swaps_[task];
    return {UpdateOutcome::Kind::swapped, pair->minus, pair->plus};
}

std::size_t LayerPartition::advance(Selector& selector, const WeightView* weights) {
    const bool was_lockstep = lockstep_;
    std::size_t swapped = 0;
    for (std::size_t t = 0; t < tasks(); ++t) {
        if (apply_update_step(t, selector, weights).swapped()) ++swapped;
    }
    lockstep_ = was_lockstep;
    if (swapped > 0) ++steps_;
    return swapped;
}

void LayerPartition::check_invariants() const {
    for (std::size_t t = 0; t < tasks(); ++t) {
        const auto ts = std::to_string(t);
        for (std::size_t i = 0; i < size_; ++i) {
            if (mask_[t][i] && !visited_[t][i]) {
                throw InvariantViolation("active_subset_of_visited",
                                         "channel " + std::to_string(i) + " active but unvisited for task " + ts);
            }
        }
        if (active_count_[t] != initial_count_[t]) {
            throw InvariantViolation("constant_partition_size",
                                     "task " + ts + " has " + std::to_string(active_count_[t]) +
                                         " active channels, started with " + std::to_string(initial_count_[t]));
        }
        if (visited_count_[t] != initial_count_[t] + swaps_[t]) {
            throw InvariantViolation("visited_growth", "task " + ts + " visited count does not equal |B_t(0)| + swaps");
        }
        if (lockstep_ && swaps_[t] != std::min(steps_, size_ - initial_count_[t])) {
            throw InvariantViolation("visited_growth", "task " + ts + " swapped " + std::to_string(swaps_[t]) +
                                                           " times after " + std::to_string(steps_) + " rounds");
        }
    }
}

nlohmann::json LayerPartition::to_json(std::size_t layer_index) const {
    nlohmann::json mask = nlohmann::json::array();
    nlohmann::json visited = nlohmann::json::array();
    for (std::size_t t = 0; t < tasks(); ++t) {
        mask.push_back(active(t));
        visited.push_back(indices_where(visited_[t], 1));
    }
    return {{"layer", layer_index}, {"S", size_},         {"T", tasks()},
            {"mask", mask},         {"visited", visited}, {"steps_done", steps_}};
}

LayerPartition LayerPartition::from_json(const nlohmann::json& j) {
    const auto size = j.at("S").get<std::size_t>();
    const auto tasks = j.at("T").get<std::size_t>();
    if (j.at("mask").size() != tasks || j.at("visited").size() != tasks) {
        throw ConfigError("partition snapshot: mask/visited lists must have T entries");
    }
    auto bits = [size](const nlohmann::json& idx) {
        std::vector<std::uint8_t> v(size, 0);
        for (const auto& i : idx) {
            const auto k = i.get<std::size_t>();
            if (k >= size) throw ConfigError("partition snapshot: index " + std::to_string(k) + " >= S");
            v[k] = 1;
        }
        return v;
    };
    std::vector<std::vector<std::uint8_t>> masks;
    for (const auto& m : j.at("mask")) masks.push_back(bits(m));
    auto p = from_masks(std::move(masks));
    for (std::size_t t = 0; t < tasks; ++t) p.visited_[t] = bits(j.at("visited")[t]);
    p.recount();
    for (std::size_t t = 0; t < tasks; ++t) {
        if (p.visited_count_[t] < p.active_count_[t]) {
            throw ConfigError("partition snapshot: visited set smaller than active set");
        }
        p.swaps_[t] = p.visited_count_[t] - p.active_count_[t];
    }
    p.steps_ = j.at("steps_done").get<std::size_t>();
    p.check_invariants();
    return p;
}

LayerPartition init_partition(std::size_t size, std::size_t tasks, double sharing, Rng& rng, InitMode mode) {
    if (size == 0) throw ConfigError("init_partition: layer has no channels (S = 0)");
    if (tasks == 0) throw ConfigError("init_partition: no tasks (T = 0)");
    if (!(sharing >= 0.0 && sharing <= 1.0)) throw ConfigError("init_partition: sharing ratio outside [0, 1]");
    if (sharing == 0.0 && tasks > size) {
        throw ConfigError("init_partition: disjoint partitioning (p = 0) needs T <= S, got T = " +
                          std::to_string(tasks) + ", S = " + std::to_string(size));
    }

    std::vector<std::vector<std::uint8_t>> masks(tasks, std::vector<std::uint8_t>(size, 0));
    if (mode == InitMode::bernoulli) {
        for (std::size_t i = 0; i < size; ++i) {
            bool covered = false;
            for (std::size_t t = 0; t < tasks; ++t) {
                masks[t][i] = bernoulli(rng, sharing) ? 1 : 0;
                covered = covered || masks[t][i];
            }
            if (!covered) masks[uniform_index(rng, tasks)][i] = 1;
        }
    } else {
        const auto k = static_cast<std::size_t>(std::llround(sharing * static_cast<double>(size)));
        if (k == 0) {
            throw ConfigError("init_partition: exact mode gives round(p * S) = 0 channels per task");
        }
        std::vector<std::size_t> idx(size);
        for (std::size_t t = 0; t < tasks; ++t) {
            std::iota(idx.begin(), idx.end(), std::size_t{0});
            // Partial Fisher-Yates: the first k slots are a uniform k-subset.
            for (std::size_t j = 0; j < k; ++j) {
                std::swap(idx[j], idx[j + uniform_index(rng, size - j)]);
                masks[t][idx[j]] = 1;
            }
        }
    }
    return LayerPartition::from_masks(std::move(masks));
}

// ---------------------------------------------------------------------------
// PartitionSet

PartitionSet::PartitionSet(std::vector<LayerPartition> layers) : layers_(std::move(layers)) {
    for (const auto& l : layers_) {
        if (l.tasks() != layers_.front().tasks()) throw ConfigError("partition layers disagree on T");
    }
}

PartitionSet PartitionSet::init(std::span<const std::size_t> sizes, std::size_t tasks, double sharing, Rng& rng,
                                InitMode mode) {
    std::vector<LayerPartition> layers;
    layers.reserve(sizes.size());
    for (auto s : sizes) layers.push_back(init_partition(s, tasks, sharing, rng, mode));
    return PartitionSet(std::move(layers));
}

std::size_t PartitionSet::max_size() const noexcept {
    std::size_t m = 0;
    for (const auto& l : layers_) m = std::max(m, l.size());
    return m;
}

void PartitionSet::check_invariants() const {
    for (std::size_t d = 0; d < layers_.size(); ++d) {
        try {
            layers_[d].check_invariants();
        } catch (const InvariantViolation& e) {
            throw InvariantViolation(e.invariant(), "layer " + std::to_string(d) + ": " + e.what());
        }
    }
}

nlohmann::json PartitionSet::to_json() const {
    nlohmann::json j = nlohmann::json::array();
    for (std::size_t d = 0; d < layers_.size(); ++d) j.push_back(layers_[d].to_json(d));
    return j;
}

PartitionSet PartitionSet::from_json(const nlohmann::json& j) {
    std::vector<LayerPartition> layers;
    for (const auto& l : j) layers.push_back(LayerPartition::from_json(l));
    return PartitionSet(std::move(layers));
}

// ---------------------------------------------------------------------------
// Statistics

double update_ratio(const LayerPartition& partition, double sharing) {
    if (sharing >= 1.0) return 1.0;
    const double budget = (1.0 - sharing) * static_cast<double>(partition.size());
    return std::min(1.0, static_cast<double>(partition.steps_done()) / budget);
}

double visit_probability(double sharing, double ratio) {
    return sharing + (1.0 - sharing) * ratio;
}

std::size_t plan_steps(std::size_t size, double sharing) {
    if (sharing >= 1.0) return 0;
    const double budget = (1.0 - sharing) * static_cast<double>(size);
    return static_cast<std::size_t>(std::ceil(budget - kRoundingSlack));
}

double plan_duration(const PartitionSet& partitions, double sharing, double delta) {
    if (!(delta > 0.0)) throw std::invalid_argument("plan_duration: delta must be positive");
    std::size_t longest = 0;
    for (const auto& l : partitions.layers()) longest = std::max(longest, plan_steps(l.size(), sharing));
    return delta * static_cast<double>(longest);
}

std::vector<std::vector<std::size_t>> overlap_matrix(const LayerPartition& partition) {
    const auto T = partition.tasks();
    std::vector<std::vector<std::size_t>> out(T, std::vector<std::size_t>(T, 0));
    for (std::size_t s = 0; s < T; ++s) {
        for (std::size_t t = s; t < T; ++t) {
            const auto ms = partition.mask(s);
            const auto mt = partition.mask(t);
            std::size_t n = 0;
            for (std::size_t i = 0; i < partition.size(); ++i) n += (ms[i] & mt[i]);
            out[s][t] = out[t][s] = n;
        }
    }
    return out;
}

double mean_overlap(const PartitionSet& partitions) {
    double total = 0.0;
    std::size_t pairs = 0;
    for (const auto& l : partitions.layers()) {
        const auto ov = overlap_matrix(l);
        for (std::size_t s = 0; s < l.tasks(); ++s) {
            for (std::size_t t = s + 1; t < l.tasks(); ++t) {
                total += static_cast<double>(ov[s][t]) / static_cast<double>(l.size());
                ++pairs;
            }
        }
    }
    return pairs == 0 ? 1.0 : total / static_cast<double>(pairs);
}

// ---------------------------------------------------------------------------
// RoamingSchedule

RoamingSchedule::RoamingSchedule(double delta_epochs, double target_ratio, std::size_t iterations_per_epoch)
    : delta_(delta_epochs), target_(target_ratio), iterations_per_epoch_(iterations_per_epoch) {
    if (!(delta_epochs > 0.0)) throw ConfigError("schedule: delta must be positive");
    if (!(target_ratio >= 0.0 && target_ratio <= 1.0)) throw ConfigError("schedule: target_r outside [0, 1]");
    if (iterations_per_epoch == 0) throw ConfigError("schedule: iterations_per_epoch must be positive");
    const auto raw = std::floor(delta_epochs * static_cast<double>(iterations_per_epoch) + kRoundingSlack);
    interval_ = std::max<std::size_t>(1, static_cast<std::size_t>(raw));
}

bool RoamingSchedule::wants_update(const LayerPartition& layer, double sharing) const {
    if (layer.complete()) return false;
    if (target_ >= 1.0) return true;
    return update_ratio(layer, sharing) < target_ - kRoundingSlack;
}

}  // namespace maxroam
