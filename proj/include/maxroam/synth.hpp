#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "maxroam/masked_net.hpp"
#include "maxroam/matrix.hpp"

namespace maxroam {

enum class TaskKind { regression, binary };

TaskKind parse_task_kind(std::string_view name);
std::string_view to_string(TaskKind kind);

/// Recipe for a synthetic task family: y_t = v_t · tanh(W x) + noise, with the
/// target directions v_t at pairwise cosine `relatedness`.
struct TaskFamilySpec {
    std::size_t n_tasks = 2;
    std::size_t input_dim = 16;
    std::size_t latent_dim = 8;
    double relatedness = 0.0;
    double noise_std = 0.0;
    std::size_t n_train = 256;
    std::size_t n_val = 256;
    std::uint64_t seed = 0;
    TaskKind kind = TaskKind::regression;

    /// Throws ConfigError with the reason when the family cannot be built.
    void validate() const;
};

void to_json(nlohmann::json& j, const TaskFamilySpec& s);
void from_json(const nlohmann::json& j, TaskFamilySpec& s);

/// Shared inputs with one target column per task.
struct TaskBatch {
    Matrix inputs;
    std::vector<std::vector<double>> targets;  // [task][row]
    TaskKind kind = TaskKind::regression;

    std::size_t size() const noexcept { return inputs.rows; }
    std::size_t tasks() const noexcept { return targets.size(); }

    TaskBatch slice(std::span<const std::size_t> rows) const;
    /// Single-task view (copy) used by independent per-task models.
    TaskBatch task_only(std::size_t task) const;
    std::vector<TaskTarget> target_views() const;
};

struct Dataset {
    TaskFamilySpec spec;
    Matrix directions;  // T x latent_dim, unit rows
    TaskBatch train;
    TaskBatch val;
};

/// Unit vectors with pairwise cosine `relatedness`, embedded in R^latent_dim
/// through a seeded orthonormal basis. Factorizes the Gram matrix
/// (1 - rho) I + rho 11^T; rejects rho < -1/(T-1) and T > latent_dim.
Matrix target_directions(std::size_t tasks, std::size_t latent_dim, double relatedness, Rng& rng);

Dataset generate(const TaskFamilySpec& spec);

LossKind loss_for(TaskKind kind);

/// F1 of predictions thresholded at logit 0 against 0/1 labels.
/// 1 when there are neither positive labels nor positive predictions.
double f_score(std::span<const double> logits, std::span<const double> labels);

/// <stem>.csv with columns split,x0..,y0.. and <stem>.json holding the TaskFamilySpec.
void export_dataset(const Dataset& data, const std::filesystem::path& csv_path);
Dataset import_dataset(const std::filesystem::path& csv_path);

}  // namespace maxroam
