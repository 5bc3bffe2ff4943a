#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "maxroam/matrix.hpp"
#include "maxroam/partition.hpp"
#include "maxroam/rng.hpp"
#include "maxroam/selection.hpp"

namespace maxroam {

enum class Activation { relu, identity };

/// Per-task loss: squared error for regression, logistic loss on a logit
/// for binary classification.
enum class LossKind { mse, logistic };

/// Dense layer whose output channels can be switched off per task.
/// Channel i computes act(((W h + b) ⊙ m)_i); the mask is applied before the
/// activation.
struct MaskedLayer {
    std::size_t out = 0;
    std::size_t in = 0;
    Matrix weight;  // out x in
    std::vector<double> bias;
    Activation activation = Activation::relu;

    WeightView weights() const { return {weight.data, weight.rows, weight.cols}; }
};

/// Task-private linear output unit.
struct TaskHead {
    std::vector<double> weight;
    double bias = 0.0;
};

/// Same shape as a MaskedNetwork's parameters.
struct Gradients {
    std::vector<Matrix> weight;
    std::vector<std::vector<double>> bias;
    std::vector<std::vector<double>> head_weight;
    std::vector<double> head_bias;

    Gradients& operator+=(const Gradients& other);
};

struct TaskGradient {
    double loss = 0.0;
    Gradients grads;
};

/// Hidden activations of one forward pass, one matrix (batch x S_d) per layer.
struct ForwardTrace {
    std::vector<Matrix> hidden;
    std::vector<double> output;
};

class MaskedNetwork {
public:
    MaskedNetwork() = default;

    /// Fan-in scaled uniform init: hidden weights U(±sqrt(6 / fan_in)),
    /// head weights U(±sqrt(3 / fan_in)), zero biases.
    MaskedNetwork(std::size_t input_dim, std::vector<std::size_t> widths, std::size_t tasks, Rng& rng);

    std::size_t input_dim() const noexcept { return input_dim_; }
    std::size_t depth() const noexcept { return layers_.size(); }
    std::size_t tasks() const noexcept { return heads_.size(); }
    std::vector<std::size_t> widths() const;

    std::span<MaskedLayer> layers() noexcept { return layers_; }
    std::span<const MaskedLayer> layers() const noexcept { return layers_; }
    std::span<TaskHead> heads() noexcept { return heads_; }
    std::span<const TaskHead> heads() const noexcept { return heads_; }

    Gradients zero_gradients() const;
    std::size_t parameter_count() const;

    /// Throws ConfigError when the partition set does not match this network
    /// layer by layer (depth, channel counts, task count).
    void check_compatible(const PartitionSet& partitions) const;

    nlohmann::json to_json() const;
    static MaskedNetwork from_json(const nlohmann::json& j);

    friend bool operator==(const MaskedNetwork& a, const MaskedNetwork& b);

private:
    std::size_t input_dim_ = 0;
    std::vector<MaskedLayer> layers_;
    std::vector<TaskHead> heads_;
};

bool operator==(const MaskedLayer& a, const MaskedLayer& b);
bool operator==(const TaskHead& a, const TaskHead& b);

/// Forward pass of task t over a batch (rows of x). `partitions == nullptr`
/// runs the unmasked network.
ForwardTrace forward_trace(const MaskedNetwork& net, const Matrix& x, std::size_t task,
                           const PartitionSet* partitions);

/// Predictions (logits for binary tasks) of task t, one per row of x.
std::vector<double> forward_task(const MaskedNetwork& net, const Matrix& x, std::size_t task,
                                 const PartitionSet* partitions);

/// Mean loss of precomputed predictions.
double mean_loss(std::span<const double> predictions, std::span<const double> targets, LossKind kind);

/// Mean loss of task t over the batch.
double task_loss(const MaskedNetwork& net, const Matrix& x, std::span<const double> targets,
                 std::size_t task, LossKind kind, const PartitionSet* partitions);

/// Loss and gradients of task t. Rows of masked-off channels are exactly zero.
/// Throws std::runtime_error when the loss is not finite.
TaskGradient backward_task(const MaskedNetwork& net, const Matrix& x, std::span<const double> targets,
                           std::size_t task, LossKind kind, const PartitionSet* partitions);

struct AdamConfig {
    double learning_rate = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

class Adam {
public:
    Adam() = default;
    Adam(const MaskedNetwork& net, AdamConfig config);

    const AdamConfig& config() const noexcept { return config_; }
    std::size_t steps() const noexcept { return t_; }

    void step(MaskedNetwork& net, const Gradients& grads);

private:
    AdamConfig config_;
    std::vector<double> m_;
    std::vector<double> v_;
    std::size_t t_ = 0;
};

/// Target column of one task for a batch.
struct TaskTarget {
    std::span<const double> values;
    LossKind kind = LossKind::mse;
};

struct StepResult {
    std::vector<double> losses;  // per task
};

/// One optimizer step on the sum over tasks of the masked task gradients
/// (uniform task weighting). targets[t] feeds head t.
StepResult train_step(MaskedNetwork& net, const Matrix& x, std::span<const TaskTarget> targets,
                      const PartitionSet* partitions, Adam& optimizer);

/// Network weights plus partition snapshot.
nlohmann::json checkpoint_json(const MaskedNetwork& net, const PartitionSet* partitions);

struct Checkpoint {
    MaskedNetwork net;
    PartitionSet partitions;
    bool has_partitions = false;
};

Checkpoint checkpoint_from_json(const nlohmann::json& j);

}  // namespace maxroam
