#include "maxroam/masked_net.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <string>

#include "maxroam/errors.hpp"

namespace maxroam {

namespace {

std::span<const std::uint8_t> layer_mask(const PartitionSet* partitions, std::size_t d, std::size_t task) {
    if (!partitions) return {};
    return partitions->layer(d).mask(task);
}

double activate(Activation a, double z) {
    return (a == Activation::relu && z < 0.0) ? 0.0 : z;
}

double softplus(double z) {
    return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)));
}

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

void check_batch(const MaskedNetwork& net, const Matrix& x, std::size_t task) {
    if (x.cols != net.input_dim()) {
        throw std::invalid_argument("input has " + std::to_string(x.cols) + " columns, network expects " +
                                    std::to_string(net.input_dim()));
    }
    if (task >= net.tasks()) throw std::out_of_range("task index " + std::to_string(task) + " >= T");
}

}  // namespace

// ---------------------------------------------------------------------------
// Construction

MaskedNetwork::MaskedNetwork(std::size_t input_dim, std::vector<std::size_t> widths, std::size_t tasks, Rng& rng)
    : input_dim_(input_dim) {
    if (input_dim == 0) throw ConfigError("network input dimension must be positive");
    if (widths.empty()) throw ConfigError("network needs at least one maskable layer");
    if (tasks == 0) throw ConfigError("network needs at least one task head");

    std::size_t fan_in = input_dim;
    for (auto w : widths) {
        if (w == 0) throw ConfigError("layer width must be positive");
        MaskedLayer l;
        l.out = w;
        l.in = fan_in;
        l.weight = Matrix(w, fan_in);
        l.bias.assign(w, 0.0);
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
        for (auto& v : l.weight.data) v = (2.0 * uniform01(rng) - 1.0) * bound;
        layers_.push_back(std::move(l));
        fan_in = w;
    }
    const double bound = std::sqrt(3.0 / static_cast<double>(fan_in));
    for (std::size_t t = 0; t < tasks; ++t) {
        TaskHead h;
        h.weight.resize(fan_in);
        for (auto& v : h.weight) v = (2.0 * uniform01(rng) - 1.0) * bound;
        heads_.push_back(std::move(h));
    }
}

std::vector<std::size_t> MaskedNetwork::widths() const {
    std::vector<std::size_t> w;
    for (const auto& l : layers_) w.push_back(l.out);
    return w;
}

Gradients MaskedNetwork::zero_gradients() const {
    Gradients g;
    for (const auto& l : layers_) {
        g.weight.emplace_back(l.out, l.in);
        g.bias.emplace_back(l.out, 0.0);
    }
    for (const auto& h : heads_) g.head_weight.emplace_back(h.weight.size(), 0.0);
    g.head_bias.assign(heads_.size(), 0.0);
    return g;
}

std::size_t MaskedNetwork::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += l.weight.data.size() + l.bias.size();
    for (const auto& h : heads_) n += h.weight.size() + 1;
    return n;
}

void MaskedNetwork::check_compatible(const PartitionSet& partitions) const {
    if (partitions.depth() != depth()) {
        throw ConfigError("partition set has " + std::to_string(partitions.depth()) + " layers, network has " +
                          std::to_string(depth()));
    }
    if (partitions.tasks() != tasks()) {
        throw ConfigError("partition set has " + std::to_string(partitions.tasks()) + " tasks, network has " +
                          std::to_string(tasks()));
    }
    for (std::size_t d = 0; d < depth(); ++d) {
        if (partitions.layer(d).size() != layers_[d].out) {
            throw ConfigError("layer " + std::to_string(d) + ": partition S = " +
                              std::to_string(partitions.layer(d).size()) + " but layer width is " +
                              std::to_string(layers_[d].out));
        }
    }
}

Gradients& Gradients::operator+=(const Gradients& other) {
    auto add = [](std::vector<double>& a, const std::vector<double>& b) {
        for (std::size_t k = 0; k < a.size(); ++k) a[k] += b[k];
    };
    for (std::size_t d = 0; d < weight.size(); ++d) {
        add(weight[d].data, other.weight[d].data);
        add(bias[d], other.bias[d]);
    }
    for (std::size_t t = 0; t < head_weight.size(); ++t) add(head_weight[t], other.head_weight[t]);
    add(head_bias, other.head_bias);
    return *this;
}

bool operator==(const MaskedLayer& a, const MaskedLayer& b) {
    return a.out == b.out && a.in == b.in && a.weight == b.weight && a.bias == b.bias &&
           a.activation == b.activation;
}

bool operator==(const TaskHead& a, const TaskHead& b) {
    return a.weight == b.weight && a.bias == b.bias;
}

bool operator==(const MaskedNetwork& a, const MaskedNetwork& b) {
    return a.input_dim_ == b.input_dim_ && a.layers_ == b.layers_ && a.heads_ == b.heads_;
}

// ---------------------------------------------------------------------------
// Forward / backward

ForwardTrace forward_trace(const MaskedNetwork& net, const Matrix& x, std::size_t task,
                           const PartitionSet* partitions) {
    check_batch(net, x, task);
    if (partitions) net.check_compatible(*partitions);

    ForwardTrace tr;
    const Matrix* h = &x;
    for (std::size_t d = 0; d < net.depth(); ++d) {
        const auto& l = net.layers()[d];
        const auto mask = layer_mask(partitions, d, task);
        Matrix out(x.rows, l.out);
        for (std::size_t b = 0; b < x.rows; ++b) {
            const auto in = h->row(b);
            for (std::size_t i = 0; i < l.out; ++i) {
                if (!mask.empty() && mask[i] == 0) continue;  // stays exactly 0
                const auto w = l.weight.row(i);
                double z = l.bias[i];
                for (std::size_t k = 0; k < l.in; ++k) z += w[k] * in[k];
                out(b, i) = activate(l.activation, z);
            }
        }
        tr.hidden.push_back(std::move(out));
        h = &tr.hidden.back();
    }
    const auto& head = net.heads()[task];
    tr.output.resize(x.rows);
    for (std::size_t b = 0; b < x.rows; ++b) {
        const auto in = h->row(b);
        double o = head.bias;
        for (std::size_t k = 0; k < head.weight.size(); ++k) o += head.weight[k] * in[k];
        tr.output[b] = o;
    }
    return tr;
}

std::vector<double> forward_task(const MaskedNetwork& net, const Matrix& x, std::size_t task,
                                 const PartitionSet* partitions) {
    return forward_trace(net, x, task, partitions).output;
}

namespace {

double batch_loss(std::span<const double> out, std::span<const double> y, LossKind kind) {
    double total = 0.0;
    for (std::size_t b = 0; b < out.size(); ++b) {
        if (kind == LossKind::mse) {
            const double e = out[b] - y[b];
            total += e * e;
        } else {
            total += softplus(out[b]) - y[b] * out[b];
        }
    }
    return total / static_cast<double>(out.size());
}

void check_targets(const Matrix& x, std::span<const double> targets) {
    if (targets.size() != x.rows) {
        throw std::invalid_argument("target count " + std::to_string(targets.size()) + " != batch size " +
                                    std::to_string(x.rows));
    }
    if (x.rows == 0) throw std::invalid_argument("empty batch");
}

}  // namespace

double mean_loss(std::span<const double> predictions, std::span<const double> targets, LossKind kind) {
    if (predictions.size() != targets.size() || predictions.empty()) {
        throw std::invalid_argument("mean_loss: predictions and targets must be non-empty and equally long");
    }
    return batch_loss(predictions, targets, kind);
}

double task_loss(const MaskedNetwork& net, const Matrix& x, std::span<const double> targets, std::size_t task,
                 LossKind kind, const PartitionSet* partitions) {
    check_targets(x, targets);
    return batch_loss(forward_task(net, x, task, partitions), targets, kind);
}

TaskGradient backward_task(const MaskedNetwork& net, const Matrix& x, std::span<const double> targets,
                           std::size_t task, LossKind kind, const PartitionSet* partitions) {
    check_targets(x, targets);
    const auto tr = forward_trace(net, x, task, partitions);

    TaskGradient res;
    res.loss = batch_loss(tr.output, targets, kind);
    if (!std::isfinite(res.loss)) {
        std::ostringstream msg;
        msg << "non-finite loss " << res.loss << " for task " << task << " (batch of " << x.rows << ")";
        throw std::runtime_error(msg.str());
    }
    res.grads = net.zero_gradients();
    auto& g = res.grads;

    const double n = static_cast<double>(x.rows);
    std::vector<double> dout(x.rows);
    for (std::size_t b = 0; b < x.rows; ++b) {
        dout[b] = kind == LossKind::mse ? 2.0 * (tr.output[b] - targets[b]) / n
                                        : (sigmoid(tr.output[b]) - targets[b]) / n;
    }

    const auto& head = net.heads()[task];
    const Matrix& top = tr.hidden.back();
    Matrix dh(x.rows, top.cols);
    for (std::size_t b = 0; b < x.rows; ++b) {
        for (std::size_t k = 0; k < top.cols; ++k) {
            g.head_weight[task][k] += dout[b] * top(b, k);
            dh(b, k) = dout[b] * head.weight[k];
        }
        g.head_bias[task] += dout[b];
    }

    for (std::size_t d = net.depth(); d-- > 0;) {
        const auto& l = net.layers()[d];
        const auto mask = layer_mask(partitions, d, task);
        const Matrix& out = tr.hidden[d];
        const Matrix& in = d == 0 ? x : tr.hidden[d - 1];
        Matrix dprev(x.rows, l.in);
        for (std::size_t b = 0; b < x.rows; ++b) {
            for (std::size_t i = 0; i < l.out; ++i) {
                if (!mask.empty() && mask[i] == 0) continue;  // gradient row stays exactly 0
                double dz = dh(b, i);
                if (l.activation == Activation::relu && out(b, i) <= 0.0) dz = 0.0;
                if (dz == 0.0) continue;
                auto gw = g.weight[d].row(i);
                const auto w = l.weight.row(i);
                for (std::size_t k = 0; k < l.in; ++k) {
                    gw[k] += dz * in(b, k);
                    dprev(b, k) += dz * w[k];
                }
                g.bias[d][i] += dz;
            }
        }
        dh = std::move(dprev);
    }
    return res;
}

// ---------------------------------------------------------------------------
// Optimizer

Adam::Adam(const MaskedNetwork& net, AdamConfig config)
    : config_(config), m_(net.parameter_count(), 0.0), v_(net.parameter_count(), 0.0) {
    if (!(config.learning_rate >= 0.0)) throw ConfigError("learning rate must be non-negative");
}

void Adam::step(MaskedNetwork& net, const Gradients& grads) {
    if (m_.size() != net.parameter_count()) throw std::invalid_argument("optimizer built for another network");
    ++t_;
    const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
    std::size_t idx = 0;
    auto update = [&](double& w, double gr) {
        auto& m = m_[idx];
        auto& v = v_[idx];
        ++idx;
        m = config_.beta1 * m + (1.0 - config_.beta1) * gr;
        v = config_.beta2 * v + (1.0 - config_.beta2) * gr * gr;
        if (config_.learning_rate == 0.0) return;
        w -= config_.learning_rate * (m / c1) / (std::sqrt(v / c2) + config_.epsilon);
    };
    auto layers = net.layers();
    for (std::size_t d = 0; d < layers.size(); ++d) {
        for (std::size_t k = 0; k < layers[d].weight.data.size(); ++k) update(layers[d].weight.data[k], grads.weight[d].data[k]);
        for (std::size_t k = 0; k < layers[d].bias.size(); ++k) update(layers[d].bias[k], grads.bias[d][k]);
    }
    auto heads = net.heads();
    for (std::size_t t = 0; t < heads.size(); ++t) {
        for (std::size_t k = 0; k < heads[t].weight.size(); ++k) update(heads[t].weight[k], grads.head_weight[t][k]);
        update(heads[t].bias, grads.head_bias[t]);
    }
}

StepResult train_step(MaskedNetwork& net, const Matrix& x, std::span<const TaskTarget> targets,
                      const PartitionSet* partitions, Adam& optimizer) {
    if (targets.size() != net.tasks()) {
        throw std::invalid_argument("train_step: need targets for all " + std::to_string(net.tasks()) + " tasks");
    }
    StepResult res;
    auto total = net.zero_gradients();
    for (std::size_t t = 0; t < targets.size(); ++t) {
        auto tg = backward_task(net, x, targets[t].values, t, targets[t].kind, partitions);
        res.losses.push_back(tg.loss);
        total += tg.grads;
    }
    optimizer.step(net, total);
    return res;
}

// ---------------------------------------------------------------------------
// Serialization

nlohmann::json MaskedNetwork::to_json() const {
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& l : layers_) {
        layers.push_back({{"out", l.out},
                          {"in", l.in},
                          {"activation", l.activation == Activation::relu ? "relu" : "identity"},
                          {"weight", l.weight.data},
                          {"bias", l.bias}});
    }
    nlohmann::json heads = nlohmann::json::array();
    for (const auto& h : heads_) heads.push_back({{"weight", h.weight}, {"bias", h.bias}});
    return {{"input_dim", input_dim_}, {"layers", layers}, {"heads", heads}};
}

MaskedNetwork MaskedNetwork::from_json(const nlohmann::json& j) {
    MaskedNetwork net;
    net.input_dim_ = j.at("input_dim").get<std::size_t>();
    std::size_t fan_in = net.input_dim_;
    for (const auto& jl : j.at("layers")) {
        MaskedLayer l;
        l.out = jl.at("out").get<std::size_t>();
        l.in = jl.at("in").get<std::size_t>();
        if (l.in != fan_in) throw ConfigError("checkpoint: layer fan-in does not chain");
        const auto act = jl.at("activation").get<std::string>();
        if (act != "relu" && act != "identity") throw ConfigError("checkpoint: unknown activation " + act);
        l.activation = act == "relu" ? Activation::relu : Activation::identity;
        l.weight = Matrix(l.out, l.in);
        l.weight.data = jl.at("weight").get<std::vector<double>>();
        l.bias = jl.at("bias").get<std::vector<double>>();
        if (l.weight.data.size() != l.out * l.in || l.bias.size() != l.out) {
            throw ConfigError("checkpoint: layer parameter sizes do not match its shape");
        }
        fan_in = l.out;
        net.layers_.push_back(std::move(l));
    }
    for (const auto& jh : j.at("heads")) {
        TaskHead h;
        h.weight = jh.at("weight").get<std::vector<double>>();
        h.bias = jh.at("bias").get<double>();
        if (h.weight.size() != fan_in) throw ConfigError("checkpoint: head size does not match last layer");
        net.heads_.push_back(std::move(h));
    }
    return net;
}

nlohmann::json checkpoint_json(const MaskedNetwork& net, const PartitionSet* partitions) {
    nlohmann::json j{{"format", "maxroam-checkpoint"}, {"version", 1}, {"network", net.to_json()}};
    j["partitions"] = partitions ? partitions->to_json() : nlohmann::json(nullptr);
    return j;
}

Checkpoint checkpoint_from_json(const nlohmann::json& j) {
    if (j.value("format", "") != "maxroam-checkpoint") throw ConfigError("not a maxroam checkpoint");
    Checkpoint c;
    c.net = MaskedNetwork::from_json(j.at("network"));
    if (!j.at("partitions").is_null()) {
        c.partitions = PartitionSet::from_json(j.at("partitions"));
        c.has_partitions = true;
        c.net.check_compatible(c.partitions);
    }
    return c;
}

}  // namespace maxroam
