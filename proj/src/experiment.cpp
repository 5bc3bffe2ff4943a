#include "maxroam/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "maxroam/errors.hpp"

namespace maxroam {

BaselineMode parse_baseline_mode(std::string_view name) {
    if (name == "mr") return BaselineMode::mr;
    if (name == "fixed") return BaselineMode::fixed;
    if (name == "full_share") return BaselineMode::full_share;
    if (name == "disjoint") return BaselineMode::disjoint;
    if (name == "stl") return BaselineMode::stl;
    throw ConfigError("unknown mode '" + std::string(name) + "' (expected mr | fixed | full_share | disjoint | stl)");
}

std::string_view to_string(BaselineMode mode) {
    switch (mode) {
        case BaselineMode::mr: return "mr";
        case BaselineMode::fixed: return "fixed";
        case BaselineMode::full_share: return "full_share";
        case BaselineMode::disjoint: return "disjoint";
        case BaselineMode::stl: return "stl";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// Config

double ExperimentConfig::effective_sharing() const noexcept {
    switch (mode) {
        case BaselineMode::full_share:
        case BaselineMode::stl: return 1.0;
        case BaselineMode::disjoint: return 0.0;
        default: return sharing;
    }
}

std::size_t ExperimentConfig::iterations_per_epoch() const noexcept {
    return batch_size == 0 ? 0 : (data.n_train + batch_size - 1) / batch_size;
}

void ExperimentConfig::validate() const {
    data.validate();
    if (!(sharing >= 0.0 && sharing <= 1.0)) throw ConfigError("config: p must lie in [0, 1]");
    if (!(delta > 0.0)) throw ConfigError("config: delta must be positive");
    if (!(target_ratio >= 0.0 && target_ratio <= 1.0)) throw ConfigError("config: target_r must lie in [0, 1]");
    if (widths.empty()) throw ConfigError("config: widths must list at least one layer");
    if (std::find(widths.begin(), widths.end(), std::size_t{0}) != widths.end()) {
        throw ConfigError("config: layer widths must be positive");
    }
    if (epochs == 0) throw ConfigError("config: epochs must be >= 1");
    if (batch_size == 0) throw ConfigError("config: batch_size must be >= 1");
    if (seeds.empty()) throw ConfigError("config: seeds must not be empty");
    if (data.n_val == 0) throw ConfigError("config: validation split must not be empty");
    if (!(optimizer.learning_rate >= 0.0)) throw ConfigError("config: learning rate must be >= 0");
}

void to_json(nlohmann::json& j, const ExperimentConfig& c) {
    j = {{"mode", to_string(c.mode)},
         {"p", c.sharing},
         {"delta", c.delta},
         {"target_r", c.target_ratio},
         {"selection", to_string(c.selection)},
         {"init", to_string(c.init)},
         {"widths", c.widths},
         {"epochs", c.epochs},
         {"batch_size", c.batch_size},
         {"optimizer",
          {{"learning_rate", c.optimizer.learning_rate},
           {"beta1", c.optimizer.beta1},
           {"beta2", c.optimizer.beta2},
           {"epsilon", c.optimizer.epsilon}}},
         {"seeds", c.seeds},
         {"check_every_update", c.check_every_update},
         {"data", c.data}};
}

void from_json(const nlohmann::json& j, ExperimentConfig& c) {
    const ExperimentConfig d;
    c.mode = parse_baseline_mode(j.value("mode", std::string(to_string(d.mode))));
    c.sharing = j.value("p", d.sharing);
    c.delta = j.value("delta", d.delta);
    c.target_ratio = j.value("target_r", d.target_ratio);
    c.selection = parse_selection_kind(j.value("selection", std::string(to_string(d.selection))));
    c.init = parse_init_mode(j.value("init", std::string(to_string(d.init))));
    c.widths = j.value("widths", d.widths);
    c.epochs = j.value("epochs", d.epochs);
    c.batch_size = j.value("batch_size", d.batch_size);
    c.optimizer = d.optimizer;
    if (j.contains("optimizer")) {
        const auto& o = j.at("optimizer");
        c.optimizer.learning_rate = o.value("learning_rate", d.optimizer.learning_rate);
        c.optimizer.beta1 = o.value("beta1", d.optimizer.beta1);
        c.optimizer.beta2 = o.value("beta2", d.optimizer.beta2);
        c.optimizer.epsilon = o.value("epsilon", d.optimizer.epsilon);
    }
    c.seeds = j.value("seeds", d.seeds);
    c.check_every_update = j.value("check_every_update", d.check_every_update);
    c.data = j.contains("data") ? j.at("data").get<TaskFamilySpec>() : d.data;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    auto cfg = nlohmann::json::parse(in).get<ExperimentConfig>();
    cfg.validate();
    return cfg;
}

// ---------------------------------------------------------------------------
// Metrics CSV

namespace {

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

std::string metrics_csv_header(std::size_t tasks, std::size_t depth) {
    std::string h = "seed,epoch,step";
    for (const char* col : {"train_loss", "val_loss", "val_fscore"}) {
        for (std::size_t t = 0; t < tasks; ++t) h += "," + std::string(col) + "_" + std::to_string(t);
    }
    h += ",mean_overlap,coverage_violations";
    for (std::size_t d = 0; d < depth; ++d) h += ",r_" + std::to_string(d);
    return h;
}

std::string metrics_csv_row(const MetricsRecord& r) {
    std::string s = std::to_string(r.seed) + "," + std::to_string(r.epoch) + "," + std::to_string(r.step);
    for (const auto* col : {&r.train_loss, &r.val_loss, &r.val_fscore}) {
        for (auto v : *col) s += "," + fmt(v);
    }
    s += "," + fmt(r.mean_overlap) + "," + std::to_string(r.coverage_violations);
    for (auto v : r.layer_ratio) s += "," + fmt(v);
    return s;
}

Stat mean_std(const std::vector<double>& values) {
    Stat s;
    if (values.empty()) return s;
    s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
    if (values.size() > 1) {
        double ss = 0.0;
        for (auto v : values) ss += (v - s.mean) * (v - s.mean);
        s.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
    }
    return s;
}

// ---------------------------------------------------------------------------
// Training

namespace {

struct Arm {
    std::vector<MaskedNetwork> nets;  // one, or one per task for stl
    std::vector<Adam> optimizers;
    std::optional<PartitionSet> partitions;
};

Arm build_arm(const ExperimentConfig& cfg, std::uint64_t seed) {
    Arm arm;
    const auto T = cfg.tasks();
    if (cfg.mode == BaselineMode::stl) {
        for (std::size_t t = 0; t < T; ++t) {
            auto rng = make_stream(seed, "init", t);
            arm.nets.emplace_back(cfg.data.input_dim, cfg.widths, 1, rng);
        }
    } else {
        auto rng = make_stream(seed, "init");
        arm.nets.emplace_back(cfg.data.input_dim, cfg.widths, T, rng);
    }
    for (const auto& n : arm.nets) arm.optimizers.emplace_back(n, cfg.optimizer);

    if (cfg.mode == BaselineMode::mr || cfg.mode == BaselineMode::fixed || cfg.mode == BaselineMode::disjoint) {
        auto rng = make_stream(seed, "partition");
        arm.partitions = PartitionSet::init(cfg.widths, T, cfg.effective_sharing(), rng, cfg.init);
        arm.nets.front().check_compatible(*arm.partitions);
    }
    return arm;
}

}  // namespace

SeedResult run_seed(const ExperimentConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    const auto started = std::chrono::steady_clock::now();
    const Dataset data = generate(cfg.data);
    const auto T = cfg.tasks();
    const auto depth = cfg.widths.size();
    const double p = cfg.effective_sharing();
    const bool binary = cfg.data.kind == TaskKind::binary;
    const auto loss_kind = loss_for(cfg.data.kind);

    Arm arm = build_arm(cfg, seed);
    PartitionSet* parts = arm.partitions ? &*arm.partitions : nullptr;
    auto order_rng = make_stream(seed, "order");
    auto selector = Selector::make(cfg.selection, make_stream(seed, "selection"));
    std::optional<RoamingSchedule> schedule;
    if (cfg.updates_enabled()) schedule.emplace(cfg.delta, cfg.target_ratio, cfg.iterations_per_epoch());

    SeedResult res;
    res.seed = seed;
    res.best.assign(T, binary ? -std::numeric_limits<double>::infinity() : std::numeric_limits<double>::infinity());

    std::vector<std::size_t> order(cfg.data.n_train);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::size_t iteration = 0;

    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), order_rng);
        std::vector<double> loss_sum(T, 0.0);
        std::size_t batches = 0;

        for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size, ++iteration) {
            if (schedule && schedule->fires_at(iteration)) {
                bool changed = false;
                for (std::size_t d = 0; d < depth; ++d) {
                    auto& layer = parts->layer(d);
                    if (!schedule->wants_update(layer, p)) continue;
                    const auto weights = arm.nets.front().layers()[d].weights();
                    changed = layer.advance(selector, &weights) > 0 || changed;
                }
                if (changed) {
                    schedule->record_step();
                    if (cfg.check_every_update) parts->check_invariants();
                }
            }

            const auto end = std::min(order.size(), begin + cfg.batch_size);
            const std::span<const std::size_t> rows(order.data() + begin, end - begin);
            const TaskBatch batch = data.train.slice(rows);
            if (cfg.mode == BaselineMode::stl) {
                for (std::size_t t = 0; t < T; ++t) {
                    const TaskTarget target{batch.targets[t], loss_kind};
                    const auto step = train_step(arm.nets[t], batch.inputs, {&target, 1}, nullptr, arm.optimizers[t]);
                    loss_sum[t] += step.losses[0];
                }
            } else {
                const auto targets = batch.target_views();
                const auto step = train_step(arm.nets.front(), batch.inputs, targets, parts, arm.optimizers.front());
                for (std::size_t t = 0; t < T; ++t) loss_sum[t] += step.losses[t];
            }
            ++batches;
        }

        if (parts) parts->check_invariants();

        MetricsRecord rec;
        rec.seed = seed;
        rec.epoch = epoch;
        rec.step = schedule ? schedule->steps_applied() : 0;
        for (std::size_t t = 0; t < T; ++t) {
            rec.train_loss.push_back(loss_sum[t] / static_cast<double>(batches));
            const bool stl = cfg.mode == BaselineMode::stl;
            const auto logits = forward_task(stl ? arm.nets[t] : arm.nets.front(), data.val.inputs, stl ? 0 : t, parts);
            const double vl = mean_loss(logits, data.val.targets[t], loss_kind);
            if (!std::isfinite(vl)) {
                throw std::runtime_error("non-finite validation loss for task " + std::to_string(t) + " at epoch " +
                                         std::to_string(epoch));
            }
            rec.val_loss.push_back(vl);
            const double f = binary ? f_score(logits, data.val.targets[t]) : std::numeric_limits<double>::quiet_NaN();
            rec.val_fscore.push_back(f);
            res.best[t] = binary ? std::max(res.best[t], f) : std::min(res.best[t], vl);
        }
        if (parts) {
            rec.mean_overlap = mean_overlap(*parts);
            for (const auto& l : parts->layers()) {
                rec.coverage_violations += l.uncovered_count();
                rec.layer_ratio.push_back(update_ratio(l, p));
            }
        } else {
            const bool shared = cfg.mode == BaselineMode::full_share;
            rec.mean_overlap = shared ? 1.0 : 0.0;
            rec.layer_ratio.assign(depth, shared ? 1.0 : 0.0);
        }
        res.records.push_back(std::move(rec));
    }

    res.score = std::accumulate(res.best.begin(), res.best.end(), 0.0) / static_cast<double>(T);
    res.updates_fired = schedule ? schedule->steps_applied() : 0;
    res.zero_norm_events = selector.zero_norm_events();
    res.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return res;
}

std::string ExperimentSummary::metric_name() const {
    return config.data.kind == TaskKind::binary ? "fscore" : "mse";
}

Stat ExperimentSummary::score() const {
    std::vector<double> v;
    for (const auto& r : runs) v.push_back(r.score);
    return mean_std(v);
}

Stat ExperimentSummary::task_best(std::size_t task) const {
    std::vector<double> v;
    for (const auto& r : runs) v.push_back(r.best.at(task));
    return mean_std(v);
}

nlohmann::json ExperimentSummary::to_json() const {
    nlohmann::json j;
    j["config"] = config;
    j["metric"] = metric_name();
    j["selection_protocol"] = "best validation value over epochs, per task, then mean/std over seeds";
    const auto s = score();
    std::vector<double> per_seed;
    for (const auto& r : runs) per_seed.push_back(r.score);
    j["score"] = {{"mean", s.mean}, {"std", s.std}, {"per_seed", per_seed}};
    nlohmann::json tasks = nlohmann::json::array();
    for (std::size_t t = 0; t < config.tasks(); ++t) {
        const auto st = task_best(t);
        std::vector<double> v;
        for (const auto& r : runs) v.push_back(r.best[t]);
        tasks.push_back({{"task", t}, {"mean", st.mean}, {"std", st.std}, {"per_seed", v}});
    }
    j["tasks"] = tasks;
    nlohmann::json rs = nlohmann::json::array();
    nlohmann::json wall = nlohmann::json::array();
    for (const auto& r : runs) {
        rs.push_back({{"seed", r.seed},
                      {"score", r.score},
                      {"updates_fired", r.updates_fired},
                      {"zero_norm_events", r.zero_norm_events}});
        wall.push_back(r.wall_seconds);
    }
    j["runs"] = rs;
    j["timing"] = {{"wall_seconds", wall}};
    return j;
}

std::string ExperimentSummary::metrics_csv() const {
    std::string out(kMetricsSchema);
    out += "\n" + metrics_csv_header(config.tasks(), config.widths.size()) + "\n";
    for (const auto& r : runs) {
        for (const auto& rec : r.records) out += metrics_csv_row(rec) + "\n";
    }
    return out;
}

ExperimentSummary run_experiment(const ExperimentConfig& config, const std::optional<std::filesystem::path>& out_dir) {
    config.validate();
    ExperimentSummary summary;
    summary.config = config;
    summary.runs.resize(config.seeds.size());
    for (std::size_t i = 0; i < config.seeds.size(); ++i) summary.runs[i] = run_seed(config, config.seeds[i]);

    if (out_dir) {
        std::filesystem::create_directories(*out_dir);
        std::ofstream(*out_dir / "metrics.csv", std::ios::binary) << summary.metrics_csv();
        std::ofstream(*out_dir / "summary.json") << summary.to_json().dump(2) << '\n';
    }
    return summary;
}

// ---------------------------------------------------------------------------
// Sweeps

void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn) {
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = std::min(threads, n);
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    {
        std::vector<std::jthread> workers;
        for (std::size_t w = 0; w < threads; ++w) {
            workers.emplace_back([&] {
                for (auto i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
                    try {
                        fn(i);
                    } catch (...) {
                        std::lock_guard lock(failure_mutex);
                        if (!failure) failure = std::current_exception();
                    }
                }
            });
        }
    }
    if (failure) std::rethrow_exception(failure);
}

void from_json(const nlohmann::json& j, SweepSpec& s) {
    s.base = j.at("base").get<ExperimentConfig>();
    s.threads = j.value("threads", std::size_t{0});
    const auto& g = j.at("grid");
    for (const auto& m : g.value("mode", std::vector<std::string>{})) s.grid.modes.push_back(parse_baseline_mode(m));
    s.grid.sharing = g.value("p", std::vector<double>{});
    s.grid.delta = g.value("delta", std::vector<double>{});
    s.grid.target_ratio = g.value("target_r", std::vector<double>{});
    for (const auto& k : g.value("selection", std::vector<std::string>{})) {
        s.grid.selection.push_back(parse_selection_kind(k));
    }
}

SweepSpec load_sweep(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open sweep file " + path.string());
    return nlohmann::json::parse(in).get<SweepSpec>();
}

std::vector<ExperimentConfig> sweep_cells(const SweepSpec& spec) {
    if (spec.grid.empty()) throw ConfigError("sweep grid is empty");
    const auto& b = spec.base;
    const auto& g = spec.grid;
    const auto modes = g.modes.empty() ? std::vector{b.mode} : g.modes;
    const auto ps = g.sharing.empty() ? std::vector{b.sharing} : g.sharing;
    const auto deltas = g.delta.empty() ? std::vector{b.delta} : g.delta;
    const auto rs = g.target_ratio.empty() ? std::vector{b.target_ratio} : g.target_ratio;
    const auto sels = g.selection.empty() ? std::vector{b.selection} : g.selection;

    std::vector<ExperimentConfig> cells;
    for (auto m : modes)
        for (auto p : ps)
            for (auto d : deltas)
                for (auto r : rs)
                    for (auto s : sels) {
                        auto c = b;
                        c.mode = m;
                        c.sharing = p;
                        c.delta = d;
                        c.target_ratio = r;
                        c.selection = s;
                        cells.push_back(std::move(c));
                    }
    return cells;
}

std::vector<SweepRow> sweep(const SweepSpec& spec) {
    const auto cells = sweep_cells(spec);
    const auto& seeds = spec.base.seeds;
    if (seeds.empty()) throw ConfigError("sweep: base config lists no seeds");

    std::vector<SweepRow> rows(cells.size() * seeds.size());
    parallel_for(rows.size(), spec.threads, [&](std::size_t k) {
        auto& row = rows[k];
        row.cell = k / seeds.size();
        row.config = cells[row.cell];
        row.seed = seeds[k % seeds.size()];
        try {
            row.score = run_seed(row.config, row.seed).score;
        } catch (const std::exception& e) {
            row.ok = false;
            row.score = std::numeric_limits<double>::quiet_NaN();
            row.error = e.what();
        }
    });
    return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
    std::string out(kSweepSchema);
    out += "\ncell,mode,p,delta,target_r,selection,seed,score,status,error\n";
    for (const auto& r : rows) {
        std::string err = r.error;
        std::replace_if(err.begin(), err.end(), [](char c) { return c == ',' || c == '\n' || c == '\r'; }, ' ');
        out += std::to_string(r.cell) + "," + std::string(to_string(r.config.mode)) + "," + fmt(r.config.sharing) +
               "," + fmt(r.config.delta) + "," + fmt(r.config.target_ratio) + "," +
               std::string(to_string(r.config.selection)) + "," + std::to_string(r.seed) + "," + fmt(r.score) + "," +
               (r.ok ? "ok" : "failed") + "," + err + "\n";
    }
    return out;
}

}  // namespace maxroam
