#include "maxroam/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "maxroam/errors.hpp"

namespace maxroam {

TaskKind parse_task_kind(std::string_view name) {
    if (name == "regression") return TaskKind::regression;
    if (name == "binary") return TaskKind::binary;
    throw ConfigError("unknown task kind '" + std::string(name) + "' (expected regression | binary)");
}

std::string_view to_string(TaskKind kind) {
    return kind == TaskKind::regression ? "regression" : "binary";
}

LossKind loss_for(TaskKind kind) {
    return kind == TaskKind::regression ? LossKind::mse : LossKind::logistic;
}

void TaskFamilySpec::validate() const {
    if (n_tasks == 0) throw ConfigError("task family: n_tasks must be >= 1");
    if (input_dim == 0) throw ConfigError("task family: input_dim must be >= 1");
    if (latent_dim == 0) throw ConfigError("task family: latent_dim must be >= 1");
    if (!(relatedness >= -1.0 && relatedness <= 1.0)) throw ConfigError("task family: relatedness outside [-1, 1]");
    if (n_tasks > latent_dim) {
        throw ConfigError("task family: " + std::to_string(n_tasks) + " target directions do not fit in latent_dim " +
                          std::to_string(latent_dim));
    }
    if (n_tasks > 1 && relatedness < -1.0 / static_cast<double>(n_tasks - 1) - 1e-12) {
        throw ConfigError("task family: pairwise cosine " + std::to_string(relatedness) + " is infeasible for " +
                          std::to_string(n_tasks) + " directions (Gram matrix not PSD; need rho >= -1/(T-1))");
    }
    if (!(noise_std >= 0.0)) throw ConfigError("task family: noise_std must be >= 0");
    if (n_train == 0) throw ConfigError("task family: n_train must be >= 1");
}

void to_json(nlohmann::json& j, const TaskFamilySpec& s) {
    j = {{"n_tasks", s.n_tasks},       {"input_dim", s.input_dim}, {"latent_dim", s.latent_dim},
         {"relatedness", s.relatedness}, {"noise_std", s.noise_std}, {"n_train", s.n_train},
         {"n_val", s.n_val},           {"seed", s.seed},           {"kind", to_string(s.kind)}};
}

void from_json(const nlohmann::json& j, TaskFamilySpec& s) {
    TaskFamilySpec d;
    s.n_tasks = j.value("n_tasks", d.n_tasks);
    s.input_dim = j.value("input_dim", d.input_dim);
    s.latent_dim = j.value("latent_dim", d.latent_dim);
    s.relatedness = j.value("relatedness", d.relatedness);
    s.noise_std = j.value("noise_std", d.noise_std);
    s.n_train = j.value("n_train", d.n_train);
    s.n_val = j.value("n_val", d.n_val);
    s.seed = j.value("seed", d.seed);
    s.kind = parse_task_kind(j.value("kind", std::string(to_string(d.kind))));
}

// ---------------------------------------------------------------------------

TaskBatch TaskBatch::slice(std::span<const std::size_t> rows) const {
    TaskBatch out;
    out.kind = kind;
    out.inputs = Matrix(rows.size(), inputs.cols);
    out.targets.assign(targets.size(), std::vector<double>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const auto src = inputs.row(rows[r]);
        std::copy(src.begin(), src.end(), out.inputs.row(r).begin());
        for (std::size_t t = 0; t < targets.size(); ++t) out.targets[t][r] = targets[t][rows[r]];
    }
    return out;
}

TaskBatch TaskBatch::task_only(std::size_t task) const {
    TaskBatch out;
    out.kind = kind;
    out.inputs = inputs;
    out.targets = {targets.at(task)};
    return out;
}

std::vector<TaskTarget> TaskBatch::target_views() const {
    std::vector<TaskTarget> v;
    for (const auto& t : targets) v.push_back({t, loss_for(kind)});
    return v;
}

// ---------------------------------------------------------------------------

Matrix target_directions(std::size_t tasks, std::size_t latent_dim, double rho, Rng& rng) {
    TaskFamilySpec probe;
    probe.n_tasks = tasks;
    probe.latent_dim = latent_dim;
    probe.relatedness = rho;
    probe.validate();

    // Cholesky of G = (1 - rho) I + rho 11^T; zero pivots (rho = 1, or the
    // boundary rho = -1/(T-1)) leave their column empty, which is exact for PSD G.
    Matrix L(tasks, tasks);
    for (std::size_t j = 0; j < tasks; ++j) {
        double d = 1.0;
        for (std::size_t k = 0; k < j; ++k) d -= L(j, k) * L(j, k);
        if (d < -1e-9) throw ConfigError("target_directions: Gram matrix is not positive semidefinite");
        const double ljj = d > 1e-12 ? std::sqrt(d) : 0.0;
        L(j, j) = ljj;
        for (std::size_t i = j + 1; i < tasks; ++i) {
            double s = rho;
            for (std::size_t k = 0; k < j; ++k) s -= L(i, k) * L(j, k);
            L(i, j) = ljj > 0.0 ? s / ljj : 0.0;
        }
    }

    // Seeded orthonormal basis q_0..q_{T-1} of R^latent_dim (Gram-Schmidt).
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<std::vector<double>> basis;
    while (basis.size() < tasks) {
        std::vector<double> q(latent_dim);
        for (auto& v : q) v = gauss(rng);
        for (const auto& b : basis) {
            double p = 0.0;
            for (std::size_t k = 0; k < latent_dim; ++k) p += q[k] * b[k];
            for (std::size_t k = 0; k < latent_dim; ++k) q[k] -= p * b[k];
        }
        double n = 0.0;
        for (auto v : q) n += v * v;
        n = std::sqrt(n);
        if (n < 1e-8) continue;
        for (auto& v : q) v /= n;
        basis.push_back(std::move(q));
    }

    Matrix dirs(tasks, latent_dim);
    for (std::size_t t = 0; t < tasks; ++t) {
        for (std::size_t k = 0; k < tasks; ++k) {
            for (std::size_t c = 0; c < latent_dim; ++c) dirs(t, c) += L(t, k) * basis[k][c];
        }
    }
    return dirs;
}

Dataset generate(const TaskFamilySpec& spec) {
    spec.validate();
    Dataset data;
    data.spec = spec;

    auto basis_rng = make_stream(spec.seed, "synth.directions");
    auto proj_rng = make_stream(spec.seed, "synth.projection");
    auto input_rng = make_stream(spec.seed, "synth.inputs");
    auto noise_rng = make_stream(spec.seed, "synth.noise");

    data.directions = target_directions(spec.n_tasks, spec.latent_dim, spec.relatedness, basis_rng);

    std::normal_distribution<double> gauss(0.0, 1.0);
    Matrix proj(spec.latent_dim, spec.input_dim);
    const double scale = 1.0 / std::sqrt(static_cast<double>(spec.input_dim));
    for (auto& v : proj.data) v = gauss(proj_rng) * scale;

    const std::size_t n = spec.n_train + spec.n_val;
    Matrix x(n, spec.input_dim);
    for (auto& v : x.data) v = gauss(input_rng);

    std::vector<std::vector<double>> y(spec.n_tasks, std::vector<double>(n));
    std::vector<double> latent(spec.latent_dim);
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < spec.latent_dim; ++c) {
            double z = 0.0;
            for (std::size_t k = 0; k < spec.input_dim; ++k) z += proj(c, k) * x(r, k);
            latent[c] = std::tanh(z);
        }
        for (std::size_t t = 0; t < spec.n_tasks; ++t) {
            double v = 0.0;
            for (std::size_t c = 0; c < spec.latent_dim; ++c) v += data.directions(t, c) * latent[c];
            y[t][r] = v;
        }
    }
    // Noise drawn task-major so adding tasks does not reshuffle earlier ones.
    if (spec.noise_std > 0.0) {
        for (auto& col : y) {
            for (auto& v : col) v += spec.noise_std * gauss(noise_rng);
        }
    }
    if (spec.kind == TaskKind::binary) {
        for (auto& col : y) {
            std::vector<double> sorted = col;
            std::sort(sorted.begin(), sorted.end());
            const double median = n % 2 == 1 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
            for (auto& v : col) v = v > median ? 1.0 : 0.0;
        }
    }

    auto split = [&](std::size_t begin, std::size_t count) {
        TaskBatch b;
        b.kind = spec.kind;
        b.inputs = Matrix(count, spec.input_dim);
        std::copy_n(x.data.begin() + static_cast<std::ptrdiff_t>(begin * spec.input_dim), count * spec.input_dim,
                    b.inputs.data.begin());
        for (const auto& col : y) {
            b.targets.emplace_back(col.begin() + static_cast<std::ptrdiff_t>(begin),
                                   col.begin() + static_cast<std::ptrdiff_t>(begin + count));
        }
        return b;
    };
    data.train = split(0, spec.n_train);
    data.val = split(spec.n_train, spec.n_val);
    return data;
}

double f_score(std::span<const double> logits, std::span<const double> labels) {
    if (logits.size() != labels.size()) throw std::invalid_argument("f_score: size mismatch");
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        const bool pred = logits[i] > 0.0;
        const bool pos = labels[i] > 0.5;
        tp += pred && pos;
        fp += pred && !pos;
        fn += !pred && pos;
    }
    const auto denom = 2 * tp + fp + fn;
    return denom == 0 ? 1.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
}

// ---------------------------------------------------------------------------
// CSV export / import

namespace {

std::filesystem::path sidecar_path(const std::filesystem::path& csv_path) {
    auto p = csv_path;
    p.replace_extension(".json");
    return p;
}

}  // namespace

void export_dataset(const Dataset& data, const std::filesystem::path& csv_path) {
    std::ofstream out(csv_path);
    if (!out) throw std::runtime_error("cannot write " + csv_path.string());
    out << "split";
    for (std::size_t k = 0; k < data.spec.input_dim; ++k) out << ",x" << k;
    for (std::size_t t = 0; t < data.spec.n_tasks; ++t) out << ",y" << t;
    out << '\n';
    char buf[32];
    auto write = [&](const char* name, const TaskBatch& b) {
        for (std::size_t r = 0; r < b.size(); ++r) {
            out << name;
            for (auto v : b.inputs.row(r)) {
                std::snprintf(buf, sizeof buf, "%.17g", v);
                out << ',' << buf;
            }
            for (const auto& col : b.targets) {
                std::snprintf(buf, sizeof buf, "%.17g", col[r]);
                out << ',' << buf;
            }
            out << '\n';
        }
    };
    write("train", data.train);
    write("val", data.val);

    nlohmann::json side{{"spec", data.spec}, {"directions", data.directions.data}};
    std::ofstream(sidecar_path(csv_path)) << side.dump(2) << '\n';
}

Dataset import_dataset(const std::filesystem::path& csv_path) {
    std::ifstream side_in(sidecar_path(csv_path));
    if (!side_in) throw std::runtime_error("missing sidecar " + sidecar_path(csv_path).string());
    const auto side = nlohmann::json::parse(side_in);

    Dataset data;
    data.spec = side.at("spec").get<TaskFamilySpec>();
    const auto& s = data.spec;
    data.directions = Matrix(s.n_tasks, s.latent_dim);
    data.directions.data = side.at("directions").get<std::vector<double>>();

    std::ifstream in(csv_path);
    if (!in) throw std::runtime_error("cannot read " + csv_path.string());
    std::string line;
    std::getline(in, line);  // header

    std::vector<std::vector<double>> rows[2];
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::getline(ss, cell, ',');
        const int which = cell == "train" ? 0 : cell == "val" ? 1 : -1;
        if (which < 0) throw ConfigError("dataset csv: unknown split '" + cell + "'");
        std::vector<double> vals;
        while (std::getline(ss, cell, ',')) vals.push_back(std::stod(cell));
        if (vals.size() != s.input_dim + s.n_tasks) throw ConfigError("dataset csv: wrong column count");
        rows[which].push_back(std::move(vals));
    }
    auto build = [&](const std::vector<std::vector<double>>& rs) {
        TaskBatch b;
        b.kind = s.kind;
        b.inputs = Matrix(rs.size(), s.input_dim);
        b.targets.assign(s.n_tasks, std::vector<double>(rs.size()));
        for (std::size_t r = 0; r < rs.size(); ++r) {
            for (std::size_t k = 0; k < s.input_dim; ++k) b.inputs(r, k) = rs[r][k];
            for (std::size_t t = 0; t < s.n_tasks; ++t) b.targets[t][r] = rs[r][s.input_dim + t];
        }
        return b;
    };
    data.train = build(rows[0]);
    data.val = build(rows[1]);
    return data;
}

}  // namespace maxroam
