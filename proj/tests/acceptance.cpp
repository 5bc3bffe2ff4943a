// Acceptance suite: one PASS/FAIL line per criterion, exit 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>

#include "maxroam/experiment.hpp"
#include "maxroam/masked_net.hpp"
#include "maxroam/partition.hpp"
#include "maxroam/verify.hpp"

using namespace maxroam;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool passed = false;
    std::string detail;
};

int failures = 0;

void criterion(int id, const std::string& name, double budget_seconds, const std::function<Outcome()>& body) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs < budget_seconds;
    const bool ok = o.passed && in_time;
    if (!ok) ++failures;
    std::printf("%s [%d] %s: %s (%.1fs, budget %.0fs%s)\n", ok ? "PASS" : "FAIL", id, name.c_str(), o.detail.c_str(),
                secs, budget_seconds, in_time ? "" : ", OVER BUDGET");
    std::fflush(stdout);
}

std::string num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

double pooled_se(const Stat& a, std::size_t na, const Stat& b, std::size_t nb) {
    return std::sqrt(a.std * a.std / static_cast<double>(na) + b.std * b.std / static_cast<double>(nb));
}

ExperimentConfig interference() {
    return load_config(fs::path(MAXROAM_CONFIG_DIR) / "interference_mr.json");
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Replays random exact-count layers to completion and checks plan length and
// partition size after every round.
Outcome plan_exactness() {
    Rng pick = make_stream(2024, "acceptance.plan");
    const double grid[] = {0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8};
    std::size_t layers = 0, bad_length = 0, bad_size = 0, over_bound = 0;
    for (int k = 0; k < 100; ++k) {
        const std::size_t T = 1 + uniform_index(pick, 5);
        const double p = grid[uniform_index(pick, 7)];
        const std::size_t depth = 1 + uniform_index(pick, 3);
        std::vector<std::size_t> sizes(depth);
        for (auto& s : sizes) s = 5 + uniform_index(pick, 46);
        Rng rng = make_stream(static_cast<std::uint64_t>(k), "acceptance.init");
        auto set = PartitionSet::init(sizes, T, p, rng, InitMode::exact);
        auto sel = Selector::uniform(make_stream(static_cast<std::uint64_t>(k), "acceptance.sel"));
        for (std::size_t d = 0; d < depth; ++d) {
            auto& lp = set.layer(d);
            const std::size_t S = lp.size();
            std::vector<std::size_t> initial(T);
            for (std::size_t t = 0; t < T; ++t) initial[t] = lp.visited_count(t);
            std::size_t rounds = 0;
            while (!lp.complete()) {
                lp.advance(sel, nullptr);
                ++rounds;
                for (std::size_t t = 0; t < T; ++t) bad_size += lp.active_count(t) != initial[t];
                if (rounds > S) break;
            }
            for (std::size_t t = 0; t < T; ++t) bad_length += lp.swaps(t) != S - initial[t];
            over_bound += rounds > plan_steps(S, p);
            ++layers;
        }
        set.check_invariants();
    }
    return {bad_length == 0 && bad_size == 0 && over_bound == 0,
            std::to_string(layers) + " layers; plan-length mismatches " + std::to_string(bad_length) +
                ", size changes " + std::to_string(bad_size) + ", rounds over ceil((1-p)S) " +
                std::to_string(over_bound)};
}

Outcome monte_carlo(bool visit) {
    double worst = 0.0;
    std::string per_p;
    for (double p : {0.3, 0.5, 0.7}) {
        const auto tr = simulate_mask_trajectory(20, 3, p, 10000, 0);
        const double dev = visit ? tr.max_visit_deviation() : tr.max_mask_deviation();
        worst = std::max(worst, dev);
        per_p += " p=" + num(p) + ":" + num(dev);
    }
    return {worst < 0.02, "max deviation " + num(worst) + " (tol 0.02);" + per_p};
}

Outcome gradient_masking() {
    std::size_t nonzero = 0, checked = 0;
    double worst = 0.0;
    const double h = 1e-5;
    for (std::uint64_t k = 0; k < 50; ++k) {
        Rng rng = make_stream(k, "acceptance.grad");
        const std::size_t in = 2 + uniform_index(rng, 5), T = 1 + uniform_index(rng, 3);
        std::vector<std::size_t> widths(1 + uniform_index(rng, 3));
        for (auto& w : widths) w = 2 + uniform_index(rng, 7);
        MaskedNetwork net(in, widths, T, rng);
        // Nonzero biases keep pre-activations off the ReLU kink.
        for (auto& l : net.layers()) {
            for (auto& b : l.bias) b = uniform01(rng) - 0.5;
        }
        const auto parts = PartitionSet::init(widths, T, 0.2 + 0.6 * uniform01(rng), rng);
        const std::size_t n = 1 + uniform_index(rng, 6);
        Matrix x(n, in);
        std::normal_distribution<double> g;
        for (auto& v : x.data) v = g(rng);
        std::vector<double> y(n);
        for (auto& v : y) v = bernoulli(rng, 0.5);
        const auto kind = k % 2 ? LossKind::logistic : LossKind::mse;
        for (std::size_t t = 0; t < T; ++t) {
            const auto tg = backward_task(net, x, y, t, kind, &parts);
            for (std::size_t d = 0; d < widths.size(); ++d) {
                auto& L = net.layers()[d];
                for (std::size_t i = 0; i < L.out; ++i) {
                    const bool active = parts.layer(d).test(i, t);
                    if (!active) {
                        for (auto v : tg.grads.weight[d].row(i)) nonzero += v != 0.0;
                        nonzero += tg.grads.bias[d][i] != 0.0;
                        continue;
                    }
                    for (std::size_t j = 0; j <= L.in; ++j) {
                        double& w = j < L.in ? L.weight(i, j) : L.bias[i];
                        const double an = j < L.in ? tg.grads.weight[d](i, j) : tg.grads.bias[d][i];
                        const double keep = w;
                        w = keep + h;
                        const double up = task_loss(net, x, y, t, kind, &parts);
                        w = keep - h;
                        const double down = task_loss(net, x, y, t, kind, &parts);
                        w = keep;
                        const double fd = (up - down) / (2 * h);
                        worst = std::max(worst, std::abs(fd - an) / std::max(1e-8, std::abs(fd) + std::abs(an)));
                        ++checked;
                    }
                }
            }
        }
    }
    return {nonzero == 0 && worst < 1e-4, "nonzero masked entries " + std::to_string(nonzero) + ", " +
                                              std::to_string(checked) + " active coordinates, max rel err " +
                                              num(worst) + " (tol 1e-4)"};
}

Outcome degeneracies() {
    auto mr = interference();
    mr.sharing = 1.0;
    auto share = interference();
    share.mode = BaselineMode::full_share;
    const bool full = run_experiment(mr).metrics_csv() == run_experiment(share).metrics_csv();

    auto r0 = interference();
    r0.target_ratio = 0.0;
    auto fixed = interference();
    fixed.mode = BaselineMode::fixed;
    const bool frozen = run_experiment(r0).metrics_csv() == run_experiment(fixed).metrics_csv();
    return {full && frozen, std::string("p=1 vs full_share ") + (full ? "identical" : "DIFFER") +
                                ", target_r=0 vs fixed " + (frozen ? "identical" : "DIFFER")};
}

Outcome roaming_vs_fixed() {
    const auto mr = run_experiment(interference());
    auto fc = interference();
    fc.mode = BaselineMode::fixed;
    const auto fixed = run_experiment(fc);
    const auto a = mr.score(), b = fixed.score();
    const auto n = mr.runs.size();
    const double se = pooled_se(a, n, b, n);
    const double gap = a.mean - b.mean;
    return {gap >= 0 && gap > se, "mr " + num(a.mean) + " +/- " + num(a.std) + ", fixed " + num(b.mean) + " +/- " +
                                      num(b.std) + ", gap " + num(gap) + ", pooled SE " + num(se)};
}

Outcome uniform_vs_cosine() {
    bool ok = true;
    std::string detail;
    auto fc = interference();
    fc.mode = BaselineMode::fixed;
    const auto fixed_csv = run_experiment(fc).metrics_csv();
    for (double r : {0.0, 0.5, 1.0}) {
        auto u = interference();
        u.target_ratio = r;
        auto c = u;
        c.selection = SelectionKind::cosine;
        const auto su = run_experiment(u), sc = run_experiment(c);
        const auto a = su.score(), b = sc.score();
        const double se = pooled_se(a, su.runs.size(), b, sc.runs.size());
        const double diff = a.mean - b.mean;
        if (r == 0.0) {
            const bool same = su.metrics_csv() == fixed_csv && sc.metrics_csv() == fixed_csv;
            ok = ok && same && std::abs(diff) <= se;
            detail += "r=0: diff " + num(diff) + " (SE " + num(se) + ")" + (same ? ", both equal fixed" : ", NOT fixed");
        } else {
            ok = ok && diff >= 0;
            detail += "; r=" + num(r) + ": uniform " + num(a.mean) + " cosine " + num(b.mean) + " diff " + num(diff);
        }
    }
    return {ok, detail};
}

Outcome determinism() {
    const auto dir = fs::temp_directory_path() / "maxroam_acceptance_determinism";
    fs::remove_all(dir);
    const std::string cfg = (fs::path(MAXROAM_CONFIG_DIR) / "interference_mr.json").string();
    std::string digests;
    for (const char* run : {"a", "b"}) {
        const std::string cmd = std::string(MAXROAM_CLI) + " run --config " + cfg + " --seed 3 --out-dir " +
                                (dir / run).string() + " > /dev/null";
        if (std::system(cmd.c_str()) != 0) return {false, "run invocation failed"};
    }
    const auto a = slurp(dir / "a" / "metrics.csv"), b = slurp(dir / "b" / "metrics.csv");
    fs::remove_all(dir);
    return {!a.empty() && a == b, std::to_string(a.size()) + " bytes, " + (a == b ? "identical" : "DIFFERENT")};
}

}  // namespace

int main() {
    criterion(1, "update plan length and constant partition size", 10, plan_exactness);
    criterion(2, "mask mean stays at p under uniform roaming", 60, [] { return monte_carlo(false); });
    criterion(3, "visited fraction tracks p + (1-p) r(c)", 60, [] { return monte_carlo(true); });
    criterion(4, "gradient masking and finite differences", 30, gradient_masking);
    criterion(5, "degenerate configurations reproduce their baselines", 600, degeneracies);
    criterion(6, "roaming beats fixed partitioning on interfering tasks", 600, roaming_vs_fixed);
    criterion(7, "uniform selection vs cosine selection over target_r", 900, uniform_vs_cosine);
    criterion(8, "byte-identical metrics.csv across invocations", 600, determinism);
    std::printf("%s: %d criteria failed\n", failures == 0 ? "ACCEPTED" : "REJECTED", failures);
    return failures == 0 ? 0 : 1;
}
