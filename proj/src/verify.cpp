#include "maxroam/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <sstream>

#include "maxroam/errors.hpp"
#include "maxroam/experiment.hpp"

namespace maxroam {

PlanReplay replay_plan(LayerPartition layer, Selector& selector) {
    PlanReplay out;
    const auto T = layer.tasks();
    const auto S = layer.size();
    std::vector<std::size_t> initial(T);
    for (std::size_t t = 0; t < T; ++t) initial[t] = layer.active_count(t);

    auto check_subset = [&](const LayerPartition& l) {
        for (std::size_t t = 0; t < T; ++t) {
            const auto m = l.mask(t);
            const auto b = l.visited(t);
            for (std::size_t i = 0; i < S; ++i) out.subset_held = out.subset_held && (!m[i] || b[i]);
            const auto n = l.active_count(t);
            out.max_size_drift = std::max(out.max_size_drift, n > initial[t] ? n - initial[t] : initial[t] - n);
        }
    };
    check_subset(layer);

    // S rounds always suffice; the cap only guards against a broken selector.
    for (std::size_t guard = 0; !layer.complete() && guard <= S; ++guard) {
        std::vector<std::vector<std::uint8_t>> before;
        for (std::size_t t = 0; t < T; ++t) before.emplace_back(layer.visited(t).begin(), layer.visited(t).end());
        layer.advance(selector, nullptr);
        for (std::size_t t = 0; t < T; ++t) {
            const auto b = layer.visited(t);
            for (std::size_t i = 0; i < S; ++i) out.visited_monotone = out.visited_monotone && (!before[t][i] || b[i]);
        }
        check_subset(layer);
    }
    out.rounds = layer.steps_done();
    for (std::size_t t = 0; t < T; ++t) {
        const auto expected = S - initial[t];
        const auto got = layer.swaps(t);
        out.max_swap_error = std::max(out.max_swap_error, got > expected ? got - expected : expected - got);
    }
    if (!layer.complete()) out.max_swap_error = std::max<std::size_t>(out.max_swap_error, 1);
    return out;
}

double ratio_at(std::size_t step, std::size_t size, double sharing) {
    if (sharing >= 1.0) return 1.0;
    return std::min(1.0, static_cast<double>(step) / ((1.0 - sharing) * static_cast<double>(size)));
}

double MaskTrajectory::max_mask_deviation() const {
    double worst = 0.0;
    for (const auto& step : mask_mean)
        for (const auto& task : step)
            for (auto v : task) worst = std::max(worst, std::abs(v - sharing));
    return worst;
}

double MaskTrajectory::max_visit_deviation() const {
    double worst = 0.0;
    for (std::size_t c = 0; c < visited_fraction.size(); ++c) {
        const double expected = visit_probability(sharing, ratio_at(c, size, sharing));
        for (auto v : visited_fraction[c]) worst = std::max(worst, std::abs(v - expected));
    }
    return worst;
}

MaskTrajectory simulate_mask_trajectory(std::size_t size, std::size_t tasks, double sharing, std::size_t runs,
                                        std::uint64_t seed, std::size_t threads) {
    if (runs == 0) throw ConfigError("simulate_mask_trajectory: runs must be >= 1");
    MaskTrajectory tr;
    tr.size = size;
    tr.tasks = tasks;
    tr.sharing = sharing;
    tr.runs = runs;
    const auto k = static_cast<std::size_t>(std::llround(sharing * static_cast<double>(size)));
    tr.horizon = std::max(plan_steps(size, sharing), size - std::min(k, size));

    const std::size_t steps = tr.horizon + 1;
    struct Counts {
        std::vector<std::uint64_t> mask;     // [c][t][i]
        std::vector<std::uint64_t> visited;  // [c][t]
    };
    const std::size_t chunks = std::min<std::size_t>(runs, 64);
    std::vector<Counts> acc(chunks);
    for (auto& a : acc) {
        a.mask.assign(steps * tasks * size, 0);
        a.visited.assign(steps * tasks, 0);
    }

    parallel_for(chunks, threads, [&](std::size_t chunk) {
        auto& a = acc[chunk];
        for (std::size_t run = chunk; run < runs; run += chunks) {
            auto init_rng = make_stream(seed, "verify.init", run);
            auto selector = Selector::uniform(make_stream(seed, "verify.select", run));
            auto layer = init_partition(size, tasks, sharing, init_rng, InitMode::exact);
            for (std::size_t c = 0; c < steps; ++c) {
                if (c > 0) layer.advance(selector, nullptr);
                for (std::size_t t = 0; t < tasks; ++t) {
                    const auto m = layer.mask(t);
                    for (std::size_t i = 0; i < size; ++i) a.mask[(c * tasks + t) * size + i] += m[i];
                    a.visited[c * tasks + t] += layer.visited_count(t);
                }
            }
        }
    });

    tr.mask_mean.assign(steps, std::vector<std::vector<double>>(tasks, std::vector<double>(size, 0.0)));
    tr.visited_fraction.assign(steps, std::vector<double>(tasks, 0.0));
    const double n = static_cast<double>(runs);
    for (std::size_t c = 0; c < steps; ++c) {
        for (std::size_t t = 0; t < tasks; ++t) {
            std::uint64_t vis = 0;
            for (const auto& a : acc) vis += a.visited[c * tasks + t];
            tr.visited_fraction[c][t] = static_cast<double>(vis) / (n * static_cast<double>(size));
            for (std::size_t i = 0; i < size; ++i) {
                std::uint64_t s = 0;
                for (const auto& a : acc) s += a.mask[(c * tasks + t) * size + i];
                tr.mask_mean[c][t][i] = static_cast<double>(s) / n;
            }
        }
    }
    return tr;
}

bool VerifyReport::all_passed() const {
    return std::all_of(findings.begin(), findings.end(), [](const Finding& f) { return f.passed; });
}

nlohmann::json VerifyReport::to_json() const {
    nlohmann::json items = nlohmann::json::array();
    for (const auto& f : findings) {
        items.push_back({{"property", f.property},
                         {"p", f.sharing},
                         {"measured", f.measured},
                         {"tolerance", f.tolerance},
                         {"verdict", f.passed ? "PASS" : "FAIL"},
                         {"detail", f.detail}});
    }
    return {{"params",
             {{"S", params.size}, {"T", params.tasks}, {"p", params.sharing}, {"runs", params.runs},
              {"seed", params.seed}}},
            {"passed", all_passed()},
            {"findings", items}};
}

namespace {

Finding exact(std::string property, double p, double measured, std::string detail = {}) {
    return {std::move(property), p, measured, 0.0, measured == 0.0, std::move(detail)};
}

void check_sharing(const VerifyParams& vp, double p, VerifyReport& report) {
    const std::size_t replays = std::clamp<std::size_t>(vp.runs / 50, 20, 200);

    // Plan length and constant partition size, exact-count init.
    std::size_t swap_err = 0, drift = 0, over_bound = 0, duration_err = 0;
    bool monotone = true, subset = true;
    for (std::size_t k = 0; k < replays; ++k) {
        auto rng = make_stream(vp.seed, "verify.replay.init", k);
        auto sel = Selector::uniform(make_stream(vp.seed, "verify.replay.select", k));
        const auto layer = init_partition(vp.size, vp.tasks, p, rng, InitMode::exact);
        const auto r = replay_plan(layer, sel);
        swap_err = std::max(swap_err, r.max_swap_error);
        drift = std::max(drift, r.max_size_drift);
        monotone = monotone && r.visited_monotone;
        subset = subset && r.subset_held;
        const auto bound = plan_steps(vp.size, p);
        over_bound = std::max(over_bound, r.rounds > bound ? r.rounds - bound : std::size_t{0});
        // Plan duration with delta = 1 epoch must cover the replayed plan.
        const double dur = plan_duration(PartitionSet({layer}), p, 1.0);
        if (static_cast<double>(r.rounds) > dur + 1e-9) ++duration_err;
    }
    report.findings.push_back(exact("plan_length", p, static_cast<double>(swap_err),
                                    "max |swaps_t - (S - |B_t(0)|)| over " + std::to_string(replays) + " replays"));
    report.findings.push_back(exact("plan_bound", p, static_cast<double>(over_bound),
                                    "rounds beyond ceil((1-p)S) = " + std::to_string(plan_steps(vp.size, p))));
    report.findings.push_back(exact("plan_duration", p, static_cast<double>(duration_err),
                                    "replays outlasting delta*(1-p)*S_max with delta = 1"));
    report.findings.push_back(exact("constant_partition_size", p, static_cast<double>(drift),
                                    "max ||A_t(c)| - |A_t(0)|| over every step"));
    report.findings.push_back(exact("active_subset_of_visited", p, subset ? 0.0 : 1.0));
    report.findings.push_back(exact("visited_monotone", p, monotone ? 0.0 : 1.0));

    // Bernoulli init always satisfies coverage at c = 0.
    std::size_t uncovered = 0;
    for (std::size_t k = 0; k < replays; ++k) {
        auto rng = make_stream(vp.seed, "verify.coverage", k);
        uncovered += init_partition(vp.size, vp.tasks, p, rng, InitMode::bernoulli).uncovered_count();
    }
    report.findings.push_back(exact("initial_coverage", p, static_cast<double>(uncovered),
                                    "channels without a task right after Bernoulli init"));

    // Statistical properties.
    if (vp.runs < kMinStatisticalRuns) {
        for (const char* name : {"constant_mask_mean", "visit_probability_trajectory"}) {
            report.findings.push_back({name, p, std::nan(""), kMonteCarloTolerance, false,
                                       "needs at least " + std::to_string(kMinStatisticalRuns) + " runs"});
        }
    } else {
        const auto tr = simulate_mask_trajectory(vp.size, vp.tasks, p, vp.runs, vp.seed, vp.threads);
        const double dm = tr.max_mask_deviation();
        const double dv = tr.max_visit_deviation();
        std::ostringstream span;
        span << "steps 0.." << tr.horizon << ", " << vp.runs << " runs, exact-count init, uniform selection";
        report.findings.push_back({"constant_mask_mean", p, dm, kMonteCarloTolerance, dm < kMonteCarloTolerance,
                                   "max_{i,t,c} |mean m_{i,t}(c) - p|; " + span.str()});
        report.findings.push_back({"visit_probability_trajectory", p, dv, kMonteCarloTolerance,
                                   dv < kMonteCarloTolerance,
                                   "max_{t,c} |mean |B_t(c)|/S - (p + (1-p) r(c))|; " + span.str()});
    }

    // Same seed, different worker counts: identical trajectories.
    const auto a = simulate_mask_trajectory(vp.size, vp.tasks, p, 64, vp.seed + 1, 1);
    const auto b = simulate_mask_trajectory(vp.size, vp.tasks, p, 64, vp.seed + 1, 2);
    const bool same = a.mask_mean == b.mask_mean && a.visited_fraction == b.visited_fraction;
    report.findings.push_back(exact("determinism", p, same ? 0.0 : 1.0, "seeded trajectories under 1 and 2 workers"));
}

void check_selection_membership(const VerifyParams& vp, VerifyReport& report) {
    std::size_t bad = 0;
    const std::size_t trials = 200;
    for (std::size_t k = 0; k < trials; ++k) {
        auto rng = make_stream(vp.seed, "verify.fuzz", k);
        const double p = 0.1 + 0.8 * uniform01(rng);
        auto layer = init_partition(vp.size, vp.tasks, p, rng, InitMode::bernoulli);
        // A few warm-up rounds so visited sets differ from masks.
        auto warm = Selector::uniform(make_stream(vp.seed, "verify.fuzz.warm", k));
        for (std::size_t w = uniform_index(rng, 4); w > 0; --w) layer.advance(warm, nullptr);

        Matrix weights(vp.size, 4);
        for (auto& v : weights.data) v = uniform01(rng) - 0.5;
        const WeightView view{weights.data, weights.rows, weights.cols};
        for (auto kind : {SelectionKind::uniform, SelectionKind::cosine}) {
            auto sel = Selector::make(kind, make_stream(vp.seed, "verify.fuzz.select", k));
            for (std::size_t t = 0; t < layer.tasks(); ++t) {
                const auto act = layer.active(t);
                const auto cand = layer.unvisited(t);
                if (act.empty()) continue;
                const auto pair = sel.select(act, cand, &view);
                if (!pair) {
                    bad += !cand.empty();
                    continue;
                }
                bad += !layer.test(pair->minus, t);
                bad += layer.visited(t)[pair->plus] != 0;
            }
        }
    }
    report.findings.push_back(exact("selection_membership", 0.0, static_cast<double>(bad),
                                    "i- in A_t and i+ outside B_t, uniform and cosine, " + std::to_string(trials) +
                                        " random partitions"));
}

}  // namespace

VerifyReport verify(const VerifyParams& vp) {
    VerifyReport report;
    report.params = vp;
    for (double p : vp.sharing) {
        try {
            check_sharing(vp, p, report);
        } catch (const std::exception& e) {
            report.findings.push_back({"configuration", p, std::nan(""), 0.0, false, e.what()});
        }
    }
    try {
        check_selection_membership(vp, report);
    } catch (const std::exception& e) {
        report.findings.push_back({"selection_membership", 0.0, std::nan(""), 0.0, false, e.what()});
    }
    return report;
}

}  // namespace maxroam
