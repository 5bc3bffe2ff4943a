#include "maxroam/selection.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "maxroam/errors.hpp"

namespace maxroam {

namespace {

double dot(std::span<const double> u, std::span<const double> v) {
    double s = 0.0;
    for (std::size_t k = 0; k < u.size(); ++k) s += u[k] * v[k];
    return s;
}

}  // namespace

double cosine_similarity(std::span<const double> u, std::span<const double> v) {
    if (u.size() != v.size()) {
        throw std::invalid_argument("cosine_similarity: length mismatch (" + std::to_string(u.size()) +
                                    " vs " + std::to_string(v.size()) + ")");
    }
    const double nu = std::sqrt(dot(u, u));
    const double nv = std::sqrt(dot(v, v));
    if (nu == 0.0 || nv == 0.0) return 0.0;
    return dot(u, v) / (nu * nv);
}

std::optional<SwapPair> uniform_select(std::span<const std::size_t> active,
                                       std::span<const std::size_t> candidates, Rng& rng) {
    if (candidates.empty()) return std::nullopt;
    if (active.empty()) {
        throw ConfigError("uniform_select: task has an empty partition but unvisited parameters remain");
    }
    // i- first, then i+; the draw order is part of the reproducibility contract.
    const std::size_t minus = active[uniform_index(rng, active.size())];
    const std::size_t plus = candidates[uniform_index(rng, candidates.size())];
    return SwapPair{minus, plus};
}

std::optional<SwapPair> cosine_select(std::span<const std::size_t> active,
                                      std::span<const std::size_t> candidates,
                                      const WeightView& weights, std::size_t* zero_norm_rows) {
    if (candidates.empty()) return std::nullopt;
    if (active.empty()) {
        throw ConfigError("cosine_select: task has an empty partition but unvisited parameters remain");
    }
    if (weights.data.size() != weights.rows * weights.cols) {
        throw std::invalid_argument("cosine_select: weight view size does not match rows x cols");
    }
    auto check = [&](std::size_t i) {
        if (i >= weights.rows) {
            throw std::out_of_range("cosine_select: index " + std::to_string(i) + " outside weight rows");
        }
    };
    for (auto i : active) check(i);
    for (auto i : candidates) check(i);

    // Unit rows; zero rows stay zero so every cosine against them is 0.
    auto unit_row = [&](std::size_t i) {
        auto r = weights.row(i);
        std::vector<double> u(r.begin(), r.end());
        const double n = std::sqrt(dot(r, r));
        if (n == 0.0) {
            if (zero_norm_rows) ++*zero_norm_rows;
            return u;
        }
        for (auto& x : u) x /= n;
        return u;
    };
    std::vector<std::vector<double>> act;
    act.reserve(active.size());
    for (auto i : active) act.push_back(unit_row(i));

    // sum_{v != u} cos(u, v), computed pairwise to keep it exact for identical rows.
    std::size_t minus = active[0];
    double best_minus = 0.0;
    for (std::size_t a = 0; a < act.size(); ++a) {
        double s = 0.0;
        for (std::size_t b = 0; b < act.size(); ++b) {
            if (a != b) s += dot(act[a], act[b]);
        }
        if (a == 0 || s < best_minus || (s == best_minus && active[a] < minus)) {
            best_minus = s;
            minus = active[a];
        }
    }

    std::size_t plus = candidates[0];
    double best_plus = 0.0;
    for (std::size_t c = 0; c < candidates.size(); ++c) {
        const auto u = unit_row(candidates[c]);
        double s = 0.0;
        for (const auto& v : act) s += dot(u, v);
        if (c == 0 || s > best_plus || (s == best_plus && candidates[c] < plus)) {
            best_plus = s;
            plus = candidates[c];
        }
    }
    return SwapPair{minus, plus};
}

SelectionKind parse_selection_kind(std::string_view name) {
    if (name == "uniform") return SelectionKind::uniform;
    if (name == "cosine") return SelectionKind::cosine;
    throw ConfigError("unknown selection kind '" + std::string(name) + "' (expected uniform | cosine)");
}

std::string_view to_string(SelectionKind kind) {
    return kind == SelectionKind::uniform ? "uniform" : "cosine";
}

std::optional<SwapPair> Selector::select(std::span<const std::size_t> active,
                                         std::span<const std::size_t> candidates,
                                         const WeightView* weights) {
    if (kind_ == SelectionKind::uniform) return uniform_select(active, candidates, rng_);
    if (!weights) throw std::invalid_argument("cosine selection requires the layer's weights");
    return cosine_select(active, candidates, *weights, &zero_norm_events_);
}

}  // namespace maxroam
