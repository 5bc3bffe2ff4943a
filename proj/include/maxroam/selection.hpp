#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>

#include "maxroam/rng.hpp"

namespace maxroam {

struct SwapPair {
    std::size_t minus = 0;  // leaves the task's active set
    std::size_t plus = 0;   // joins it, never visited before

    friend bool operator==(const SwapPair&, const SwapPair&) = default;
};

/// Row-major per-channel weight vectors of one layer. Row i is the flattened
/// incoming weight vector of output channel i (bias excluded).
struct WeightView {
    std::span<const double> data;
    std::size_t rows = 0;
    std::size_t cols = 0;

    std::span<const double> row(std::size_t i) const { return data.subspan(i * cols, cols); }
};

/// Cosine of the angle between u and v; 0 when either has zero norm.
/// Throws std::invalid_argument on length mismatch.
double cosine_similarity(std::span<const double> u, std::span<const double> v);

/// Uniform draw of i- from `active` and i+ from `candidates`.
/// Returns nullopt when `candidates` is empty (the task's plan is complete).
/// Throws ConfigError when `active` is empty but candidates remain.
std::optional<SwapPair> uniform_select(std::span<const std::size_t> active,
                                       std::span<const std::size_t> candidates, Rng& rng);

/// Deterministic redundancy-driven choice:
///   i- = argmin_{u in active}     sum_{v in active \ {u}} cos(K_u, K_v)
///   i+ = argmax_{u in candidates} sum_{v in active}       cos(K_u, K_v)
/// Ties go to the lowest index. Note that the i- rule drops the channel that
/// is *least* similar to the rest, even though the intent usually quoted for
/// this variant is to discard redundant channels; the formulas are kept as is.
/// Zero-norm rows contribute similarity 0; their count is added to
/// `zero_norm_rows` when non-null.
std::optional<SwapPair> cosine_select(std::span<const std::size_t> active,
                                      std::span<const std::size_t> candidates,
                                      const WeightView& weights,
                                      std::size_t* zero_norm_rows = nullptr);

enum class SelectionKind { uniform, cosine };

SelectionKind parse_selection_kind(std::string_view name);
std::string_view to_string(SelectionKind kind);

/// A selection strategy plus its private state (RNG for uniform, anomaly
/// counter for cosine). One instance per experiment run.
class Selector {
public:
    static Selector uniform(Rng rng) { return Selector(SelectionKind::uniform, rng); }
    static Selector cosine() { return Selector(SelectionKind::cosine, Rng{}); }
    static Selector make(SelectionKind kind, Rng rng) { return Selector(kind, rng); }

    SelectionKind kind() const noexcept { return kind_; }

    /// Throws std::invalid_argument if the cosine strategy is used without weights.
    std::optional<SwapPair> select(std::span<const std::size_t> active,
                                   std::span<const std::size_t> candidates,
                                   const WeightView* weights);

    /// Zero-norm weight rows met so far by the cosine strategy.
    std::size_t zero_norm_events() const noexcept { return zero_norm_events_; }

private:
    Selector(SelectionKind kind, Rng rng) : kind_(kind), rng_(rng) {}

    SelectionKind kind_;
    Rng rng_;
    std::size_t zero_norm_events_ = 0;
};

}  // namespace maxroam
