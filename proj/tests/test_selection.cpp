#include <cmath>
#include <vector>

#include "doctest.h"
#include "maxroam/errors.hpp"
#include "maxroam/partition.hpp"
#include "maxroam/selection.hpp"

using namespace maxroam;

namespace {

using Idx = std::vector<std::size_t>;

// Brute-force evaluation of both summed-cosine rules, written independently of
// cosine_select: no normalization cache, strict comparisons scanning upward.
SwapPair cosine_oracle(const Idx& active, const Idx& cand, const std::vector<std::vector<double>>& k) {
    auto cs = [&](std::size_t a, std::size_t b) {
        double dot = 0, na = 0, nb = 0;
        for (std::size_t j = 0; j < k[a].size(); ++j) {
            dot += k[a][j] * k[b][j];
            na += k[a][j] * k[a][j];
            nb += k[b][j] * k[b][j];
        }
        return (na == 0 || nb == 0) ? 0.0 : dot / std::sqrt(na * nb);
    };
    SwapPair best{active[0], cand[0]};
    double lo = INFINITY, hi = -INFINITY;
    for (auto u : active) {
        double s = 0;
        for (auto v : active) {
            if (v != u) s += cs(u, v);
        }
        if (s < lo - 1e-12) lo = s, best.minus = u;
    }
    for (auto u : cand) {
        double s = 0;
        for (auto v : active) s += cs(u, v);
        if (s > hi + 1e-12) hi = s, best.plus = u;
    }
    return best;
}

WeightView view_of(const std::vector<std::vector<double>>& k, std::vector<double>& flat) {
    flat.clear();
    for (const auto& r : k) flat.insert(flat.end(), r.begin(), r.end());
    return {flat, k.size(), k.front().size()};
}

}  // namespace

TEST_CASE("cosine_similarity") {
    const std::vector<double> v{0.3, -2.0, 5.0};
    CHECK(cosine_similarity(v, v) == doctest::Approx(1.0));
    CHECK(cosine_similarity(std::vector<double>{1, 0}, std::vector<double>{0, 1}) == 0.0);
    CHECK(cosine_similarity(std::vector<double>{1, 1}, std::vector<double>{1, 0}) ==
          doctest::Approx(0.70710678118654752));
    CHECK(cosine_similarity(std::vector<double>{0, 0}, std::vector<double>{1, 0}) == 0.0);
    CHECK_THROWS_AS(cosine_similarity(std::vector<double>{1, 0}, std::vector<double>{1, 0, 0}),
                    std::invalid_argument);
}

TEST_CASE("uniform_select: singletons force the pair") {
    Rng rng = make_stream(0, "sel");
    const Idx a{3}, c{7};
    const auto p = uniform_select(a, c, rng);
    REQUIRE(p);
    CHECK(p->minus == 3);
    CHECK(p->plus == 7);
}

TEST_CASE("uniform_select: empty candidates signal completion, empty active is a config error") {
    Rng rng = make_stream(0, "sel");
    const Idx a{1, 2}, none{};
    CHECK_FALSE(uniform_select(a, none, rng));
    CHECK_THROWS_AS(uniform_select(none, Idx{4}, rng), ConfigError);
}

TEST_CASE("uniform_select: i- frequency over 10000 draws") {
    Rng rng = make_stream(42, "sel");
    const Idx a{1, 2}, c{9};
    int ones = 0;
    const int n = 10000;
    for (int k = 0; k < n; ++k) ones += uniform_select(a, c, rng)->minus == 1;
    CHECK(std::abs(ones / static_cast<double>(n) - 0.5) < 0.02);
}

TEST_CASE("uniform selector is reproducible per seed") {
    auto draw = [](std::uint64_t seed) {
        auto sel = Selector::uniform(make_stream(seed, "sel"));
        const Idx a{0, 2, 5, 6}, c{1, 3, 4, 7, 8};
        std::vector<SwapPair> out;
        for (int k = 0; k < 50; ++k) out.push_back(*sel.select(a, c, nullptr));
        return out;
    };
    CHECK(draw(5) == draw(5));
    CHECK_FALSE(draw(5) == draw(6));
}

TEST_CASE("cosine_select: identical pair plus an orthogonal vector drops the orthogonal one") {
    // K_a = K_b, K_c orthogonal: sums are a:1, b:1, c:0, so argmin picks c.
    const std::vector<std::vector<double>> k{{1, 0}, {1, 0}, {0, 1}, {1, 1}};
    std::vector<double> flat;
    const auto w = view_of(k, flat);
    const Idx a{0, 1, 2}, c{3};
    const auto p = cosine_select(a, c, w);
    REQUIRE(p);
    CHECK(p->minus == 2);
    CHECK(p->plus == 3);
    CHECK(*p == cosine_oracle(a, c, k));
}

TEST_CASE("cosine_select: two-dimensional i+ example") {
    const double r = 1.0 / std::sqrt(2.0);
    const std::vector<std::vector<double>> k{{1, 0}, {0, 1}, {r, r}, {1, 0}};
    std::vector<double> flat;
    const auto w = view_of(k, flat);
    const Idx a{0, 1}, c{2, 3};
    CHECK(cosine_select(a, c, w)->plus == 2);
    CHECK(cosine_select(a, Idx{3}, w)->plus == 3);
}

TEST_CASE("cosine_select: ties go to the lowest index") {
    const std::vector<std::vector<double>> k{{1, 0}, {1, 0}, {0, 1}, {0, 1}};
    std::vector<double> flat;
    const auto w = view_of(k, flat);
    const auto p = cosine_select(Idx{0, 1}, Idx{2, 3}, w);
    CHECK(p->minus == 0);
    CHECK(p->plus == 2);
}

TEST_CASE("cosine_select: zero-norm rows count as similarity 0 and are logged") {
    const std::vector<std::vector<double>> k{{1, 0}, {0, 0}, {1, 0.1}, {0, 0}};
    std::vector<double> flat;
    const auto w = view_of(k, flat);
    std::size_t zero = 0;
    const auto p = cosine_select(Idx{0, 1, 2}, Idx{3}, w, &zero);
    CHECK(p->minus == 1);
    CHECK(zero == 2);
    auto sel = Selector::cosine();
    sel.select(Idx{0, 1, 2}, Idx{3}, &w);
    CHECK(sel.zero_norm_events() == 2);
}

TEST_CASE("cosine_select agrees with the brute-force oracle on random instances") {
    Rng rng = make_stream(7, "fuzz");
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t S = 3 + uniform_index(rng, 12), dim = 1 + uniform_index(rng, 5);
        std::vector<std::vector<double>> k(S, std::vector<double>(dim));
        for (auto& row : k) {
            for (auto& x : row) x = uniform01(rng) * 2 - 1;
        }
        Idx a, c;
        for (std::size_t i = 0; i < S; ++i) (bernoulli(rng, 0.5) ? a : c).push_back(i);
        if (a.empty() || c.empty()) continue;
        std::vector<double> flat;
        const auto w = view_of(k, flat);
        CHECK(*cosine_select(a, c, w) == cosine_oracle(a, c, k));
    }
}

TEST_CASE("both strategies return i- in A_t and i+ outside B_t on random partitions") {
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        Rng rng = make_stream(seed, "fuzz");
        const std::size_t S = 2 + uniform_index(rng, 30), T = 1 + uniform_index(rng, 4);
        auto lp = init_partition(S, T, 0.2 + 0.6 * uniform01(rng), rng);
        std::vector<double> flat(S * 3);
        for (auto& x : flat) x = uniform01(rng) - 0.5;
        const WeightView w{flat, S, 3};
        auto uni = Selector::uniform(make_stream(seed, "u"));
        auto cos = Selector::cosine();
        for (std::size_t t = 0; t < T; ++t) {
            const auto a = lp.active(t), c = lp.unvisited(t);
            if (a.empty()) continue;  // Bernoulli draw left the task without channels
            for (auto* sel : {&uni, &cos}) {
                const auto p = sel->select(a, c, &w);
                if (c.empty()) {
                    CHECK_FALSE(p);
                    continue;
                }
                REQUIRE(p);
                CHECK(lp.test(p->minus, t));
                CHECK(lp.visited(t)[p->plus] == 0);
            }
        }
    }
}

TEST_CASE("selection kind names") {
    CHECK(parse_selection_kind("uniform") == SelectionKind::uniform);
    CHECK(parse_selection_kind("cosine") == SelectionKind::cosine);
    CHECK(to_string(SelectionKind::cosine) == "cosine");
    CHECK_THROWS(parse_selection_kind("greedy"));
}
