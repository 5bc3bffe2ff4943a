#include <cmath>
#include <filesystem>
#include <numeric>

#include "doctest.h"
#include "maxroam/errors.hpp"
#include "maxroam/synth.hpp"

using namespace maxroam;

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
    return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

double correlation(const std::vector<double>& a, const std::vector<double>& b) {
    const double n = static_cast<double>(a.size());
    const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
    const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    return sab / std::sqrt(saa * sbb);
}

TaskFamilySpec regression(std::size_t tasks, double rho) {
    TaskFamilySpec s;
    s.n_tasks = tasks;
    s.relatedness = rho;
    s.noise_std = 0.0;
    s.n_train = 200;
    s.n_val = 100;
    s.seed = 3;
    return s;
}

}  // namespace

TEST_CASE("directions: T = 3, rho = 0.5 in an 8-dim latent space") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng = make_stream(seed, "dir");
        const auto v = target_directions(3, 8, 0.5, rng);
        for (std::size_t a = 0; a < 3; ++a) {
            CHECK(dot(v.row(a), v.row(a)) == doctest::Approx(1.0));
            for (std::size_t b = a + 1; b < 3; ++b) {
                const double c = dot(v.row(a), v.row(b));
                CHECK(c >= 0.45);
                CHECK(c <= 0.55);
            }
        }
    }
}

TEST_CASE("directions: negative and boundary relatedness") {
    Rng rng = make_stream(1, "dir");
    const auto v = target_directions(4, 8, -0.3, rng);
    for (std::size_t a = 0; a < 4; ++a) {
        for (std::size_t b = a + 1; b < 4; ++b) CHECK(dot(v.row(a), v.row(b)) == doctest::Approx(-0.3));
    }
    // rho = -1/(T-1) is singular but feasible.
    const auto s = target_directions(3, 4, -0.5, rng);
    CHECK(dot(s.row(0), s.row(2)) == doctest::Approx(-0.5));
    CHECK_THROWS_AS(target_directions(3, 8, -0.6, rng), ConfigError);
    CHECK_THROWS_AS(target_directions(9, 8, 0.0, rng), ConfigError);
    CHECK_THROWS_AS(target_directions(2, 8, 1.2, rng), ConfigError);
}

TEST_CASE("rho = 1 without noise gives identical targets") {
    const auto d = generate(regression(3, 1.0));
    CHECK(d.train.targets[0] == d.train.targets[1]);
    CHECK(d.train.targets[1] == d.train.targets[2]);
}

TEST_CASE("T = 2, rho = -1 gives perfectly anti-correlated targets") {
    const auto d = generate(regression(2, -1.0));
    CHECK(correlation(d.train.targets[0], d.train.targets[1]) == doctest::Approx(-1.0).epsilon(1e-9));
    for (std::size_t n = 0; n < d.train.size(); ++n) {
        CHECK(d.train.targets[0][n] == doctest::Approx(-d.train.targets[1][n]).epsilon(1e-9));
    }
}

TEST_CASE("binary tasks are balanced") {
    TaskFamilySpec s = regression(4, -0.3);
    s.kind = TaskKind::binary;
    s.noise_std = 0.2;
    s.n_train = 1000;
    s.n_val = 1000;
    const auto d = generate(s);
    for (std::size_t t = 0; t < 4; ++t) {
        const double pos = std::accumulate(d.train.targets[t].begin(), d.train.targets[t].end(), 0.0) +
                           std::accumulate(d.val.targets[t].begin(), d.val.targets[t].end(), 0.0);
        CHECK(std::abs(pos / 2000.0 - 0.5) <= 0.02);
        for (auto y : d.train.targets[t]) CHECK((y == 0.0 || y == 1.0));
    }
}

TEST_CASE("same family settings give a bit-identical dataset, another seed does not") {
    auto s = regression(3, 0.2);
    s.noise_std = 0.5;
    const auto a = generate(s), b = generate(s);
    CHECK(a.train.inputs == b.train.inputs);
    CHECK(a.train.targets == b.train.targets);
    CHECK(a.val.targets == b.val.targets);
    s.seed = 4;
    CHECK_FALSE(generate(s).train.inputs == a.train.inputs);
}

TEST_CASE("train and val splits are disjoint") {
    const auto d = generate(regression(2, 0.0));
    for (std::size_t i = 0; i < d.train.size(); ++i) {
        for (std::size_t j = 0; j < d.val.size(); ++j) {
            REQUIRE_FALSE(std::equal(d.train.inputs.row(i).begin(), d.train.inputs.row(i).end(),
                                     d.val.inputs.row(j).begin()));
        }
    }
}

TEST_CASE("task family validation") {
    auto s = regression(2, 0.0);
    s.latent_dim = 0;
    CHECK_THROWS_AS(s.validate(), ConfigError);
    s = regression(0, 0.0);
    CHECK_THROWS_AS(s.validate(), ConfigError);
    s = regression(5, -0.3);
    CHECK_THROWS_AS(s.validate(), ConfigError);
    s = regression(2, 0.0);
    s.noise_std = -1;
    CHECK_THROWS_AS(s.validate(), ConfigError);
}

TEST_CASE("f_score") {
    const std::vector<double> logits{2.0, -1.0, 0.5, -3.0}, labels{1, 1, 0, 0};
    // tp = 1, fp = 1, fn = 1
    CHECK(f_score(logits, labels) == doctest::Approx(0.5));
    const std::vector<double> neg{-1.0, -2.0}, zeros{0, 0};
    CHECK(f_score(neg, zeros) == 1.0);
    const std::vector<double> perfect{1.0, -1.0}, lab{1, 0};
    CHECK(f_score(perfect, lab) == 1.0);
}

TEST_CASE("slices and single-task views") {
    const auto d = generate(regression(3, 0.0));
    const std::vector<std::size_t> rows{5, 0, 7};
    const auto b = d.train.slice(rows);
    CHECK(b.size() == 3);
    CHECK(b.targets[2][0] == d.train.targets[2][5]);
    CHECK(std::equal(b.inputs.row(2).begin(), b.inputs.row(2).end(), d.train.inputs.row(7).begin()));
    const auto one = d.train.task_only(1);
    CHECK(one.tasks() == 1);
    CHECK(one.targets[0] == d.train.targets[1]);
}

TEST_CASE("CSV export round trip") {
    auto s = regression(3, -0.2);
    s.kind = TaskKind::binary;
    s.n_train = 40;
    s.n_val = 20;
    const auto d = generate(s);
    const auto dir = std::filesystem::temp_directory_path() / "maxroam_synth_test";
    std::filesystem::create_directories(dir);
    export_dataset(d, dir / "data.csv");
    CHECK(std::filesystem::exists(dir / "data.json"));
    const auto back = import_dataset(dir / "data.csv");
    CHECK(back.train.inputs == d.train.inputs);
    CHECK(back.val.targets == d.val.targets);
    CHECK(back.train.kind == TaskKind::binary);
    CHECK(back.spec.n_tasks == 3);
    CHECK(back.directions == d.directions);
    std::filesystem::remove_all(dir);
}
