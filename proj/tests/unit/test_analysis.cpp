#include <doctest.h>

#include <sstream>

#include "../common/oracles.hpp"
#include "asm2tv/experiment.hpp"
#include "asm2tv/metrics.hpp"
#include "asm2tv/similarity.hpp"
#include "asm2tv/synthetic.hpp"

using namespace asm2tv;

TEST_CASE("metrics on hand-counted cases") {
    auto m = metrics(std::vector<int>{0, 1, 1, 1}, std::vector<int>{0, 0, 1, 1});
    CHECK(m.acc == 0.75);
    CHECK(m.macro_f1 == doctest::Approx((2.0 / 3.0 + 0.8) / 2.0).epsilon(1e-15));
    CHECK(m.weighted_f1 == doctest::Approx(0.7333333333333333));

    m = metrics(std::vector<int>{1, 1, 1, 1}, std::vector<int>{0, 0, 1, 1});
    CHECK(m.acc == 0.5);
    CHECK(m.macro_f1 == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

    m = metrics(std::vector<int>{2, 0, 1}, std::vector<int>{2, 0, 1});
    CHECK(m.acc == 1.0);
    CHECK(m.macro_f1 == 1.0);
    CHECK(m.weighted_f1 == 1.0);
}

TEST_CASE("classes absent from the labels do not enter the macro average") {
    const auto m = metrics(std::vector<int>{0, 0, 3}, std::vector<int>{0, 0, 1}, 4);
    CHECK(m.macro_f1 == doctest::Approx(0.5));
}

TEST_CASE("metrics match a brute-force oracle") {
    Rng rng(17);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = 1 + uniform_index(rng, 60), C = 2 + uniform_index(rng, 6);
        std::vector<int> pred(n), truth(n);
        for (std::size_t i = 0; i < n; ++i) {
            pred[i] = static_cast<int>(uniform_index(rng, C));
            truth[i] = static_cast<int>(uniform_index(rng, C));
        }
        const Metrics m = metrics(pred, truth, C);
        const auto o = oracle::classification_scores(pred, truth);
        CHECK(std::abs(m.acc - o.acc) <= 1e-12);
        CHECK(std::abs(m.macro_f1 - o.macro_f1) <= 1e-12);
        CHECK(std::abs(m.weighted_f1 - o.weighted_f1) <= 1e-12);
    }
}

TEST_CASE("confusion matrix bookkeeping and errors") {
    ConfusionMatrix cm(3);
    cm.add(0, 0);
    cm.add(0, 2);
    cm.add(1, 2);
    CHECK(cm.total() == 3);
    CHECK(cm.support(0) == 2);
    CHECK(cm.predicted_count(2) == 2);
    CHECK(cm.at(0, 2) == 1);
    CHECK(cm.f1(1) == 0.0);
    CHECK_THROWS_AS(cm.add(3, 0), std::out_of_range);
    CHECK_THROWS(metrics(std::vector<int>{}, std::vector<int>{}));
    CHECK_THROWS(metrics(std::vector<int>{0}, std::vector<int>{0, 1}));
}

TEST_CASE("dtw hand cases") {
    const std::vector<double> a{1, 2, 3}, b{1, 2, 2, 3};
    CHECK(dtw_distance(a, a) == 0.0);
    CHECK(dtw_distance(std::vector<double>{0}, std::vector<double>{3}) == 3.0);
    CHECK(dtw_distance(a, b) == 0.0);
    CHECK(dtw_distance(std::vector<double>{0, 0}, std::vector<double>{1}) == 2.0);
    CHECK_THROWS(dtw_distance(std::vector<double>{}, a));
}

TEST_CASE("dtw matches the full-table oracle and is symmetric") {
    Rng rng(23);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> a(1 + uniform_index(rng, 12)), b(1 + uniform_index(rng, 12));
        for (auto& x : a) x = std::round(normal(rng) * 4) / 4;
        for (auto& x : b) x = std::round(normal(rng) * 4) / 4;
        CHECK(dtw_distance(a, b) == oracle::dtw(a, b));
        CHECK(dtw_distance(a, b) == dtw_distance(b, a));
    }
}

TEST_CASE("channel-mean summary and distance matrix") {
    const std::vector<double> rows{1, 3, 2, 4, 3, 5};
    const auto raw = channel_mean_series(rows, 2, false);
    CHECK(raw == std::vector<double>{2, 3, 4});
    const auto z = channel_mean_series(rows, 2);
    CHECK(z[1] == doctest::Approx(0.0));
    CHECK(z[0] == doctest::Approx(-z[2]));
    CHECK(channel_mean_series(std::vector<double>{5, 5, 5}, 1) == std::vector<double>{0, 0, 0});
    const auto m = dtw_matrix({{0, 1}, {0, 1}, {5}});
    CHECK(m[0][1] == 0.0);
    CHECK(m[2][0] == m[0][2]);
    CHECK(m[0][2] == 9.0);
}

TEST_CASE("adjusted Rand index against pair enumeration") {
    const std::vector<std::size_t> planted{0, 0, 0, 1, 1, 1}, assigned{0, 0, 0, 1, 1, 2};
    CHECK(adjusted_rand_index(planted, assigned) == doctest::Approx(oracle::ari(planted, assigned)).epsilon(1e-14));
    CHECK(adjusted_rand_index(planted, planted) == 1.0);
    CHECK(adjusted_rand_index(planted, std::vector<std::size_t>{2, 2, 2, 0, 0, 0}) == doctest::Approx(1.0));

    Rng rng(4);
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t n = 2 + uniform_index(rng, 15);
        std::vector<std::size_t> a(n), b(n);
        for (auto& x : a) x = uniform_index(rng, 4);
        for (auto& x : b) x = uniform_index(rng, 4);
        CHECK(adjusted_rand_index(a, b) == doctest::Approx(oracle::ari(a, b)).epsilon(1e-12));
        CHECK(adjusted_rand_index(a, a) == 1.0);
        std::vector<std::size_t> renamed(n);
        for (std::size_t i = 0; i < n; ++i) renamed[i] = (b[i] + 3) % 4;
        CHECK(adjusted_rand_index(a, renamed) == doctest::Approx(adjusted_rand_index(a, b)).epsilon(1e-12));
    }
}

TEST_CASE("random assignments over many views score near zero") {
    Rng rng(8);
    double total = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<std::size_t> a(300), b(300);
        for (auto& x : a) x = uniform_index(rng, 3);
        for (auto& x : b) x = uniform_index(rng, 3);
        total += adjusted_rand_index(a, b);
    }
    CHECK(std::abs(total / 50.0) < 0.01);
}

TEST_CASE("gate cluster score uses the hard per-view assignment") {
    GatingPolicy g(1, 4, 2, UnitMode::PerView);
    auto logits = g.logits();
    const std::vector<double> wanted{5, 0, 5, 0, 0, 5, 0, 5};
    std::copy(wanted.begin(), wanted.end(), logits.mutable_data().begin());
    CHECK(view_assignment(g) == std::vector<std::size_t>{0, 0, 1, 1});
    CHECK(gate_cluster_score(g, std::vector<std::size_t>{2, 2, 7, 7}) == 1.0);
    CHECK_THROWS(gate_cluster_score(g, std::vector<std::size_t>{0, 0, 1}));

    GatingPolicy tv(3, 2, 2, UnitMode::PerTaskView);
    auto l2 = tv.logits();
    const std::vector<double> w2{1, 0, 0, 1, 1, 0, 1, 0, 0, 1, 0, 1};
    std::copy(w2.begin(), w2.end(), l2.mutable_data().begin());
    CHECK(view_assignment(tv) == std::vector<std::size_t>{0, 1});
}

TEST_CASE("ablation emits one row per grid point and gca-off equals lambda 0") {
    SyntheticSpec spec;
    spec.tasks = 2;
    spec.views = 2;
    spec.groups = 2;
    spec.classes = 2;
    spec.channels = 1;
    spec.window_length = 8;
    spec.samples_per_class = 480;
    const auto data = build_windowed_dataset(generate_synthetic(spec), 8, 0);

    ExperimentConfig base;
    base.hidden = 4;
    base.blocks = 2;
    base.block_depth = 1;
    base.train.max_steps = 6;
    base.train.eval_interval = 3;
    base.train.fragment_length = 4;
    base.train.batch_unlabeled = 4;
    base.train.adaption_steps = 1;

    AblationGrid grid{AblationAxis::Gca, {0, 1}, {1, 2}, base};
    const auto rows = run_ablation(grid, data);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].axis == "gca");
    CHECK(rows[0].seed_count == 2);

    ExperimentConfig off = base;
    off.train.lambda = 0.0;
    double mean = 0.0;
    for (std::uint64_t s : {1, 2}) {
        off.train.seed = s;
        mean += run_experiment(off, data).test.mean.macro_f1 / 2.0;
    }
    CHECK(rows[0].mean.macro_f1 == doctest::Approx(mean).epsilon(1e-15));

    grid = {AblationAxis::Blocks, {1, 2, 4}, {1}, base};
    const auto block_rows = run_ablation(grid, data);
    CHECK(block_rows.size() == 3);
    CHECK(block_rows[2].std.macro_f1 == 0.0);
    std::ostringstream csv;
    write_ablation_csv(csv, block_rows);
    CHECK(csv.str().rfind(std::string(kAblationCsvHeader) + "\nblocks,1,1,", 0) == 0);

    grid = {AblationAxis::Ratio, {1000}, {1}, base};
    CHECK_THROWS(run_ablation(grid, data));
    CHECK(parse_ablation_axis("ratio") == AblationAxis::Ratio);
    CHECK_THROWS(parse_ablation_axis("depth"));
}
