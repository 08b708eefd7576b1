#include <doctest.h>

#include <cmath>

#include "../common/oracles.hpp"
#include "asm2tv/checkpoint.hpp"
#include "asm2tv/synthetic.hpp"
#include "asm2tv/trainer.hpp"
#include "test_util.hpp"

using namespace asm2tv;

namespace {

const WindowedDataset& small_data() {
    static const WindowedDataset data = [] {
        SyntheticSpec spec;
        spec.tasks = 2;
        spec.views = 2;
        spec.groups = 2;
        spec.classes = 2;
        spec.channels = 2;
        spec.window_length = 8;
        spec.samples_per_class = 480;
        spec.noise = 0.5;
        return build_windowed_dataset(generate_synthetic(spec), 8, 0);
    }();
    return data;
}

ModelConfig small_model(const WindowedDataset& d) {
    ModelConfig c;
    c.tasks = d.tasks.size();
    c.views = d.input_dims.size();
    c.input_dims = d.input_dims;
    c.classes = d.classes;
    c.hidden = 8;
    c.blocks = 2;
    c.block_depth = 1;
    c.dropout = 0.2;
    return c;
}

TrainConfig small_train() {
    TrainConfig t;
    t.fragment_length = 4;
    t.adaption_steps = 2;
    t.batch_labeled = 6;
    t.batch_unlabeled = 4;
    t.max_steps = 40;
    t.eval_interval = 10;
    t.patience = 10;
    t.adam.lr = 3e-3;
    return t;
}

LabeledBatch first_batch(const WindowedDataset& d, std::size_t n) {
    std::vector<std::vector<std::size_t>> idx(d.tasks.size());
    for (std::size_t t = 0; t < idx.size(); ++t)
        for (std::size_t i = 0; i < n; ++i) idx[t].push_back(i % d.tasks[t].labeled.size());
    return gather_labeled(d, idx);
}

oracle::Matrix rows_of(const Tensor& t) {
    oracle::Matrix m(t.rows(), std::vector<double>(t.cols()));
    for (std::size_t r = 0; r < t.rows(); ++r)
        for (std::size_t c = 0; c < t.cols(); ++c) m[r][c] = t.at(r, c);
    return m;
}

}  // namespace

TEST_CASE("temperature schedule") {
    TemperatureSchedule s{5.0, 0.5, 0.01};
    CHECK(temperature_at(0, s) == 5.0);
    CHECK(temperature_at(100, s) == doctest::Approx(5.0 * std::exp(-1.0)));
    CHECK(temperature_at(100000, s) == 0.5);
    double prev = 10.0;
    for (std::size_t k = 0; k < 1000; k += 7) {
        const double tau = temperature_at(k, s);
        CHECK(tau <= prev);
        prev = tau;
    }
    TrainConfig cfg;
    cfg.max_steps = 1000;
    const auto auto_rate = cfg.resolved_schedule();
    CHECK(temperature_at(800, auto_rate) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(temperature_at(400, auto_rate) > 0.5);
}

TEST_CASE("train config validation") {
    auto bad = [](auto edit) {
        TrainConfig c;
        edit(c);
        CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    };
    bad([](TrainConfig& c) { c.lambda = -1; });
    bad([](TrainConfig& c) { c.adaption_steps = 0; });
    bad([](TrainConfig& c) { c.fragment_length = 1; });
    bad([](TrainConfig& c) { c.margin = 0; });
    bad([](TrainConfig& c) { c.temperature.tau_min = 0; });
    bad([](TrainConfig& c) { c.temperature.tau0 = 0.1; });
    bad([](TrainConfig& c) { c.patience = 0; });
    bad([](TrainConfig& c) { c.adam.beta1 = 1.0; });
    TrainConfig ok;
    CHECK_NOTHROW(ok.validate());
}

TEST_CASE("a step without the unlabeled term matches a hand-built update bit for bit") {
    const auto& d = small_data();
    TrainConfig cfg = small_train();
    cfg.lambda = 0.0;
    const LabeledBatch batch = first_batch(d, 5);

    AsmModel a(small_model(d), 9), b(small_model(d), 9);
    Adam opt_a(a.parameter_tensors(), cfg.adam), opt_b(b.parameter_tensors(), cfg.adam);
    RunStreams sa(3), sb(3);
    const LossBreakdown bd = train_step(a, opt_a, batch, nullptr, cfg, 0, sa);

    b.gating().set_temperature(temperature_at(0, cfg.resolved_schedule()));
    const GateSet gates = b.soft_gates(b.gating().draw_noise(sb.gumbel));
    Tensor ls;
    std::vector<std::vector<Tensor>> vp(2);
    std::vector<Tensor> fp(2);
    for (std::size_t t = 0; t < 2; ++t) {
        const TaskOutput out = b.forward_task(t, batch.views[t], Mode::Train, &gates, &sb.dropout_labeled);
        const Tensor term = supervised_loss(out.fusion_logits, out.view_logits, batch.labels[t]);
        ls = t == 0 ? term : add(ls, term);
        for (const auto& v : out.view_logits) vp[t].push_back(softmax(v));
        fp[t] = softmax(out.fusion_logits);
    }
    const Tensor J = add(ls, scale(fusion_regularizer(vp, fp), cfg.mu));
    CHECK(bd.total == J.item());
    CHECK(bd.consistency == 0.0);
    opt_b.zero_grad();
    J.backward();
    opt_b.step();
    for (std::size_t i = 0; i < a.parameters().size(); ++i) {
        const auto x = a.parameters()[i].tensor.data(), y = b.parameters()[i].tensor.data();
        CAPTURE(a.parameters()[i].name);
        CHECK(std::equal(x.begin(), x.end(), y.begin(), y.end()));
    }
}

TEST_CASE("repeated steps on one batch drive the supervised loss down") {
    const auto& d = small_data();
    TrainConfig cfg = small_train();
    cfg.lambda = 0.0;
    cfg.adam.lr = 1e-2;
    cfg.adam.weight_decay = 0.0;
    cfg.max_steps = 200;
    ModelConfig mc = small_model(d);
    mc.dropout = 0.0;
    mc.hidden = 16;
    AsmModel model(mc, 4);
    Adam opt(model.parameter_tensors(), cfg.adam);
    RunStreams streams(1);
    const LabeledBatch batch = first_batch(d, 4);
    LossBreakdown bd;
    for (std::size_t s = 0; s < cfg.max_steps; ++s) bd = train_step(model, opt, batch, nullptr, cfg, s, streams);
    CHECK(bd.supervised < 0.05);
}

TEST_CASE("the step objective recomputes from its parts") {
    const auto& d = small_data();
    for (std::size_t K : {1, 3}) {
        TrainConfig cfg = small_train();
        cfg.adaption_steps = K;
        cfg.lambda = 0.7;
        cfg.mu = 0.3;
        cfg.margin = 0.05;
        AsmModel model(small_model(d), 2);
        model.uncertainty().alpha.mutable_data()[1] = 0.4;
        model.uncertainty().beta.mutable_data()[0] = -0.25;
        Adam opt(model.parameter_tensors(), cfg.adam);
        RunStreams streams(8);
        const FragmentStore store = build_fragments(d, cfg.fragment_length);
        const GcaInputs gca = gather_gca(store, draw_gca_batch(store, K, cfg.batch_unlabeled, streams.gca));
        const LabeledBatch batch = first_batch(d, 5);
        StepTrace trace;
        const LossBreakdown bd = train_step(model, opt, batch, &gca, cfg, 3, streams, &trace);

        std::vector<oracle::TaskLogits> lab;
        std::vector<oracle::TaskGca> un;
        for (std::size_t t = 0; t < 2; ++t) {
            oracle::TaskLogits tl{rows_of(trace.labeled[t].fusion_logits), {}, batch.labels[t]};
            for (const auto& v : trace.labeled[t].view_logits) tl.views.push_back(rows_of(v));
            lab.push_back(tl);
            oracle::TaskGca tg;
            tg.reference = rows_of(trace.gca[t].reference);
            for (const auto& q : trace.gca[t].internal) tg.internal.push_back(rows_of(q));
            tg.external[0] = rows_of(trace.gca[t].external[0]);
            tg.external[1] = rows_of(trace.gca[t].external[1]);
            CHECK(tg.internal.size() == K);
            un.push_back(tg);
        }
        const double J = oracle::objective(lab, un, trace.alpha, trace.beta, cfg.lambda, cfg.mu, cfg.margin);
        CHECK(std::abs(J - bd.total) <= 1e-10);
        CHECK(std::abs(J - trace.objective) <= 1e-10);
    }
}

TEST_CASE("the reference prediction is detached and computed in eval mode") {
    const auto& d = small_data();
    TrainConfig cfg = small_train();
    AsmModel model(small_model(d), 5);
    const AsmModel frozen(small_model(d), 5);
    Adam opt(model.parameter_tensors(), cfg.adam);
    RunStreams streams(2);
    const FragmentStore store = build_fragments(d, cfg.fragment_length);
    const GcaInputs gca = gather_gca(store, draw_gca_batch(store, 2, cfg.batch_unlabeled, streams.gca));
    StepTrace trace;
    train_step(model, opt, first_batch(d, 4), &gca, cfg, 0, streams, &trace);
    for (std::size_t t = 0; t < 2; ++t) {
        CHECK_FALSE(trace.gca[t].reference.requires_grad());
        CHECK(trace.gca[t].internal[0].requires_grad());
        const Tensor expect = frozen.predict(t, gca.reference[t]);
        const auto x = expect.data(), y = trace.gca[t].reference.data();
        CHECK(std::equal(x.begin(), x.end(), y.begin(), y.end()));
    }
}

TEST_CASE("fit is deterministic for a seed") {
    const auto& d = small_data();
    TrainConfig cfg = small_train();
    cfg.seed = 3;
    AsmModel a(small_model(d), 1), b(small_model(d), 1);
    const RunRecord ra = fit(a, d, cfg), rb = fit(b, d, cfg);
    REQUIRE(ra.losses.size() == rb.losses.size());
    for (std::size_t i = 0; i < ra.losses.size(); ++i) CHECK(ra.losses[i].total == rb.losses[i].total);
    CHECK(ra.best_val_macro_f1 == rb.best_val_macro_f1);
    for (std::size_t i = 0; i < a.parameters().size(); ++i) {
        const auto x = a.parameters()[i].tensor.data(), y = b.parameters()[i].tensor.data();
        CHECK(std::equal(x.begin(), x.end(), y.begin(), y.end()));
    }
    CHECK(ra.metrics.size() == (cfg.max_steps / cfg.eval_interval) * 3);
    CHECK(ra.losses.back().alpha_mean != 0.0);
}

TEST_CASE("patience stops a run that cannot improve") {
    const auto& d = small_data();
    TrainConfig cfg = small_train();
    cfg.adam.lr = 0.0;
    cfg.adam.weight_decay = 0.0;
    cfg.patience = 1;
    cfg.max_steps = 100;
    AsmModel model(small_model(d), 1);
    const RunRecord r = fit(model, d, cfg);
    CHECK(r.early_stopped);
    CHECK(r.steps == 2 * cfg.eval_interval);
    CHECK(r.best_step == cfg.eval_interval);
}

TEST_CASE("fit restores the best parameters and writes its run directory") {
    const auto& d = small_data();
    TrainConfig cfg = small_train();
    cfg.lambda = 0.0;
    asm2tv::testing::TempDir dir("fit");
    FitOptions opts;
    opts.run_dir = dir / "run";
    opts.experiment = {{"seed", "1"}};
    opts.task_names = {"s0", "s1"};
    AsmModel model(small_model(d), 1);
    const RunRecord r = fit(model, d, cfg, opts);
    const double val = evaluate(model, d, Split::Validation, 7).mean.macro_f1;
    CHECK(val == r.best_val_macro_f1);

    for (const char* f : {"config.snapshot", "losses.csv", "metrics.csv", "checkpoint.best", "checkpoint.last"})
        CHECK(std::filesystem::exists(opts.run_dir / f));
    CHECK(std::filesystem::exists(opts.run_dir / "gates_step10.csv"));
    const std::string metrics = asm2tv::testing::read_file(opts.run_dir / "metrics.csv");
    CHECK(metrics.rfind(std::string(kMetricsCsvHeader) + "\n10,s0,", 0) == 0);

    const Checkpoint best = load_checkpoint(r.best_checkpoint);
    CHECK(best.step == r.best_step);
    CHECK(best.experiment.at("seed") == "1");
    const AsmModel reloaded = model_from_checkpoint(best);
    CHECK(evaluate(reloaded, d, Split::Validation, 32).mean.macro_f1 == r.best_val_macro_f1);
}

TEST_CASE("evaluate breaks ties toward the lowest class and rejects empty splits") {
    const auto& d = small_data();
    AsmModel model(small_model(d), 1);
    for (const auto& p : model.parameters())
        if (p.name.find("fusion") != std::string::npos) {
            auto t = p.tensor;
            for (auto& x : t.mutable_data()) x = 0.0;
        }
    const TaskMetrics m = evaluate(model, d, Split::Test, 5);
    std::size_t zeros = 0, n = 0;
    for (auto y : d.tasks[0].test.labels) zeros += y == 0, ++n;
    CHECK(m.tasks[0].acc == doctest::Approx(static_cast<double>(zeros) / static_cast<double>(n)));
    WindowedDataset empty = d;
    empty.tasks[1].validation = {};
    CHECK_THROWS_AS(evaluate(model, empty, Split::Validation, 5), std::invalid_argument);
}
