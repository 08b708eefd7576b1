#include "asm2tv/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "asm2tv/checkpoint.hpp"
#include "asm2tv/format.hpp"

namespace asm2tv {

double temperature_at(std::size_t step, const TemperatureSchedule& s) {
    return std::max(s.tau_min, s.tau0 * std::exp(-s.rate * static_cast<double>(step)));
}

void TrainConfig::validate() const {
    auto fail = [](const std::string& what) { throw std::invalid_argument("train config: " + what); };
    if (!(lambda >= 0.0)) fail("lambda must be >= 0");
    if (!(mu >= 0.0)) fail("mu must be >= 0");
    if (adaption_steps < 1) fail("adaption_steps must be >= 1");
    if (fragment_length < 2) fail("fragment_length must be >= 2");
    if (!(margin > 0.0)) fail("margin must be > 0");
    if (batch_labeled < 1 || batch_unlabeled < 1 || batch_eval < 1) fail("batch sizes must be >= 1");
    if (!(adam.lr >= 0.0)) fail("lr must be >= 0");
    if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0) || !(adam.beta2 >= 0.0 && adam.beta2 < 1.0))
        fail("Adam betas must lie in [0, 1)");
    if (!(adam.eps > 0.0)) fail("eps must be > 0");
    if (!(adam.weight_decay >= 0.0)) fail("weight_decay must be >= 0");
    if (!(gate_lr_scale >= 0.0)) fail("gate_lr_scale must be >= 0");
    if (!(temperature.tau_min > 0.0) || temperature.tau0 < temperature.tau_min)
        fail("need 0 < tau_min <= tau0");
    if (!(temperature.rate >= 0.0)) fail("tau_rate must be >= 0");
    if (max_steps < 1) fail("max_steps must be >= 1");
    if (eval_interval < 1) fail("eval_interval must be >= 1");
    if (patience < 1) fail("patience must be >= 1");
    if (log_interval < 1) fail("log_interval must be >= 1");
}

TemperatureSchedule TrainConfig::resolved_schedule() const {
    TemperatureSchedule s = temperature;
    if (s.rate == 0.0 && s.tau0 > s.tau_min)
        s.rate = std::log(s.tau0 / s.tau_min) / (0.8 * static_cast<double>(max_steps));
    return s;
}

RunStreams::RunStreams(std::uint64_t seed)
    : data(derive_seed(seed, 2)),
      gca(derive_seed(seed, 3)),
      gumbel(derive_seed(seed, 4)),
      dropout_labeled(derive_seed(seed, 5)),
      dropout_unlabeled(derive_seed(seed, 6)) {}

LabeledBatch gather_labeled(const WindowedDataset& data, const std::vector<std::vector<std::size_t>>& indices) {
    LabeledBatch batch;
    for (std::size_t t = 0; t < indices.size(); ++t) {
        const auto& set = data.tasks.at(t).labeled;
        batch.views.push_back(set.gather(indices[t]));
        std::vector<int> labels;
        for (auto i : indices[t]) labels.push_back(set.labels.at(i));
        batch.labels.push_back(std::move(labels));
    }
    return batch;
}

GcaInputs gather_gca(const FragmentStore& store, const std::vector<GcaSample>& draws) {
    GcaInputs in;
    if (draws.empty()) throw std::invalid_argument("empty GCA draw batch");
    const std::size_t K = draws.front().tasks.front().internal.size();
    for (std::size_t t = 0; t < store.tasks.size(); ++t) {
        const WindowSet& set = *store.tasks[t].windows;
        std::vector<std::size_t> ref;
        std::vector<std::vector<std::size_t>> internal(K);
        std::array<std::vector<std::size_t>, 2> external;
        for (const auto& d : draws) {
            const auto& s = d.tasks.at(t);
            ref.push_back(s.reference);
            for (std::size_t k = 0; k < K; ++k) internal[k].push_back(s.internal.at(k));
            for (std::size_t i = 0; i < 2; ++i) external[i].push_back(s.external[i]);
        }
        in.reference.push_back(set.gather(ref));
        std::vector<std::vector<Tensor>> per_k;
        for (const auto& idx : internal) per_k.push_back(set.gather(idx));
        in.internal.push_back(std::move(per_k));
        in.external.push_back({set.gather(external[0]), set.gather(external[1])});
    }
    return in;
}

namespace {

double mean_of(const Tensor& t) {
    const auto d = t.data();
    return d.empty() ? 0.0 : std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(d.size());
}

// Unlabeled forward for one task: eval-mode reference, then one train-mode
// pass over the K internal and two external batches stacked by rows.
GcaTaskDistributions gca_distributions(const AsmModel& model, std::size_t t, const GcaInputs& in,
                                       const GateSet* gates, Rng& dropout) {
    GcaTaskDistributions out;
    out.reference = stop_gradient(model.predict(t, in.reference[t]));
    const std::size_t K = in.internal[t].size();
    const std::size_t V = model.config().views;
    std::vector<Tensor> stacked(V);
    for (std::size_t v = 0; v < V; ++v) {
        std::vector<Tensor> parts;
        for (std::size_t k = 0; k < K; ++k) parts.push_back(in.internal[t][k][v]);
        parts.push_back(in.external[t][0][v]);
        parts.push_back(in.external[t][1][v]);
        stacked[v] = concat_rows(parts);
    }
    const Tensor probs = softmax(model.forward_task(t, stacked, Mode::Train, gates, &dropout).fusion_logits);
    const std::size_t B = in.reference[t][0].rows();
    for (std::size_t k = 0; k < K; ++k) out.internal.push_back(slice_rows(probs, k * B, (k + 1) * B));
    out.external[0] = slice_rows(probs, K * B, (K + 1) * B);
    out.external[1] = slice_rows(probs, (K + 1) * B, (K + 2) * B);
    return out;
}

}  // namespace

LossBreakdown train_step(AsmModel& model, Adam& optimizer, const LabeledBatch& batch, const GcaInputs* gca,
                         const TrainConfig& config, std::size_t step, RunStreams& streams, StepTrace* trace) {
    const std::size_t T = model.config().tasks;
    if (batch.views.size() != T || batch.labels.size() != T)
        throw std::invalid_argument("labeled batch must hold one mini-batch per task");

    LossBreakdown bd;
    bd.step = step;
    bd.tau = temperature_at(step, config.resolved_schedule());
    bd.alpha_mean = mean_of(model.uncertainty().alpha);
    bd.beta_mean = mean_of(model.uncertainty().beta);
    if (trace) {
        *trace = {};
        const auto a = model.uncertainty().alpha.data(), b = model.uncertainty().beta.data();
        trace->alpha.assign(a.begin(), a.end());
        trace->beta.assign(b.begin(), b.end());
    }

    try {
        GateSet gates;
        const GateSet* gate_ptr = nullptr;
        if (model.has_gating()) {
            model.gating().set_temperature(bd.tau);
            gates = model.soft_gates(model.gating().draw_noise(streams.gumbel));
            gate_ptr = &gates;
        }

        Tensor ls;
        std::vector<std::vector<Tensor>> view_probs(T);
        std::vector<Tensor> fusion_probs(T);
        for (std::size_t t = 0; t < T; ++t) {
            TaskOutput out = model.forward_task(t, batch.views[t], Mode::Train, gate_ptr, &streams.dropout_labeled);
            const Tensor term = supervised_loss(out.fusion_logits, out.view_logits, batch.labels[t]);
            ls = ls.defined() ? add(ls, term) : term;
            for (const auto& vl : out.view_logits) view_probs[t].push_back(softmax(vl));
            fusion_probs[t] = softmax(out.fusion_logits);
            if (trace) trace->labeled.push_back(std::move(out));
        }
        const Tensor lf = fusion_regularizer(view_probs, fusion_probs);
        bd.supervised = ls.item();
        bd.fusion = lf.item();

        Tensor lu = Tensor::scalar(0.0);
        if (gca != nullptr && config.lambda > 0.0) {
            std::vector<GcaTaskDistributions> dists;
            for (std::size_t t = 0; t < T; ++t)
                dists.push_back(gca_distributions(model, t, *gca, gate_ptr, streams.dropout_unlabeled));
            const GcaLoss g = gca_loss(dists, model.uncertainty(), config.margin);
            bd.consistency = g.consistency.item();
            bd.discrimination = g.discrimination.item();
            lu = g.total;
            if (trace) trace->gca = std::move(dists);
        }

        const Tensor J = total_objective(ls, lf, lu, config.lambda, config.mu);
        bd.total = J.item();
        if (trace) trace->objective = bd.total;
        optimizer.zero_grad();
        J.backward();
        optimizer.step();
    } catch (const NumericError& e) {
        throw TrainingDiverged(std::string("non-finite value at step ") + std::to_string(step) + " (" + e.what() +
                                   "): " + describe(bd),
                               bd);
    }
    for (const auto& p : optimizer.params())
        for (double x : p.data())
            if (!std::isfinite(x))
                throw TrainingDiverged("non-finite parameter after step " + std::to_string(step) + ": " + describe(bd),
                                       bd);
    return bd;
}

TaskMetrics evaluate(const AsmModel& model, const WindowedDataset& data, Split split, std::size_t batch_size) {
    if (batch_size == 0) throw std::invalid_argument("eval batch size must be >= 1");
    TaskMetrics out;
    for (std::size_t t = 0; t < data.tasks.size(); ++t) {
        const WindowSet& set = data.tasks[t].part(split);
        if (set.empty())
            throw std::invalid_argument(std::string("task ") + std::to_string(t) + " has an empty " + to_string(split) +
                                        " split");
        std::vector<int> predicted;
        predicted.reserve(set.size());
        for (std::size_t begin = 0; begin < set.size(); begin += batch_size) {
            const std::size_t end = std::min(set.size(), begin + batch_size);
            std::vector<std::size_t> idx(end - begin);
            std::iota(idx.begin(), idx.end(), begin);
            const Tensor logits = model.forward_task(t, set.gather(idx), Mode::Eval, nullptr, nullptr).fusion_logits;
            const std::size_t C = logits.cols();
            for (std::size_t r = 0; r < logits.rows(); ++r) {
                std::size_t best = 0;
                for (std::size_t c = 1; c < C; ++c)
                    if (logits.at(r, c) > logits.at(r, best)) best = c;
                predicted.push_back(static_cast<int>(best));
            }
        }
        out.tasks.push_back(metrics(predicted, set.labels, data.classes.at(t)));
    }
    for (const auto& m : out.tasks) {
        out.mean.acc += m.acc;
        out.mean.macro_f1 += m.macro_f1;
        out.mean.weighted_f1 += m.weighted_f1;
    }
    const double n = static_cast<double>(out.tasks.size());
    out.mean.acc /= n;
    out.mean.macro_f1 /= n;
    out.mean.weighted_f1 /= n;
    return out;
}

namespace {

// Shuffled per-task index stream over the (upsampled) labeled windows.
class BatchCursor {
public:
    BatchCursor(std::size_t n, std::size_t batch) : order_(n), batch_(std::min(batch, n)) {
        std::iota(order_.begin(), order_.end(), 0);
        pos_ = n;
    }

    std::vector<std::size_t> next(Rng& rng) {
        if (pos_ + batch_ > order_.size()) {
            for (std::size_t i = order_.size(); i > 1; --i) std::swap(order_[i - 1], order_[uniform_index(rng, i)]);
            pos_ = 0;
        }
        std::vector<std::size_t> out(order_.begin() + static_cast<std::ptrdiff_t>(pos_),
                                     order_.begin() + static_cast<std::ptrdiff_t>(pos_ + batch_));
        pos_ += batch_;
        return out;
    }

private:
    std::vector<std::size_t> order_;
    std::size_t batch_;
    std::size_t pos_;
};

void write_metric_row(std::ostream& out, const MetricRow& r) {
    out << r.step << ',' << r.task << ',' << format_double(r.values.acc) << ',' << format_double(r.values.macro_f1)
        << ',' << format_double(r.values.weighted_f1) << '\n';
}

std::string snapshot_text(const std::map<std::string, std::string>& kv) {
    std::ostringstream s;
    for (const auto& [k, v] : kv) s << k << " = " << v << '\n';
    return s.str();
}

}  // namespace

RunRecord fit(AsmModel& model, const WindowedDataset& data, const TrainConfig& config, const FitOptions& options) {
    config.validate();
    const std::size_t T = model.config().tasks;
    if (data.tasks.size() != T) throw std::invalid_argument("dataset and model disagree on the task count");
    for (std::size_t t = 0; t < T; ++t) {
        const auto& tw = data.tasks[t];
        if (tw.labeled.empty() || tw.validation.empty())
            throw std::invalid_argument("task " + std::to_string(t) + " has an empty labeled or validation split");
        if (config.lambda > 0.0 && tw.unlabeled.empty())
            throw std::invalid_argument("task " + std::to_string(t) + " has an empty unlabeled split");
    }

    RunRecord record;
    record.seed = config.seed;
    record.config_snapshot = snapshot_text(options.experiment);
    std::vector<std::string> names = options.task_names;
    for (std::size_t t = names.size(); t < T; ++t) names.push_back("t" + std::to_string(t));

    RunStreams streams(config.seed);
    WindowedDataset train = data;
    if (config.upsample)
        for (std::size_t t = 0; t < T; ++t)
            train.tasks[t].labeled = upsample(data.tasks[t].labeled, data.classes[t], streams.data);
    std::vector<BatchCursor> cursors;
    for (std::size_t t = 0; t < T; ++t) cursors.emplace_back(train.tasks[t].labeled.size(), config.batch_labeled);

    std::optional<FragmentStore> store;
    if (config.lambda > 0.0) store = build_fragments(train, config.fragment_length);

    Adam optimizer(model.parameter_tensors(), config.adam);
    if (config.gate_lr_scale != 1.0) {
        auto& scale = optimizer.state().lr_scale;
        scale.assign(model.parameters().size(), 1.0);
        for (std::size_t i = 0; i < scale.size(); ++i)
            if (model.parameters()[i].name == "gating.logits") scale[i] = config.gate_lr_scale;
    }

    const bool to_disk = !options.run_dir.empty();
    std::ofstream losses_csv, metrics_csv;
    if (to_disk) {
        std::filesystem::create_directories(options.run_dir);
        std::ofstream(options.run_dir / "config.snapshot") << record.config_snapshot;
        losses_csv.open(options.run_dir / "losses.csv");
        metrics_csv.open(options.run_dir / "metrics.csv");
        if (!losses_csv || !metrics_csv) throw ArtifactError("cannot write into " + options.run_dir.string());
        losses_csv << kLossCsvHeader << '\n';
        metrics_csv << kMetricsCsvHeader << '\n';
        record.best_checkpoint = options.run_dir / "checkpoint.best";
    }

    std::vector<std::vector<double>> best_values;
    std::size_t stale = 0;
    for (std::size_t step = 0; step < config.max_steps; ++step) {
        std::vector<std::vector<std::size_t>> idx;
        for (std::size_t t = 0; t < T; ++t) idx.push_back(cursors[t].next(streams.data));
        const LabeledBatch batch = gather_labeled(train, idx);
        std::optional<GcaInputs> gca;
        if (store) gca = gather_gca(*store, draw_gca_batch(*store, config.adaption_steps, config.batch_unlabeled, streams.gca));

        LossBreakdown bd = train_step(model, optimizer, batch, gca ? &*gca : nullptr, config, step, streams);
        if (step % config.log_interval == 0) {
            record.losses.push_back(bd);
            if (to_disk) write_loss_row(losses_csv, bd);
        }

        const std::size_t done = step + 1;
        record.steps = done;
        if (done % config.eval_interval != 0 && done != config.max_steps) continue;

        const TaskMetrics val = evaluate(model, data, Split::Validation, config.batch_eval);
        for (std::size_t t = 0; t < T; ++t) record.metrics.push_back({done, names[t], val.tasks[t]});
        record.metrics.push_back({done, "mean", val.mean});
        if (to_disk) {
            for (std::size_t i = record.metrics.size() - T - 1; i < record.metrics.size(); ++i)
                write_metric_row(metrics_csv, record.metrics[i]);
            if (model.has_gating()) {
                std::ofstream gates(options.run_dir / ("gates_step" + std::to_string(done) + ".csv"));
                model.gating().write_gate_csv(gates);
            }
        }
        if (val.mean.macro_f1 > record.best_val_macro_f1) {
            record.best_val_macro_f1 = val.mean.macro_f1;
            record.best_step = done;
            best_values.clear();
            for (const auto& p : model.parameters()) best_values.emplace_back(p.tensor.data().begin(), p.tensor.data().end());
            stale = 0;
            if (to_disk) save_checkpoint(record.best_checkpoint, model, &optimizer.state(), options.experiment, done);
        } else if (++stale >= config.patience) {
            record.early_stopped = true;
            break;
        }
    }

    if (to_disk) save_checkpoint(options.run_dir / "checkpoint.last", model, &optimizer.state(), options.experiment,
                                 record.steps);
    for (std::size_t i = 0; i < best_values.size(); ++i) {
        auto dst = model.parameters()[i].tensor;
        std::copy(best_values[i].begin(), best_values[i].end(), dst.mutable_data().begin());
    }
    return record;
}

}  // namespace asm2tv
