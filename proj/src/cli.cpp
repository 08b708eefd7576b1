#include "asm2tv/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>

#include "asm2tv/checkpoint.hpp"
#include "asm2tv/config.hpp"
#include "asm2tv/experiment.hpp"
#include "asm2tv/format.hpp"
#include "asm2tv/similarity.hpp"
#include "asm2tv/synthetic.hpp"

namespace asm2tv {

namespace {

/// `--key value` for every config key; CLI flag > config file > default.
struct ConfigFlags {
    std::string config_path;
    std::map<std::string, std::string> values;

    void attach(CLI::App& app) {
        app.add_option("--config", config_path, "flat key = value config file");
        for (const auto& key : config_keys()) {
            app.add_option_function<std::string>(
                   "--" + key.name, [this, name = key.name](const std::string& v) { values[name] = v; }, key.help)
                ->default_str(key.default_value)
                ->run_callback_for_default(false);
        }
    }

    KeyValues resolve() const {
        KeyValues kv = config_path.empty() ? default_key_values() : read_config_file(config_path);
        for (const auto& [k, v] : values) set_config_value(kv, k, v);
        return kv;
    }
};

std::vector<std::string> task_names_of(const std::string& manifest) {
    return DatasetManifest::load(manifest).tasks;
}

void write_eval_csv(std::ostream& out, const TaskMetrics& m, const std::vector<std::string>& names) {
    out << "task,acc,macro_f1,weighted_f1\n";
    auto row = [&out](const std::string& name, const Metrics& x) {
        out << name << ',' << format_double(x.acc) << ',' << format_double(x.macro_f1) << ','
            << format_double(x.weighted_f1) << '\n';
    };
    for (std::size_t t = 0; t < m.tasks.size(); ++t) row(t < names.size() ? names[t] : "t" + std::to_string(t), m.tasks[t]);
    row("mean", m.mean);
}

int cmd_train(const ConfigFlags& flags, std::string run_dir, std::ostream& out) {
    const ExperimentConfig cfg = experiment_config(flags.resolve());
    if (run_dir.empty()) run_dir = "runs/seed" + std::to_string(cfg.train.seed);
    const WindowedDataset data = apply_unlabeled_ratio(load_dataset(cfg), cfg, cfg.train.seed);
    const ExperimentResult r = run_experiment(cfg, data, run_dir, task_names_of(cfg.manifest));
    out << "run_dir " << run_dir << '\n'
        << "steps " << r.record.steps << '\n'
        << "best_step " << r.record.best_step << '\n'
        << "best_val_macro_f1 " << format_double(r.record.best_val_macro_f1) << '\n';
    write_eval_csv(out, r.test, task_names_of(cfg.manifest));
    return kExitOk;
}

int cmd_eval(const std::string& checkpoint, std::string manifest, const std::string& split_name, std::ostream& out) {
    Split split;
    if (split_name == "val")
        split = Split::Validation;
    else if (split_name == "test")
        split = Split::Test;
    else
        throw ConfigError("split", "split must be val or test, got '" + split_name + "'");
    const Checkpoint ck = load_checkpoint(checkpoint);
    ExperimentConfig cfg = experiment_config([&] {
        KeyValues kv = default_key_values();
        for (const auto& [k, v] : ck.experiment) set_config_value(kv, k, v);
        return kv;
    }());
    if (!manifest.empty()) cfg.manifest = manifest;
    const WindowedDataset data = load_dataset(cfg);
    if (data.input_dims != ck.model_config.input_dims || data.classes != ck.model_config.classes)
        throw ArtifactError("checkpoint " + checkpoint + " does not match the dataset's view dims or class counts");
    const AsmModel model = model_from_checkpoint(ck);
    write_eval_csv(out, evaluate(model, data, split, cfg.train.batch_eval), task_names_of(cfg.manifest));
    return kExitOk;
}

int cmd_gates(const std::string& checkpoint, const std::string& path, std::ostream& out) {
    const AsmModel model = model_from_checkpoint(load_checkpoint(checkpoint));
    if (!model.has_gating()) throw ArtifactError("checkpoint " + checkpoint + " has no gating policy");
    if (path.empty()) {
        model.gating().write_gate_csv(out);
        return kExitOk;
    }
    std::ofstream file(path);
    if (!file) throw ArtifactError("cannot write " + path);
    model.gating().write_gate_csv(file);
    return kExitOk;
}

int cmd_dtw(const std::string& a, const std::string& b, bool normalize, std::size_t rows, std::ostream& out) {
    auto summary = [&](const std::string& path) {
        const SeriesFile f = read_series_csv(path);
        const std::size_t n = rows == 0 ? f.ts_ms.size() : std::min(rows, f.ts_ms.size());
        const std::size_t channels = f.channel_names.size();
        std::vector<double> flat;
        flat.reserve(n * channels);
        for (std::size_t r = 0; r < n; ++r) flat.insert(flat.end(), f.channels[r].begin(), f.channels[r].end());
        return channel_mean_series(flat, channels, normalize);
    };
    out << format_double(dtw_distance(summary(a), summary(b))) << '\n';
    return kExitOk;
}

std::vector<double> parse_values(const std::string& text) {
    std::vector<double> out;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto comma = text.find(',', pos);
        const auto piece = text.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
        try {
            out.push_back(parse_double(piece));
        } catch (const std::invalid_argument& e) {
            throw ConfigError("values", std::string("--values: ") + e.what());
        }
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    return out;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Adaptive shared-block multi-task multi-view trainer", "asm2tv"};
    app.require_subcommand(1);

    auto* train = app.add_subcommand("train", "fit a model and write a run directory");
    ConfigFlags train_flags;
    train_flags.attach(*train);
    std::string run_dir;
    train->add_option("--out", run_dir, "run directory (default runs/seed<seed>)");

    auto* eval = app.add_subcommand("eval", "score a checkpoint on the validation or test split");
    std::string checkpoint, eval_manifest, split = "test";
    eval->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
    eval->add_option("--manifest", eval_manifest, "dataset manifest (default: the one recorded in the checkpoint)");
    eval->add_option("--split", split, "val or test")->capture_default_str();

    auto* synth = app.add_subcommand("gen-synth", "write a synthetic dataset with planted view groups");
    SyntheticSpec spec;
    std::string synth_out = "synth";
    synth->add_option("--out", synth_out, "output directory")->capture_default_str();
    synth->add_option("--seed", spec.seed, "generator seed")->capture_default_str();
    synth->add_option("--tasks", spec.tasks, "tasks")->capture_default_str();
    synth->add_option("--views", spec.views, "views")->capture_default_str();
    synth->add_option("--groups", spec.groups, "planted view groups")->capture_default_str();
    synth->add_option("--classes", spec.classes, "classes")->capture_default_str();
    synth->add_option("--samples_per_class", spec.samples_per_class, "rows per class segment")->capture_default_str();
    synth->add_option("--channels", spec.channels, "channels per view")->capture_default_str();
    synth->add_option("--window_length", spec.window_length, "rows per window")->capture_default_str();
    synth->add_option("--noise", spec.noise, "Gaussian noise scale")->capture_default_str();
    synth->add_option("--drift", spec.drift, "relative frequency drift across a segment")->capture_default_str();
    synth->add_option("--phase_jitter", spec.phase_jitter, "per-window phase jitter (radians)")->capture_default_str();
    synth->add_flag("--identity_maps", spec.identity_maps, "unit channel gains for every view");

    auto* gates = app.add_subcommand("gates", "export the gate matrix of a checkpoint");
    std::string gates_checkpoint, gates_out;
    gates->add_option("--checkpoint", gates_checkpoint, "checkpoint file")->required();
    gates->add_option("--out", gates_out, "CSV path (default stdout)");

    auto* dtw = app.add_subcommand("dtw", "DTW distance between the channel-mean series of two CSV files");
    std::string dtw_a, dtw_b;
    bool raw = false;
    std::size_t dtw_rows = 0;
    dtw->add_option("a", dtw_a, "first series CSV")->required();
    dtw->add_option("b", dtw_b, "second series CSV")->required();
    dtw->add_flag("--raw", raw, "skip z-normalization");
    dtw->add_option("--rows", dtw_rows, "use only the first N rows (0 = all)")->capture_default_str();

    auto* ablate = app.add_subcommand("ablate", "train a grid over one axis and write mean/std test metrics");
    ConfigFlags ablate_flags;
    ablate_flags.attach(*ablate);
    std::string axis, values, ablate_out;
    std::size_t seed_count = 1;
    ablate->add_option("--axis", axis, "blocks, ratio or gca")->required();
    ablate->add_option("--values", values, "comma-separated grid values")->required();
    ablate->add_option("--seeds", seed_count, "seeds 1..n per grid point")->capture_default_str();
    ablate->add_option("--out", ablate_out, "results CSV (default stdout)");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*train) return cmd_train(train_flags, run_dir, out);
        if (*eval) return cmd_eval(checkpoint, eval_manifest, split, out);
        if (*synth) {
            write_synthetic(spec, synth_out);
            std::ofstream cfg(std::filesystem::path(synth_out) / "synth.cfg");
            cfg << "manifest = manifest.json\nwindow_length = " << spec.window_length << '\n';
            out << "wrote " << synth_out << '\n';
            return kExitOk;
        }
        if (*gates) return cmd_gates(gates_checkpoint, gates_out, out);
        if (*dtw) return cmd_dtw(dtw_a, dtw_b, !raw, dtw_rows, out);
        if (*ablate) {
            AblationGrid grid;
            grid.axis = parse_ablation_axis(axis);
            grid.values = parse_values(values);
            if (seed_count == 0) throw ConfigError("seeds", "--seeds must be >= 1");
            for (std::size_t s = 1; s <= seed_count; ++s) grid.seeds.push_back(s);
            grid.base = experiment_config(ablate_flags.resolve());
            const WindowedDataset data = load_dataset(grid.base);
            const auto rows = run_ablation(grid, data, &err);
            if (ablate_out.empty()) {
                write_ablation_csv(out, rows);
            } else {
                std::ofstream file(ablate_out);
                if (!file) throw ArtifactError("cannot write " + ablate_out);
                write_ablation_csv(file, rows);
            }
            return kExitOk;
        }
    } catch (const ConfigError& e) {
        err << "config error";
        if (!e.key().empty()) err << " (" << e.key() << ")";
        err << ": " << e.what() << '\n';
        return kExitUsage;
    } catch (const ArtifactError& e) {
        err << "artifact error: " << e.what() << '\n';
        return kExitArtifact;
    } catch (const TrainingDiverged& e) {
        err << "training diverged: " << e.what() << '\n';
        return kExitRuntime;
    } catch (const std::invalid_argument& e) {
        err << "invalid input: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return kExitUsage;
}

}  // namespace asm2tv
