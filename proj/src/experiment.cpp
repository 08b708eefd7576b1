#include "asm2tv/experiment.hpp"

#include <cmath>
#include <ostream>

#include "asm2tv/format.hpp"
#include "asm2tv/gca_sampler.hpp"

namespace asm2tv {

WindowedDataset load_dataset(const ExperimentConfig& config) {
    if (config.manifest.empty()) throw ConfigError("manifest", "no manifest configured");
    const RawDataset raw = ingest(DatasetManifest::load(config.manifest));
    return build_windowed_dataset(raw, config.window_length, config.stride);
}

WindowedDataset apply_unlabeled_ratio(const WindowedDataset& data, const ExperimentConfig& config, std::uint64_t seed) {
    WindowedDataset out = data;
    if (config.unlabeled_ratio > 0.0) {
        Rng rng(derive_seed(seed, 7));
        limit_unlabeled(out, config.unlabeled_ratio, config.train.fragment_length, rng);
    }
    return out;
}

std::uint64_t model_seed(std::uint64_t run_seed) { return derive_seed(run_seed, 1); }

ExperimentResult run_experiment(const ExperimentConfig& config, const WindowedDataset& data,
                                const std::filesystem::path& run_dir, const std::vector<std::string>& task_names) {
    const ModelConfig mc = model_config_for(config, data);
    AsmModel model(mc, model_seed(config.train.seed));
    FitOptions options;
    options.run_dir = run_dir;
    options.experiment = to_key_values(config);
    options.task_names = task_names;
    ExperimentResult result;
    result.record = fit(model, data, config.train, options);
    result.test = evaluate(model, data, Split::Test, config.train.batch_eval);
    return result;
}

std::string to_string(AblationAxis axis) {
    switch (axis) {
        case AblationAxis::Blocks: return "blocks";
        case AblationAxis::Ratio: return "ratio";
        case AblationAxis::Gca: return "gca";
    }
    return "?";
}

AblationAxis parse_ablation_axis(const std::string& text) {
    if (text == "blocks") return AblationAxis::Blocks;
    if (text == "ratio") return AblationAxis::Ratio;
    if (text == "gca") return AblationAxis::Gca;
    throw std::invalid_argument("unknown ablation axis '" + text + "' (blocks, ratio, gca)");
}

namespace {

void accumulate(Metrics& into, const Metrics& m, double w) {
    into.acc += w * m.acc;
    into.macro_f1 += w * m.macro_f1;
    into.weighted_f1 += w * m.weighted_f1;
}

}  // namespace

std::vector<AblationRow> run_ablation(const AblationGrid& grid, const WindowedDataset& data, std::ostream* progress) {
    if (grid.values.empty()) throw std::invalid_argument("ablation grid has no values");
    if (grid.seeds.empty()) throw std::invalid_argument("ablation grid has no seeds");
    std::vector<AblationRow> rows;
    for (double value : grid.values) {
        ExperimentConfig cfg = grid.base;
        switch (grid.axis) {
            case AblationAxis::Blocks:
                if (value < 1 || value != std::floor(value))
                    throw std::invalid_argument("block count must be a positive integer");
                cfg.blocks = static_cast<std::size_t>(value);
                cfg.architecture = Architecture::Asm;
                break;
            case AblationAxis::Ratio:
                if (!(value > 0.0)) throw std::invalid_argument("unlabeled ratio must be > 0");
                cfg.unlabeled_ratio = value;
                break;
            case AblationAxis::Gca:
                if (value != 0.0 && value != 1.0) throw std::invalid_argument("gca axis values are 0 or 1");
                if (value == 0.0) cfg.train.lambda = 0.0;
                break;
        }
        std::vector<Metrics> runs;
        for (auto seed : grid.seeds) {
            cfg.train.seed = seed;
            const WindowedDataset run_data = apply_unlabeled_ratio(data, cfg, seed);
            const ExperimentResult r = run_experiment(cfg, run_data);
            runs.push_back(r.test.mean);
            if (progress)
                *progress << to_string(grid.axis) << '=' << format_double(value) << " seed=" << seed
                          << " test_macro_f1=" << format_double(r.test.mean.macro_f1) << '\n';
        }
        AblationRow row;
        row.axis = to_string(grid.axis);
        row.value = value;
        row.seed_count = runs.size();
        const double n = static_cast<double>(runs.size());
        for (const auto& m : runs) accumulate(row.mean, m, 1.0 / n);
        if (runs.size() > 1) {
            for (const auto& m : runs) {
                row.std.acc += (m.acc - row.mean.acc) * (m.acc - row.mean.acc);
                row.std.macro_f1 += (m.macro_f1 - row.mean.macro_f1) * (m.macro_f1 - row.mean.macro_f1);
                row.std.weighted_f1 += (m.weighted_f1 - row.mean.weighted_f1) * (m.weighted_f1 - row.mean.weighted_f1);
            }
            row.std.acc = std::sqrt(row.std.acc / (n - 1));
            row.std.macro_f1 = std::sqrt(row.std.macro_f1 / (n - 1));
            row.std.weighted_f1 = std::sqrt(row.std.weighted_f1 / (n - 1));
        }
        rows.push_back(row);
    }
    return rows;
}

void write_ablation_csv(std::ostream& out, const std::vector<AblationRow>& rows) {
    out << kAblationCsvHeader << '\n';
    for (const auto& r : rows)
        out << r.axis << ',' << format_double(r.value) << ',' << r.seed_count << ',' << format_double(r.mean.acc) << ','
            << format_double(r.std.acc) << ',' << format_double(r.mean.macro_f1) << ','
            << format_double(r.std.macro_f1) << ',' << format_double(r.mean.weighted_f1) << ','
            << format_double(r.std.weighted_f1) << '\n';
}

}  // namespace asm2tv
