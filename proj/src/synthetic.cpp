#include "asm2tv/synthetic.hpp"

#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace asm2tv {

std::vector<std::size_t> SyntheticSpec::resolved_groups() const {
    if (!view_groups.empty()) return view_groups;
    std::vector<std::size_t> g(views);
    for (std::size_t v = 0; v < views; ++v) g[v] = v * groups / views;
    return g;
}

void SyntheticSpec::validate() const {
    auto fail = [](const std::string& what) { throw std::invalid_argument("synthetic spec: " + what); };
    if (tasks == 0 || views == 0 || groups == 0) fail("tasks, views and groups must be >= 1");
    if (groups > views) fail("more groups than views");
    if (classes < 2) fail("need at least 2 classes");
    if (channels == 0 || window_length == 0 || samples_per_class == 0) fail("sizes must be positive");
    if (noise < 0.0) fail("noise must be >= 0");
    if (!(sample_rate_hz > 0.0)) fail("sample rate must be positive");
    const auto g = resolved_groups();
    if (g.size() != views) fail("need one group per view");
    std::vector<bool> hit(groups, false);
    for (auto x : g) {
        if (x >= groups) fail("group index out of range");
        hit[x] = true;
    }
    for (bool h : hit)
        if (!h) fail("group assignment must cover every group");
}

namespace {

struct ClassWave {
    double f1, f2;  // cycles per window
    double a1, a2;
    double p1, p2;
};

}  // namespace

RawDataset generate_synthetic(const SyntheticSpec& spec) {
    spec.validate();
    const auto groups = spec.resolved_groups();
    const std::size_t G = spec.groups, C = spec.classes, w = spec.window_length;
    const double two_pi = 2.0 * std::numbers::pi;

    Rng table_rng(derive_seed(spec.seed, 1));
    std::vector<std::vector<ClassWave>> waves(G, std::vector<ClassWave>(C));
    for (auto& per_group : waves)
        for (auto& cw : per_group)
            cw = {uniform(table_rng, 0.5, 4.0), uniform(table_rng, 0.5, 4.0), uniform(table_rng, 0.6, 1.4),
                  uniform(table_rng, 0.6, 1.4), uniform(table_rng, 0.0, two_pi), uniform(table_rng, 0.0, two_pi)};

    std::vector<std::vector<double>> gains(spec.views, std::vector<double>(spec.channels, 1.0));
    if (!spec.identity_maps) {
        Rng gain_rng(derive_seed(spec.seed, 2));
        for (auto& per_view : gains)
            for (auto& g : per_view) g = (uniform01(gain_rng) < 0.5 ? -1.0 : 1.0) * uniform(gain_rng, 0.5, 1.5);
    }

    RawDataset raw;
    auto& m = raw.manifest;
    m.name = "synthetic";
    m.sample_rate_hz = spec.sample_rate_hz;
    for (std::size_t c = 0; c < C; ++c) m.classes.push_back("a" + std::to_string(c));
    for (std::size_t t = 0; t < spec.tasks; ++t) m.tasks.push_back("s" + std::to_string(t));
    for (std::size_t v = 0; v < spec.views; ++v) m.views.push_back({"v" + std::to_string(v), spec.channels});
    for (const auto& t : m.tasks)
        for (const auto& v : m.views) m.files[t][v.id] = t + "_" + v.id + ".csv";

    const double dt_ms = 1000.0 / spec.sample_rate_hz;
    const std::size_t rows = C * spec.samples_per_class;
    for (std::size_t t = 0; t < spec.tasks; ++t) {
        Rng task_rng(derive_seed(spec.seed, 100 + t));
        std::vector<std::size_t> order(C);
        std::iota(order.begin(), order.end(), 0);
        for (std::size_t i = C; i > 1; --i) std::swap(order[i - 1], order[uniform_index(task_rng, i)]);
        std::vector<double> spread(G);
        for (auto& s : spread) s = 1.0 + spec.task_spread * uniform(task_rng, -1.0, 1.0);

        TaskSeries series;
        series.ts_ms.resize(rows);
        series.labels.resize(rows);
        for (std::size_t r = 0; r < rows; ++r) {
            series.ts_ms[r] = static_cast<std::int64_t>(std::llround(static_cast<double>(r) * dt_ms));
            series.labels[r] = static_cast<int>(order[r / spec.samples_per_class]);
        }

        // Group latents: one jitter draw per window, shared by the group's views.
        std::vector<std::vector<double>> latent(G, std::vector<double>(rows));
        for (std::size_t g = 0; g < G; ++g) {
            Rng jitter_rng(derive_seed(spec.seed, 1000 + t * G + g));
            double phase = 0.0, amp = 1.0;
            for (std::size_t r = 0; r < rows; ++r) {
                if (r % w == 0) {
                    phase = uniform(jitter_rng, -spec.phase_jitter, spec.phase_jitter);
                    amp = 1.0 + 0.1 * normal(jitter_rng);
                }
                const std::size_t c = static_cast<std::size_t>(series.labels[r]);
                const double progress =
                    static_cast<double>(r % spec.samples_per_class) / static_cast<double>(spec.samples_per_class);
                const double stretch = spread[g] * (1.0 + spec.drift * progress);
                const double tau = static_cast<double>(r % w) / static_cast<double>(w);
                const auto& cw = waves[g][c];
                latent[g][r] = amp * (cw.a1 * std::sin(two_pi * cw.f1 * stretch * tau + cw.p1 + phase) +
                                      cw.a2 * std::sin(two_pi * cw.f2 * stretch * tau + cw.p2 + phase));
            }
        }

        series.views.resize(spec.views);
        for (std::size_t v = 0; v < spec.views; ++v) {
            Rng noise_rng(derive_seed(spec.seed, 100000 + t * spec.views + v));
            auto& out = series.views[v];
            out.resize(rows * spec.channels);
            const auto& lat = latent[groups[v]];
            for (std::size_t r = 0; r < rows; ++r)
                for (std::size_t ch = 0; ch < spec.channels; ++ch) {
                    const double eps = spec.noise > 0.0 ? spec.noise * normal(noise_rng) : 0.0;
                    out[r * spec.channels + ch] = gains[v][ch] * lat[r] + eps;
                }
        }
        raw.tasks.push_back(std::move(series));
    }
    return raw;
}

void write_synthetic(const SyntheticSpec& spec, const std::filesystem::path& dir) {
    export_dataset(generate_synthetic(spec), dir);
}

}  // namespace asm2tv
