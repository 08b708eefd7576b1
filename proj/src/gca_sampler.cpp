#include "asm2tv/gca_sampler.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace asm2tv {

std::vector<Fragment> group_fragments(std::span<const std::size_t> start_rows, std::size_t stride,
                                      std::size_t fragment_length) {
    if (fragment_length < 2) throw std::invalid_argument("fragment length must be at least 2 windows");
    if (stride == 0) throw std::invalid_argument("stride must be positive");
    std::vector<Fragment> out;
    Fragment current;
    for (std::size_t i = 0; i < start_rows.size(); ++i) {
        if (i > 0 && start_rows[i] != start_rows[i - 1] + stride) current.clear();
        current.push_back(i);
        if (current.size() == fragment_length) {
            out.push_back(std::move(current));
            current.clear();
        }
    }
    return out;
}

FragmentStore build_fragments(const WindowedDataset& data, std::size_t fragment_length) {
    FragmentStore store;
    store.fragment_length = fragment_length;
    for (const auto& task : data.tasks) {
        const auto& u = task.unlabeled;
        for (std::size_t v = 0; v < u.views.size(); ++v)
            if (u.views[v].size() != u.size() * u.input_dims.at(v))
                throw std::invalid_argument("unlabeled views are misaligned");
        store.tasks.push_back({&u, group_fragments(u.start_rows, data.stride, fragment_length)});
    }
    return store;
}

void limit_unlabeled(WindowedDataset& data, double ratio, std::size_t fragment_length, Rng& rng) {
    if (!(ratio > 0.0)) throw std::invalid_argument("unlabeled ratio must be > 0");
    for (std::size_t t = 0; t < data.tasks.size(); ++t) {
        auto& task = data.tasks[t];
        const auto frags = group_fragments(task.unlabeled.start_rows, data.stride, fragment_length);
        const double wanted_windows = std::ceil(ratio * static_cast<double>(task.labeled.size()));
        const auto wanted = std::max<std::size_t>(
            3, static_cast<std::size_t>(std::ceil(wanted_windows / static_cast<double>(fragment_length))));
        if (wanted > frags.size())
            throw std::invalid_argument("task " + std::to_string(t) + ": unlabeled ratio " + std::to_string(ratio) +
                                        " needs " + std::to_string(wanted) + " fragments, only " +
                                        std::to_string(frags.size()) + " available");
        std::vector<std::size_t> order(frags.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);
        order.resize(wanted);
        std::sort(order.begin(), order.end());
        std::vector<std::size_t> keep;
        for (auto f : order) keep.insert(keep.end(), frags[f].begin(), frags[f].end());
        task.unlabeled = task.unlabeled.subset(keep);
    }
}

GcaSample draw_gca_sample(const FragmentStore& store, std::size_t K, Rng& rng) {
    if (K == 0) throw std::invalid_argument("adaption steps must be >= 1");
    GcaSample sample;
    for (std::size_t t = 0; t < store.tasks.size(); ++t) {
        const auto& frags = store.tasks[t].fragments;
        const std::size_t F = frags.size();
        if (F < 3)
            throw std::invalid_argument("task " + std::to_string(t) + " has " + std::to_string(F) +
                                        " fragments; GCA needs at least 3");
        GcaTaskSample s;
        s.internal_fragment = 1 + uniform_index(rng, F - 2);
        const auto& inner = frags[s.internal_fragment];
        s.reference = inner[uniform_index(rng, inner.size())];
        s.internal.resize(K);
        for (auto& k : s.internal) k = inner[uniform_index(rng, inner.size())];
        s.external_fragment[0] = uniform_index(rng, s.internal_fragment);
        s.external_fragment[1] = s.internal_fragment + 1 + uniform_index(rng, F - s.internal_fragment - 1);
        for (std::size_t i = 0; i < 2; ++i) {
            const auto& f = frags[s.external_fragment[i]];
            s.external[i] = f[uniform_index(rng, f.size())];
        }
        sample.tasks.push_back(std::move(s));
    }
    return sample;
}

GcaSample draw_gca_sample(const FragmentStore& store, std::size_t K, std::uint64_t seed) {
    Rng rng(seed);
    return draw_gca_sample(store, K, rng);
}

std::vector<GcaSample> draw_gca_batch(const FragmentStore& store, std::size_t K, std::size_t batch, Rng& rng) {
    std::vector<GcaSample> out;
    out.reserve(batch);
    for (std::size_t b = 0; b < batch; ++b) out.push_back(draw_gca_sample(store, K, rng));
    return out;
}

}  // namespace asm2tv
