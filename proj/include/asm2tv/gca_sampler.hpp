#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "asm2tv/data.hpp"
#include "asm2tv/rng.hpp"

namespace asm2tv {

/// Consecutive windows of one unlabeled run, as indices into the task's
/// unlabeled WindowSet.
using Fragment = std::vector<std::size_t>;

struct TaskFragments {
    const WindowSet* windows = nullptr;
    std::vector<Fragment> fragments;
};

/// Per-task fragmented unlabeled series. Holds pointers into the windowed
/// dataset it was built from, which must outlive it.
struct FragmentStore {
    std::size_t fragment_length = 0;
    std::vector<TaskFragments> tasks;

    std::size_t fragment_count(std::size_t task) const { return tasks.at(task).fragments.size(); }
};

/// Groups window start rows into fragments of `fragment_length` consecutive
/// windows. A new run starts wherever consecutive starts are not exactly
/// `stride` apart; the trailing partial fragment of each run is dropped.
std::vector<Fragment> group_fragments(std::span<const std::size_t> start_rows, std::size_t stride,
                                      std::size_t fragment_length);

FragmentStore build_fragments(const WindowedDataset& data, std::size_t fragment_length);

/// Keeps a seeded choice of whole fragments per task so the unlabeled split
/// holds at least ratio x (labeled windows), and never fewer than three
/// fragments. Throws when a task cannot supply that many.
void limit_unlabeled(WindowedDataset& data, double ratio, std::size_t fragment_length, Rng& rng);

struct GcaTaskSample {
    std::size_t internal_fragment = 0;
    std::size_t reference = 0;                 ///< window index
    std::vector<std::size_t> internal;         ///< K window indices
    std::array<std::size_t, 2> external{};     ///< earlier, later window indices
    std::array<std::size_t, 2> external_fragment{};
};

struct GcaSample {
    std::vector<GcaTaskSample> tasks;
};

/// Internal fragment uniform over [1, F-2]; reference and K internal windows
/// uniform with replacement inside it; one external window from a uniform
/// earlier fragment and one from a uniform later fragment.
GcaSample draw_gca_sample(const FragmentStore& store, std::size_t K, Rng& rng);
GcaSample draw_gca_sample(const FragmentStore& store, std::size_t K, std::uint64_t seed);

/// Draws `batch` independent samples per task for one training step.
std::vector<GcaSample> draw_gca_batch(const FragmentStore& store, std::size_t K, std::size_t batch, Rng& rng);

}  // namespace asm2tv
