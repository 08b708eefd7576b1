#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "asm2tv/rng.hpp"
#include "asm2tv/tensor.hpp"

namespace asm2tv {

/// Missing or malformed dataset / checkpoint files.
class ArtifactError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ViewInfo {
    std::string id;
    std::size_t channels = 0;
};

/// JSON dataset description:
///   { "name", "sample_rate_hz", "label_column", "classes": [..],
///     "tasks": [{"id": ..}], "views": [{"id": .., "channels": ..}],
///     "files": { task_id: { view_id: "relative/path.csv" } } }
/// Paths are resolved against the manifest's directory.
struct DatasetManifest {
    std::string name;
    double sample_rate_hz = 50.0;
    std::string label_column = "label";
    std::vector<std::string> classes;
    std::vector<std::string> tasks;
    std::vector<ViewInfo> views;
    std::map<std::string, std::map<std::string, std::string>> files;
    std::filesystem::path base_dir;

    static DatasetManifest load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;
    std::string to_json() const;
    std::filesystem::path file_for(std::size_t task, std::size_t view) const;
    void validate() const;
};

/// Time-aligned multi-view series of one task.
struct TaskSeries {
    std::vector<std::int64_t> ts_ms;
    std::vector<int> labels;
    std::vector<std::vector<double>> views;  ///< per view, rows x channels, row-major
    std::size_t dropped_rows = 0;            ///< rows lost to the inner timestamp join

    std::size_t rows() const { return ts_ms.size(); }
};

struct RawDataset {
    DatasetManifest manifest;
    std::vector<TaskSeries> tasks;
};

struct SeriesFile {
    std::vector<std::int64_t> ts_ms;
    std::vector<std::vector<double>> channels;  ///< per row
    std::vector<int> labels;
    std::vector<std::string> channel_names;
};

/// Reads `ts_ms,<channels...>,<label_column>`; timestamps must strictly increase.
SeriesFile read_series_csv(const std::filesystem::path& path, const std::string& label_column = "label");
void write_series_csv(const std::filesystem::path& path, const SeriesFile& file, const std::string& label_column = "label");

/// Loads every (task, view) file and inner-joins views of a task on timestamp.
RawDataset ingest(const DatasetManifest& manifest);
/// Writes one CSV per (task, view) plus manifest.json into `dir`.
void export_dataset(const RawDataset& data, const std::filesystem::path& dir);

enum class Split : std::uint8_t { Labeled, Unlabeled, Validation, Test, Excluded };
const char* to_string(Split s);

/// Chronological 10/40/10/40 partition of each activity's rows (floors,
/// remainder to test). Activities too short for a nonempty part are tagged
/// Excluded and reported in `warnings`.
std::vector<Split> chrono_split(std::span<const int> labels, std::vector<std::string>* warnings = nullptr);

/// Row offsets 0, s, 2s, ... whose w rows share one label and one split tag.
std::vector<std::size_t> window_offsets(std::span<const int> labels, std::span<const Split> tags,
                                        std::size_t length, std::size_t stride);

/// Flattened windows of every view; view v row i has input_dims[v] values.
struct WindowSet {
    std::vector<std::size_t> input_dims;
    std::vector<std::vector<double>> views;
    std::vector<int> labels;
    std::vector<std::size_t> start_rows;
    std::vector<std::int64_t> start_ts;

    std::size_t size() const { return labels.size(); }
    bool empty() const { return labels.empty(); }
    std::span<const double> window(std::size_t view, std::size_t i) const {
        return std::span<const double>(views[view]).subspan(i * input_dims[view], input_dims[view]);
    }
    WindowSet subset(std::span<const std::size_t> indices) const;
    void append(const WindowSet& other, std::size_t index);
    /// One (B, dim_v) tensor per view for the chosen windows.
    std::vector<Tensor> gather(std::span<const std::size_t> indices) const;
};

struct TaskWindows {
    WindowSet labeled;
    WindowSet unlabeled;
    WindowSet validation;
    WindowSet test;

    const WindowSet& part(Split s) const;
};

struct WindowedDataset {
    std::size_t window_length = 0;
    std::size_t stride = 0;
    std::vector<std::size_t> input_dims;
    std::vector<std::size_t> classes;
    std::vector<TaskWindows> tasks;
    std::vector<std::string> warnings;
};

/// Cuts windows from one task's series given its split tags.
TaskWindows make_windows(const TaskSeries& series, std::span<const Split> tags, std::size_t length,
                         std::size_t stride);

/// Split + window every task. window_length 0 means 5 seconds at the
/// manifest sample rate; stride 0 means non-overlapping.
WindowedDataset build_windowed_dataset(const RawDataset& raw, std::size_t window_length, std::size_t stride);

/// Resamples minority classes with replacement until every class matches the
/// majority count. Original windows keep their order; duplicates follow.
WindowSet upsample(const WindowSet& windows, std::size_t classes, Rng& rng);

}  // namespace asm2tv
