#include "asm2tv/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "asm2tv/format.hpp"
#include "json.hpp"

namespace asm2tv {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

// ---------------------------------------------------------------- manifest

std::string DatasetManifest::to_json() const {
    json j;
    j["name"] = name;
    j["sample_rate_hz"] = sample_rate_hz;
    j["label_column"] = label_column;
    j["classes"] = classes;
    j["tasks"] = json::array();
    for (const auto& t : tasks) j["tasks"].push_back({{"id", t}});
    j["views"] = json::array();
    for (const auto& v : views) j["views"].push_back({{"id", v.id}, {"channels", v.channels}});
    j["files"] = json::object();
    for (const auto& t : tasks) {
        json per_view = json::object();
        for (const auto& v : views) per_view[v.id] = files.at(t).at(v.id);
        j["files"][t] = per_view;
    }
    return j.dump(2) + "\n";
}

void DatasetManifest::save(const fs::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ArtifactError("cannot write manifest " + path.string());
    out << to_json();
}

DatasetManifest DatasetManifest::load(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ArtifactError("cannot open manifest " + path.string());
    DatasetManifest m;
    try {
        const json j = json::parse(in);
        m.name = j.value("name", std::string{});
        m.sample_rate_hz = j.at("sample_rate_hz").get<double>();
        m.label_column = j.value("label_column", std::string("label"));
        m.classes = j.at("classes").get<std::vector<std::string>>();
        for (const auto& t : j.at("tasks")) m.tasks.push_back(t.at("id").get<std::string>());
        for (const auto& v : j.at("views"))
            m.views.push_back({v.at("id").get<std::string>(), v.at("channels").get<std::size_t>()});
        for (const auto& [task, per_view] : j.at("files").items())
            for (const auto& [view, file] : per_view.items()) m.files[task][view] = file.get<std::string>();
    } catch (const json::exception& e) {
        throw ArtifactError("malformed manifest " + path.string() + ": " + e.what());
    }
    m.base_dir = path.parent_path();
    m.validate();
    return m;
}

void DatasetManifest::validate() const {
    if (tasks.empty() || views.empty()) throw ArtifactError("manifest: needs at least one task and one view");
    if (classes.size() < 2) throw ArtifactError("manifest: needs at least two classes");
    if (!(sample_rate_hz > 0.0)) throw ArtifactError("manifest: sample_rate_hz must be positive");
    for (const auto& t : tasks)
        for (const auto& v : views) {
            auto it = files.find(t);
            if (it == files.end() || !it->second.contains(v.id))
                throw ArtifactError("manifest: task '" + t + "' is missing view '" + v.id + "'");
        }
}

fs::path DatasetManifest::file_for(std::size_t task, std::size_t view) const {
    return base_dir / files.at(tasks.at(task)).at(views.at(view).id);
}

// ---------------------------------------------------------------- csv

namespace {

std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

std::string_view strip_cr(std::string_view s) {
    if (!s.empty() && s.back() == '\r') s.remove_suffix(1);
    return s;
}

}  // namespace

SeriesFile read_series_csv(const fs::path& path, const std::string& label_column) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ArtifactError("cannot open series file " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw ArtifactError(path.string() + ": empty file");
    const auto header = split_commas(strip_cr(line));
    if (header.size() < 2 || header.front() != "ts_ms")
        throw ArtifactError(path.string() + ": first column must be ts_ms");
    if (header.back() != label_column)
        throw ArtifactError(path.string() + ": label column '" + label_column + "' absent");
    SeriesFile file;
    for (std::size_t i = 1; i + 1 < header.size(); ++i) file.channel_names.emplace_back(header[i]);
    const std::size_t channels = file.channel_names.size();

    std::size_t line_no = 1;
    try {
        while (std::getline(in, line)) {
            ++line_no;
            const auto row = strip_cr(line);
            if (row.empty()) continue;
            const auto cells = split_commas(row);
            if (cells.size() != channels + 2) throw ArtifactError("wrong column count");
            const auto ts = parse_int(cells[0]);
            if (!file.ts_ms.empty() && ts <= file.ts_ms.back()) throw ArtifactError("timestamps not strictly increasing");
            file.ts_ms.push_back(ts);
            std::vector<double> values(channels);
            for (std::size_t c = 0; c < channels; ++c) values[c] = parse_double(cells[c + 1]);
            file.channels.push_back(std::move(values));
            file.labels.push_back(static_cast<int>(parse_int(cells.back())));
        }
    } catch (const std::exception& e) {
        throw ArtifactError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    return file;
}

void write_series_csv(const fs::path& path, const SeriesFile& file, const std::string& label_column) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ArtifactError("cannot write " + path.string());
    out << "ts_ms";
    for (const auto& c : file.channel_names) out << ',' << c;
    out << ',' << label_column << '\n';
    std::string buf;
    for (std::size_t r = 0; r < file.ts_ms.size(); ++r) {
        buf = std::to_string(file.ts_ms[r]);
        for (double v : file.channels[r]) {
            buf += ',';
            buf += format_double(v);
        }
        buf += ',';
        buf += std::to_string(file.labels[r]);
        buf += '\n';
        out << buf;
    }
}

// ---------------------------------------------------------------- ingest

RawDataset ingest(const DatasetManifest& manifest) {
    manifest.validate();
    RawDataset raw;
    raw.manifest = manifest;
    const std::size_t V = manifest.views.size();
    const int classes = static_cast<int>(manifest.classes.size());
    for (std::size_t t = 0; t < manifest.tasks.size(); ++t) {
        std::vector<SeriesFile> files;
        for (std::size_t v = 0; v < V; ++v) {
            files.push_back(read_series_csv(manifest.file_for(t, v), manifest.label_column));
            if (files.back().channel_names.size() != manifest.views[v].channels)
                throw ArtifactError(manifest.file_for(t, v).string() + ": expected " +
                                    std::to_string(manifest.views[v].channels) + " channels");
        }
        // Inner join on timestamps: walk all sorted files in lockstep.
        TaskSeries series;
        series.views.resize(V);
        std::vector<std::size_t> pos(V, 0);
        std::size_t total_rows = 0;
        for (const auto& f : files) total_rows += f.ts_ms.size();
        while (true) {
            bool done = false;
            std::int64_t hi = std::numeric_limits<std::int64_t>::min();
            for (std::size_t v = 0; v < V; ++v) {
                if (pos[v] >= files[v].ts_ms.size()) {
                    done = true;
                    break;
                }
                hi = std::max(hi, files[v].ts_ms[pos[v]]);
            }
            if (done) break;
            bool aligned = true;
            for (std::size_t v = 0; v < V; ++v) {
                while (pos[v] < files[v].ts_ms.size() && files[v].ts_ms[pos[v]] < hi) ++pos[v];
                if (pos[v] >= files[v].ts_ms.size() || files[v].ts_ms[pos[v]] != hi) aligned = false;
            }
            if (!aligned) continue;
            const int label = files[0].labels[pos[0]];
            if (label < 0 || label >= classes)
                throw ArtifactError("task '" + manifest.tasks[t] + "': label " + std::to_string(label) +
                                    " outside the class table");
            for (std::size_t v = 1; v < V; ++v)
                if (files[v].labels[pos[v]] != label)
                    throw ArtifactError("task '" + manifest.tasks[t] + "': views disagree on the label at ts " +
                                        std::to_string(hi));
            series.ts_ms.push_back(hi);
            series.labels.push_back(label);
            for (std::size_t v = 0; v < V; ++v) {
                const auto& row = files[v].channels[pos[v]];
                series.views[v].insert(series.views[v].end(), row.begin(), row.end());
                ++pos[v];
            }
        }
        series.dropped_rows = total_rows - V * series.rows();
        raw.tasks.push_back(std::move(series));
    }
    return raw;
}

void export_dataset(const RawDataset& data, const fs::path& dir) {
    fs::create_directories(dir);
    DatasetManifest m = data.manifest;
    m.files.clear();
    for (std::size_t t = 0; t < m.tasks.size(); ++t) {
        const auto& series = data.tasks.at(t);
        for (std::size_t v = 0; v < m.views.size(); ++v) {
            const std::size_t ch = m.views[v].channels;
            SeriesFile f;
            f.ts_ms = series.ts_ms;
            f.labels = series.labels;
            for (std::size_t c = 0; c < ch; ++c) f.channel_names.push_back("c" + std::to_string(c));
            f.channels.resize(series.rows());
            for (std::size_t r = 0; r < series.rows(); ++r)
                f.channels[r].assign(series.views[v].begin() + r * ch, series.views[v].begin() + (r + 1) * ch);
            const std::string name = m.tasks[t] + "_" + m.views[v].id + ".csv";
            write_series_csv(dir / name, f, m.label_column);
            m.files[m.tasks[t]][m.views[v].id] = name;
        }
    }
    m.base_dir = dir;
    m.save(dir / "manifest.json");
}

// ---------------------------------------------------------------- split

const char* to_string(Split s) {
    switch (s) {
        case Split::Labeled: return "labeled";
        case Split::Unlabeled: return "unlabeled";
        case Split::Validation: return "validation";
        case Split::Test: return "test";
        case Split::Excluded: return "excluded";
    }
    return "?";
}

std::vector<Split> chrono_split(std::span<const int> labels, std::vector<std::string>* warnings) {
    std::vector<Split> tags(labels.size(), Split::Excluded);
    std::map<int, std::vector<std::size_t>> rows_by_label;
    for (std::size_t r = 0; r < labels.size(); ++r) rows_by_label[labels[r]].push_back(r);
    for (const auto& [label, rows] : rows_by_label) {
        const std::size_t n = rows.size();
        const std::size_t labeled = n / 10, unlabeled = n * 4 / 10, validation = n / 10;
        const std::size_t test = n - labeled - unlabeled - validation;
        if (labeled == 0 || unlabeled == 0 || validation == 0 || test == 0) {
            if (warnings)
                warnings->push_back("activity " + std::to_string(label) + " has only " + std::to_string(n) +
                                    " rows; excluded from the split");
            continue;
        }
        std::size_t i = 0;
        for (; i < labeled; ++i) tags[rows[i]] = Split::Labeled;
        for (; i < labeled + unlabeled; ++i) tags[rows[i]] = Split::Unlabeled;
        for (; i < labeled + unlabeled + validation; ++i) tags[rows[i]] = Split::Validation;
        for (; i < n; ++i) tags[rows[i]] = Split::Test;
    }
    return tags;
}

std::vector<std::size_t> window_offsets(std::span<const int> labels, std::span<const Split> tags, std::size_t length,
                                        std::size_t stride) {
    if (length == 0 || stride == 0) throw std::invalid_argument("window length and stride must be >= 1");
    if (labels.size() != tags.size()) throw ShapeError("window_offsets: labels and tags differ in length");
    if (length > labels.size())
        throw std::invalid_argument("window length " + std::to_string(length) + " exceeds series length " +
                                    std::to_string(labels.size()));
    std::vector<std::size_t> out;
    for (std::size_t off = 0; off + length <= labels.size(); off += stride) {
        if (tags[off] == Split::Excluded) continue;
        bool pure = true;
        for (std::size_t r = off + 1; r < off + length && pure; ++r)
            pure = labels[r] == labels[off] && tags[r] == tags[off];
        if (pure) out.push_back(off);
    }
    return out;
}

// ---------------------------------------------------------------- windows

WindowSet WindowSet::subset(std::span<const std::size_t> indices) const {
    WindowSet out;
    out.input_dims = input_dims;
    out.views.resize(views.size());
    for (auto i : indices) out.append(*this, i);
    return out;
}

void WindowSet::append(const WindowSet& other, std::size_t i) {
    if (input_dims.empty()) {
        input_dims = other.input_dims;
        views.resize(other.views.size());
    }
    for (std::size_t v = 0; v < views.size(); ++v) {
        const auto w = other.window(v, i);
        views[v].insert(views[v].end(), w.begin(), w.end());
    }
    labels.push_back(other.labels[i]);
    start_rows.push_back(other.start_rows[i]);
    start_ts.push_back(other.start_ts[i]);
}

std::vector<Tensor> WindowSet::gather(std::span<const std::size_t> indices) const {
    std::vector<Tensor> out;
    for (std::size_t v = 0; v < views.size(); ++v) {
        const std::size_t dim = input_dims[v];
        std::vector<double> buf;
        buf.reserve(indices.size() * dim);
        for (auto i : indices) {
            const auto w = window(v, i);
            buf.insert(buf.end(), w.begin(), w.end());
        }
        out.push_back(Tensor::from({indices.size(), dim}, std::move(buf)));
    }
    return out;
}

const WindowSet& TaskWindows::part(Split s) const {
    switch (s) {
        case Split::Labeled: return labeled;
        case Split::Unlabeled: return unlabeled;
        case Split::Validation: return validation;
        case Split::Test: return test;
        default: throw std::invalid_argument("no window set for excluded rows");
    }
}

TaskWindows make_windows(const TaskSeries& series, std::span<const Split> tags, std::size_t length,
                         std::size_t stride) {
    const std::size_t V = series.views.size();
    std::vector<std::size_t> dims(V), channels(V);
    for (std::size_t v = 0; v < V; ++v) {
        channels[v] = series.rows() ? series.views[v].size() / series.rows() : 0;
        dims[v] = channels[v] * length;
    }
    TaskWindows out;
    for (auto* set : {&out.labeled, &out.unlabeled, &out.validation, &out.test}) {
        set->input_dims = dims;
        set->views.resize(V);
    }
    for (auto off : window_offsets(series.labels, tags, length, stride)) {
        WindowSet& set = tags[off] == Split::Labeled     ? out.labeled
                         : tags[off] == Split::Unlabeled ? out.unlabeled
                         : tags[off] == Split::Validation ? out.validation
                                                          : out.test;
        for (std::size_t v = 0; v < V; ++v) {
            const auto first = series.views[v].begin() + static_cast<std::ptrdiff_t>(off * channels[v]);
            set.views[v].insert(set.views[v].end(), first, first + static_cast<std::ptrdiff_t>(dims[v]));
        }
        set.labels.push_back(series.labels[off]);
        set.start_rows.push_back(off);
        set.start_ts.push_back(series.ts_ms[off]);
    }
    return out;
}

WindowedDataset build_windowed_dataset(const RawDataset& raw, std::size_t window_length, std::size_t stride) {
    WindowedDataset ds;
    if (window_length == 0)
        window_length = static_cast<std::size_t>(std::llround(5.0 * raw.manifest.sample_rate_hz));
    if (stride == 0) stride = window_length;
    ds.window_length = window_length;
    ds.stride = stride;
    for (const auto& v : raw.manifest.views) ds.input_dims.push_back(v.channels * window_length);
    ds.classes.assign(raw.manifest.tasks.size(), raw.manifest.classes.size());
    for (std::size_t t = 0; t < raw.tasks.size(); ++t) {
        std::vector<std::string> warnings;
        const auto tags = chrono_split(raw.tasks[t].labels, &warnings);
        for (auto& w : warnings) ds.warnings.push_back("task '" + raw.manifest.tasks[t] + "': " + w);
        ds.tasks.push_back(make_windows(raw.tasks[t], tags, window_length, stride));
    }
    return ds;
}

WindowSet upsample(const WindowSet& windows, std::size_t classes, Rng& rng) {
    std::vector<std::vector<std::size_t>> by_class(classes);
    for (std::size_t i = 0; i < windows.size(); ++i) {
        const int y = windows.labels[i];
        if (y < 0 || static_cast<std::size_t>(y) >= classes) throw std::out_of_range("upsample: label out of range");
        by_class[static_cast<std::size_t>(y)].push_back(i);
    }
    std::size_t majority = 0;
    for (std::size_t c = 0; c < classes; ++c) {
        if (by_class[c].empty()) throw std::invalid_argument("upsample: class " + std::to_string(c) + " has no windows");
        majority = std::max(majority, by_class[c].size());
    }
    std::vector<std::size_t> order(windows.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (std::size_t c = 0; c < classes; ++c)
        for (std::size_t k = by_class[c].size(); k < majority; ++k)
            order.push_back(by_class[c][uniform_index(rng, by_class[c].size())]);
    return windows.subset(order);
}

}  // namespace asm2tv
