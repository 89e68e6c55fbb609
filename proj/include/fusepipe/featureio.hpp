#pragma once

// Feature CSV + manifest format, labeled dataset assembly and stratified
// train/test splitting.
//
// CSV layout: header `sample_id,label,f0,...,f{d-1}`, one row per sample,
// values printed with 17 significant digits. The label cell may be empty for
// unlabeled matrices. A sidecar `<file>.manifest.json` records model_tag,
// embed_dim, n and the sha256 of the CSV bytes.

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "fusepipe/error.hpp"
#include "fusepipe/hash.hpp"
#include "fusepipe/rng.hpp"

namespace fusepipe {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using Labels = std::vector<int>;

struct FeatureMatrix {
    std::vector<std::string> sample_ids;
    std::string model_tag;
    Matrix values;

    std::size_t rows() const noexcept { return static_cast<std::size_t>(values.rows()); }
    std::size_t cols() const noexcept { return static_cast<std::size_t>(values.cols()); }

    void validate() const {
        require(sample_ids.size() == rows(), ErrorCode::ShapeMismatch, "sample id count differs from row count");
        std::unordered_set<std::string> seen;
        for (const auto& id : sample_ids)
            require(seen.insert(id).second, ErrorCode::DuplicateSampleId, "duplicate sample id '" + id + "'");
        require(values.allFinite(), ErrorCode::NonFiniteValue, "feature matrix contains non-finite values");
    }

    FeatureMatrix subset(const std::vector<std::size_t>& indices) const {
        FeatureMatrix out;
        out.model_tag = model_tag;
        out.values.resize(static_cast<Eigen::Index>(indices.size()), values.cols());
        out.sample_ids.reserve(indices.size());
        for (std::size_t r = 0; r < indices.size(); ++r) {
            out.values.row(static_cast<Eigen::Index>(r)) = values.row(static_cast<Eigen::Index>(indices[r]));
            out.sample_ids.push_back(sample_ids[indices[r]]);
        }
        return out;
    }

    friend bool operator==(const FeatureMatrix& a, const FeatureMatrix& b) {
        return a.sample_ids == b.sample_ids && a.model_tag == b.model_tag && a.values.rows() == b.values.rows() &&
               a.values.cols() == b.values.cols() && a.values == b.values;
    }
};

struct LabeledDataset {
    FeatureMatrix features;
    Labels labels;
    std::vector<std::string> class_names;

    std::size_t rows() const noexcept { return features.rows(); }
    std::size_t cols() const noexcept { return features.cols(); }
    int num_classes() const noexcept { return static_cast<int>(class_names.size()); }
    const Matrix& X() const noexcept { return features.values; }

    std::vector<std::size_t> class_counts() const {
        std::vector<std::size_t> counts(class_names.size(), 0);
        for (int l : labels) ++counts[static_cast<std::size_t>(l)];
        return counts;
    }

    /// `require_all_classes` is false for subsets such as a single fold.
    void validate(bool require_all_classes = true) const {
        features.validate();
        require(labels.size() == rows(), ErrorCode::LengthMismatch, "label count differs from row count");
        for (int l : labels)
            require(l >= 0 && l < num_classes(), ErrorCode::LabelOutOfRange, "label outside class table");
        if (require_all_classes)
            for (std::size_t c = 0; c < class_names.size(); ++c)
                require(class_counts()[c] > 0, ErrorCode::TooFewSamples, "class '" + class_names[c] + "' has no samples");
    }

    LabeledDataset subset(const std::vector<std::size_t>& indices) const {
        LabeledDataset out;
        out.features = features.subset(indices);
        out.class_names = class_names;
        out.labels.reserve(indices.size());
        for (std::size_t i : indices) out.labels.push_back(labels[i]);
        return out;
    }

    LabeledDataset with_features(FeatureMatrix fm) const {
        require(fm.sample_ids == features.sample_ids, ErrorCode::RowMisalignment, "replacement features misaligned");
        LabeledDataset out;
        out.features = std::move(fm);
        out.labels = labels;
        out.class_names = class_names;
        return out;
    }
};

namespace detail {

inline std::string format_double(double v) {
    char buf[40];
    const int len = std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf, static_cast<std::size_t>(len));
}

inline std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            cells.push_back(line.substr(start));
            break;
        }
        cells.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return cells;
}

inline double parse_value(std::string_view cell, std::size_t line_no) {
    double v = 0.0;
    const char* begin = cell.data();
    const char* end = cell.data() + cell.size();
    if (begin != end && *begin == '+') ++begin;
    const auto [ptr, ec] = std::from_chars(begin, end, v);
    if (ec != std::errc() || ptr != end || !std::isfinite(v))
        fail(ErrorCode::NonFiniteValue,
             "line " + std::to_string(line_no) + ": '" + std::string(cell) + "' is not a finite number");
    return v;
}

inline bool all_integers(const std::vector<std::string>& names) {
    for (const auto& n : names) {
        long long v = 0;
        const auto [ptr, ec] = std::from_chars(n.data(), n.data() + n.size(), v);
        if (ec != std::errc() || ptr != n.data() + n.size()) return false;
    }
    return true;
}

} // namespace detail

/// Class table ordering: numeric when every label is an integer literal,
/// otherwise lexicographic.
inline std::vector<std::string> class_table(const std::vector<std::string>& raw_labels) {
    const std::set<std::string> unique(raw_labels.begin(), raw_labels.end());
    std::vector<std::string> names(unique.begin(), unique.end());
    if (detail::all_integers(names))
        std::sort(names.begin(), names.end(), [](const std::string& a, const std::string& b) {
            return std::stoll(a) < std::stoll(b);
        });
    return names;
}

struct FeatureCsv {
    FeatureMatrix matrix;
    std::vector<std::string> labels; // empty strings for unlabeled rows
};

inline std::filesystem::path manifest_path(const std::filesystem::path& csv) {
    return std::filesystem::path(csv.string() + ".manifest.json");
}

inline FeatureCsv parse_feature_csv(std::string_view text, std::string model_tag) {
    FeatureCsv out;
    out.matrix.model_tag = std::move(model_tag);
    std::size_t pos = 0;
    std::size_t line_no = 0;
    auto next_line = [&](std::string_view& line) {
        if (pos >= text.size()) return false;
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        line = text.substr(pos, end - pos);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        pos = end + 1;
        ++line_no;
        return true;
    };

    std::string_view header;
    if (!next_line(header)) fail(ErrorCode::MalformedHeader, "empty feature file");
    const auto columns = detail::split_commas(header);
    if (columns.size() < 2 || columns[0] != "sample_id" || columns[1] != "label")
        fail(ErrorCode::MalformedHeader, "header must start with sample_id,label");
    const std::size_t d = columns.size() - 2;
    for (std::size_t j = 0; j < d; ++j)
        if (columns[j + 2] != "f" + std::to_string(j))
            fail(ErrorCode::MalformedHeader, "feature column " + std::to_string(j) + " must be named f" + std::to_string(j));

    std::vector<double> data;
    std::string_view line;
    while (next_line(line)) {
        if (line.empty()) continue;
        const auto cells = detail::split_commas(line);
        if (cells.size() != d + 2)
            fail(ErrorCode::RaggedRow, "line " + std::to_string(line_no) + " has " + std::to_string(cells.size() - 2) +
                                           " values, header declares " + std::to_string(d));
        out.matrix.sample_ids.emplace_back(cells[0]);
        out.labels.emplace_back(cells[1]);
        for (std::size_t j = 0; j < d; ++j) data.push_back(detail::parse_value(cells[j + 2], line_no));
    }
    const auto n = static_cast<Eigen::Index>(out.matrix.sample_ids.size());
    out.matrix.values = Eigen::Map<const Matrix>(data.data(), n, static_cast<Eigen::Index>(d));
    out.matrix.validate();
    return out;
}

inline FeatureCsv read_feature_csv_with_labels(const std::filesystem::path& path) {
    const std::string text = read_file(path);
    std::string tag = path.stem().string();
    const auto mpath = manifest_path(path);
    std::optional<nlohmann::json> manifest;
    if (std::filesystem::exists(mpath)) {
        manifest = nlohmann::json::parse(read_file(mpath));
        tag = manifest->at("model_tag").get<std::string>();
    }
    FeatureCsv csv = parse_feature_csv(text, tag);
    if (manifest) {
        require(manifest->at("sha256").get<std::string>() == sha256_hex(text), ErrorCode::Io,
                "manifest hash mismatch for " + path.string());
        require(manifest->at("n").get<std::size_t>() == csv.matrix.rows() &&
                    manifest->at("embed_dim").get<std::size_t>() == csv.matrix.cols(),
                ErrorCode::ShapeMismatch, "manifest shape disagrees with " + path.string());
    }
    return csv;
}

inline FeatureMatrix read_feature_csv(const std::filesystem::path& path) {
    return read_feature_csv_with_labels(path).matrix;
}

inline std::string format_feature_csv(const FeatureMatrix& fm, const std::vector<std::string>* labels = nullptr) {
    fm.validate();
    require(!labels || labels->size() == fm.rows(), ErrorCode::LengthMismatch, "label count differs from row count");
    std::string out = "sample_id,label";
    for (std::size_t j = 0; j < fm.cols(); ++j) out += ",f" + std::to_string(j);
    out += '\n';
    for (std::size_t i = 0; i < fm.rows(); ++i) {
        const auto& id = fm.sample_ids[i];
        require(id.find_first_of(",\r\n") == std::string::npos, ErrorCode::MalformedHeader,
                "sample id '" + id + "' contains a separator");
        out += id;
        out += ',';
        if (labels) out += (*labels)[i];
        for (std::size_t j = 0; j < fm.cols(); ++j) {
            out += ',';
            out += detail::format_double(fm.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
        }
        out += '\n';
    }
    return out;
}

inline void write_manifest(const FeatureMatrix& fm, const std::filesystem::path& csv_path, const std::string& csv_bytes) {
    nlohmann::json m;
    m["model_tag"] = fm.model_tag;
    m["embed_dim"] = fm.cols();
    m["n"] = fm.rows();
    m["sha256"] = sha256_hex(csv_bytes);
    write_file(manifest_path(csv_path), m.dump(2) + "\n");
}

inline void write_feature_csv(const FeatureMatrix& fm, const std::filesystem::path& path,
                              const std::vector<std::string>* labels = nullptr) {
    const std::string bytes = format_feature_csv(fm, labels);
    write_file(path, bytes);
    write_manifest(fm, path, bytes);
}

inline LabeledDataset make_labeled(FeatureMatrix fm, const std::vector<std::string>& raw_labels) {
    require(raw_labels.size() == fm.rows(), ErrorCode::LengthMismatch, "label count differs from row count");
    for (std::size_t i = 0; i < raw_labels.size(); ++i)
        require(!raw_labels[i].empty(), ErrorCode::LabelOutOfRange, "sample '" + fm.sample_ids[i] + "' has no label");
    LabeledDataset ds;
    ds.class_names = class_table(raw_labels);
    std::map<std::string, int> index;
    for (std::size_t c = 0; c < ds.class_names.size(); ++c) index[ds.class_names[c]] = static_cast<int>(c);
    ds.labels.reserve(raw_labels.size());
    for (const auto& l : raw_labels) ds.labels.push_back(index.at(l));
    ds.features = std::move(fm);
    ds.validate();
    return ds;
}

inline LabeledDataset read_labeled_csv(const std::filesystem::path& path) {
    auto csv = read_feature_csv_with_labels(path);
    return make_labeled(std::move(csv.matrix), csv.labels);
}

inline void write_labeled_csv(const LabeledDataset& ds, const std::filesystem::path& path) {
    std::vector<std::string> raw;
    raw.reserve(ds.labels.size());
    for (int l : ds.labels) raw.push_back(ds.class_names[static_cast<std::size_t>(l)]);
    write_feature_csv(ds.features, path, &raw);
}

// ---------------------------------------------------------------------------
// Splitting

struct SplitSpec {
    double train_fraction = 0.8;
    std::uint64_t seed = 42;
    bool stratified = true;
};

struct SplitIndices {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

/// Augmented copies are named `<source>#<transform>`; all copies of one source
/// image stay on the same side of the split.
inline std::string_view source_group(std::string_view sample_id) {
    return sample_id.substr(0, sample_id.find('#'));
}

inline bool is_augmented(std::string_view sample_id) { return sample_id.find('#') != std::string_view::npos; }

/// Per class, floor(train_fraction * n_c) groups go to train; the shortfall
/// against floor(train_fraction * n) is handed to the classes with the largest
/// fractional remainders. Test keeps only non-augmented rows.
inline SplitIndices split_indices(const LabeledDataset& ds, const SplitSpec& spec) {
    require(spec.train_fraction > 0.0 && spec.train_fraction < 1.0, ErrorCode::ParamOutOfRange,
            "train_fraction must lie in (0,1)");
    ds.validate();

    std::map<std::string, std::size_t, std::less<>> group_index;
    std::vector<std::vector<std::size_t>> group_rows;
    std::vector<int> group_label;
    for (std::size_t i = 0; i < ds.rows(); ++i) {
        const auto key = source_group(ds.features.sample_ids[i]);
        auto it = group_index.find(key);
        if (it == group_index.end()) {
            it = group_index.emplace(std::string(key), group_rows.size()).first;
            group_rows.emplace_back();
            group_label.push_back(ds.labels[i]);
        }
        require(group_label[it->second] == ds.labels[i], ErrorCode::LabelOutOfRange,
                "augmented copies of '" + std::string(key) + "' disagree on label");
        group_rows[it->second].push_back(i);
    }

    const int strata = spec.stratified ? ds.num_classes() : 1;
    std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(strata));
    for (std::size_t g = 0; g < group_rows.size(); ++g)
        members[spec.stratified ? static_cast<std::size_t>(group_label[g]) : 0].push_back(g);

    const double f = spec.train_fraction;
    std::vector<std::size_t> take(members.size());
    std::vector<double> remainder(members.size());
    std::size_t taken = 0;
    for (std::size_t s = 0; s < members.size(); ++s) {
        const std::size_t n_s = members[s].size();
        require(n_s >= 2, ErrorCode::TooFewSamples,
                "class '" + (spec.stratified ? ds.class_names[s] : std::string("all")) + "' needs at least 2 samples");
        const double exact = f * static_cast<double>(n_s);
        take[s] = static_cast<std::size_t>(std::floor(exact));
        remainder[s] = exact - std::floor(exact);
        taken += take[s];
    }
    std::size_t target = static_cast<std::size_t>(std::floor(f * static_cast<double>(group_rows.size())));
    std::vector<std::size_t> order(members.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
    for (std::size_t k = 0; taken < target && k < order.size(); ++k) {
        ++take[order[k]];
        ++taken;
    }
    for (std::size_t s = 0; s < members.size(); ++s)
        take[s] = std::clamp<std::size_t>(take[s], 1, members[s].size() - 1);

    std::vector<char> in_train(group_rows.size(), 0);
    for (std::size_t s = 0; s < members.size(); ++s) {
        Rng rng(derive_seed(spec.seed, "split/" + std::to_string(s)));
        auto shuffled = members[s];
        rng.shuffle(shuffled);
        for (std::size_t k = 0; k < take[s]; ++k) in_train[shuffled[k]] = 1;
    }

    SplitIndices out;
    for (std::size_t g = 0; g < group_rows.size(); ++g)
        for (std::size_t row : group_rows[g]) {
            if (in_train[g]) out.train.push_back(row);
            else if (!is_augmented(ds.features.sample_ids[row])) out.test.push_back(row);
        }
    std::sort(out.train.begin(), out.train.end());
    std::sort(out.test.begin(), out.test.end());
    return out;
}

inline std::pair<LabeledDataset, LabeledDataset> stratified_split(const LabeledDataset& ds, const SplitSpec& spec) {
    const auto idx = split_indices(ds, spec);
    return {ds.subset(idx.train), ds.subset(idx.test)};
}

/// Rows of `ds` whose ids appear in `ids`, in the order of `ids`.
inline LabeledDataset select_ids(const LabeledDataset& ds, const std::vector<std::string>& ids) {
    std::map<std::string_view, std::size_t> where;
    for (std::size_t i = 0; i < ds.rows(); ++i) where.emplace(ds.features.sample_ids[i], i);
    std::vector<std::size_t> rows;
    rows.reserve(ids.size());
    for (const auto& id : ids) {
        const auto it = where.find(id);
        require(it != where.end(), ErrorCode::RowMisalignment, "sample '" + id + "' missing");
        rows.push_back(it->second);
    }
    return ds.subset(rows);
}

} // namespace fusepipe
