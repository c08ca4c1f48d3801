// Copyright 2026 The CAG Surrogate Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef CAG_DATASET_HPP
#define CAG_DATASET_HPP

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "cag/error.hpp"

namespace cag {

/// Scalar loading parameter (damping ratio, stretch ratio, ...).
using ControlParameter = double;
/// Ordered collection of control parameters.
using ParameterGrid = std::vector<ControlParameter>;
/// Response field of length N.
using PhysicalField = Eigen::VectorXd;
/// N x M matrix of stacked response fields, one column per sample.
using FieldMatrix = Eigen::MatrixXd;

/// Relative closeness used for duplicate detection and midpoint exclusion.
inline bool same_parameter(double a, double b) noexcept {
    return a == b || std::abs(a - b) <= 1e-12 * std::max(std::abs(a), std::abs(b));
}

/// Input/output pairs (chi_i, eta_i), kept sorted by chi.
class LabeledDataset {
public:
    LabeledDataset() = default;

    /// Empty dataset that still knows its field length.
    explicit LabeledDataset(Eigen::Index field_size) : fields_(field_size, 0) {}

    LabeledDataset(ParameterGrid inputs, FieldMatrix fields) {
        if (static_cast<Eigen::Index>(inputs.size()) != fields.cols()) {
            throw DimensionMismatch("dataset: " + std::to_string(inputs.size()) + " inputs but "
                                    + std::to_string(fields.cols()) + " field columns");
        }
        if (!inputs.empty() && fields.rows() < 1) {
            throw DimensionMismatch("dataset: fields must have at least one entry");
        }
        for (double x : inputs) {
            if (!std::isfinite(x)) throw InvalidParameter("dataset: non-finite control parameter");
        }
        if (!fields.allFinite()) throw InvalidParameter("dataset: non-finite field entry");

        std::vector<std::size_t> order(inputs.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return inputs[a] < inputs[b]; });
        inputs_.resize(inputs.size());
        fields_.resize(fields.rows(), fields.cols());
        for (std::size_t i = 0; i < order.size(); ++i) {
            inputs_[i] = inputs[order[i]];
            fields_.col(static_cast<Eigen::Index>(i)) = fields.col(static_cast<Eigen::Index>(order[i]));
        }
        for (std::size_t i = 1; i < inputs_.size(); ++i) {
            if (same_parameter(inputs_[i - 1], inputs_[i])) {
                std::ostringstream msg;
                msg.precision(17);
                msg << "dataset: duplicate control parameter " << inputs_[i];
                throw DuplicateInput(msg.str());
            }
        }
    }

    [[nodiscard]] const ParameterGrid& inputs() const noexcept { return inputs_; }
    [[nodiscard]] const FieldMatrix& fields() const noexcept { return fields_; }
    [[nodiscard]] std::size_t size() const noexcept { return inputs_.size(); }
    [[nodiscard]] bool empty() const noexcept { return inputs_.empty(); }
    [[nodiscard]] Eigen::Index field_size() const noexcept { return fields_.rows(); }
    [[nodiscard]] auto field(std::size_t i) const { return fields_.col(static_cast<Eigen::Index>(i)); }

    /// Union with another dataset of the same field length; re-sorts and rejects duplicates.
    [[nodiscard]] LabeledDataset merged(const LabeledDataset& other) const {
        if (other.empty()) return *this;
        if (empty()) return other;
        if (other.field_size() != field_size()) {
            throw DimensionMismatch("dataset merge: field lengths differ");
        }
        ParameterGrid xs = inputs_;
        xs.insert(xs.end(), other.inputs_.begin(), other.inputs_.end());
        FieldMatrix ys(field_size(), fields_.cols() + other.fields_.cols());
        ys << fields_, other.fields_;
        return {std::move(xs), std::move(ys)};
    }

    /// Columns selected by index, in the given order.
    [[nodiscard]] LabeledDataset subset(const std::vector<std::size_t>& indices) const {
        ParameterGrid xs;
        FieldMatrix ys(field_size(), static_cast<Eigen::Index>(indices.size()));
        for (std::size_t j = 0; j < indices.size(); ++j) {
            xs.push_back(inputs_.at(indices[j]));
            ys.col(static_cast<Eigen::Index>(j)) = field(indices[j]);
        }
        return {std::move(xs), std::move(ys)};
    }

    friend bool operator==(const LabeledDataset& a, const LabeledDataset& b) {
        return a.inputs_ == b.inputs_ && a.fields_.rows() == b.fields_.rows()
               && a.fields_.cols() == b.fields_.cols() && a.fields_ == b.fields_;
    }

private:
    ParameterGrid inputs_;
    FieldMatrix fields_;
};

/// A labeled dataset partitioned into K clusters; labels are 0-based.
class ClusteredDataset {
public:
    ClusteredDataset() = default;

    ClusteredDataset(LabeledDataset base, std::vector<std::size_t> labels, std::size_t clusters)
        : base_(std::move(base)), labels_(std::move(labels)), clusters_(clusters) {
        if (labels_.size() != base_.size()) {
            throw DimensionMismatch("clustered dataset: label count differs from sample count");
        }
        if (clusters_ == 0) throw InvalidParameter("clustered dataset: K must be at least 1");
        std::vector<std::size_t> counts(clusters_, 0);
        for (std::size_t g : labels_) {
            if (g >= clusters_) throw InvalidParameter("clustered dataset: label out of range");
            ++counts[g];
        }
        for (std::size_t k = 0; k < clusters_; ++k) {
            if (counts[k] == 0) {
                throw InvalidParameter("clustered dataset: cluster " + std::to_string(k) + " is empty");
            }
        }
    }

    [[nodiscard]] const LabeledDataset& base() const noexcept { return base_; }
    [[nodiscard]] const std::vector<std::size_t>& labels() const noexcept { return labels_; }
    [[nodiscard]] std::size_t clusters() const noexcept { return clusters_; }
    [[nodiscard]] std::size_t size() const noexcept { return base_.size(); }

    [[nodiscard]] std::vector<std::size_t> cluster_sizes() const {
        std::vector<std::size_t> counts(clusters_, 0);
        for (std::size_t g : labels_) ++counts[g];
        return counts;
    }

    [[nodiscard]] std::vector<std::size_t> members(std::size_t k) const {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < labels_.size(); ++i) {
            if (labels_[i] == k) idx.push_back(i);
        }
        return idx;
    }

    /// Members of cluster k, still sorted by chi.
    [[nodiscard]] LabeledDataset cluster(std::size_t k) const { return base_.subset(members(k)); }

private:
    LabeledDataset base_;
    std::vector<std::size_t> labels_;
    std::size_t clusters_ = 0;
};

enum class DatasetFormat { csv, json };

inline DatasetFormat format_from_path(const std::filesystem::path& path) {
    auto ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".json") return DatasetFormat::json;
    if (ext == ".csv") return DatasetFormat::csv;
    throw InvalidParameter("dataset: unknown file extension '" + ext + "' (expected .csv or .json)");
}

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

inline bool parse_double(std::string_view s, double& out) {
    s = trim(s);
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    if (s.empty()) return false;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && ptr == s.data() + s.size();
}

inline std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        auto pos = line.find(',', start);
        out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

/// Shortest decimal text that reads back into the identical double.
inline std::string format_double(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
    (void)ec;
    return {buf, ptr};
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
    out.flush();
    if (!out) throw IoError("write failed for " + path.string());
}

} // namespace detail

/// Parses CSV text: `chi, eta_1, ..., eta_N` per row, '#' comments, optional header row.
inline LabeledDataset parse_dataset_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    ParameterGrid xs;
    std::vector<std::vector<double>> rows;
    Eigen::Index width = -1;
    bool first_content = true;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto view = detail::trim(line);
        if (view.empty() || view.front() == '#') continue;
        auto cells = detail::split_commas(view);
        double chi = 0.0;
        if (!detail::parse_double(cells.front(), chi)) {
            if (first_content) {
                // header row: its column count fixes N even for an empty dataset
                width = static_cast<Eigen::Index>(cells.size()) - 1;
                first_content = false;
                continue;
            }
            throw ParseError("csv line " + std::to_string(lineno) + ": malformed control parameter");
        }
        first_content = false;
        std::vector<double> row;
        row.reserve(cells.size() - 1);
        for (std::size_t c = 1; c < cells.size(); ++c) {
            double v = 0.0;
            if (!detail::parse_double(cells[c], v)) {
                throw ParseError("csv line " + std::to_string(lineno) + ": malformed value in column "
                                 + std::to_string(c + 1));
            }
            row.push_back(v);
        }
        if (row.empty()) throw DimensionMismatch("csv line " + std::to_string(lineno) + ": no field values");
        if (width >= 0 && static_cast<Eigen::Index>(row.size()) != width) {
            throw DimensionMismatch("csv line " + std::to_string(lineno) + ": expected "
                                    + std::to_string(width) + " field values, got "
                                    + std::to_string(row.size()));
        }
        width = static_cast<Eigen::Index>(row.size());
        xs.push_back(chi);
        rows.push_back(std::move(row));
    }
    if (rows.empty()) return LabeledDataset(std::max<Eigen::Index>(width, 0));
    FieldMatrix ys(width, static_cast<Eigen::Index>(rows.size()));
    for (std::size_t j = 0; j < rows.size(); ++j) {
        ys.col(static_cast<Eigen::Index>(j)) = Eigen::Map<const Eigen::VectorXd>(rows[j].data(), width);
    }
    return {std::move(xs), std::move(ys)};
}

inline std::string dataset_to_csv(const LabeledDataset& ds) {
    std::string out = "chi";
    for (Eigen::Index r = 0; r < ds.field_size(); ++r) out += ",eta_" + std::to_string(r + 1);
    out += '\n';
    for (std::size_t i = 0; i < ds.size(); ++i) {
        out += detail::format_double(ds.inputs()[i]);
        auto col = ds.field(i);
        for (Eigen::Index r = 0; r < col.size(); ++r) {
            out += ',';
            out += detail::format_double(col[r]);
        }
        out += '\n';
    }
    return out;
}

inline nlohmann::json dataset_to_json(const LabeledDataset& ds) {
    nlohmann::json records = nlohmann::json::array();
    for (std::size_t i = 0; i < ds.size(); ++i) {
        auto col = ds.field(i);
        records.push_back({{"chi", ds.inputs()[i]}, {"field", std::vector<double>(col.begin(), col.end())}});
    }
    return {{"format", "cag-dataset"}, {"field_size", ds.field_size()}, {"records", std::move(records)}};
}

inline LabeledDataset dataset_from_json(const nlohmann::json& j) {
    try {
        const auto& recs = j.at("records");
        Eigen::Index width = j.value("field_size", Eigen::Index{-1});
        ParameterGrid xs;
        std::vector<std::vector<double>> rows;
        for (const auto& rec : recs) {
            xs.push_back(rec.at("chi").get<double>());
            auto row = rec.at("field").get<std::vector<double>>();
            if (row.empty()) throw DimensionMismatch("json dataset: record with empty field");
            if (width >= 0 && static_cast<Eigen::Index>(row.size()) != width) {
                throw DimensionMismatch("json dataset: ragged field lengths");
            }
            width = static_cast<Eigen::Index>(row.size());
            rows.push_back(std::move(row));
        }
        if (rows.empty()) return LabeledDataset(std::max<Eigen::Index>(width, 0));
        FieldMatrix ys(width, static_cast<Eigen::Index>(rows.size()));
        for (std::size_t c = 0; c < rows.size(); ++c) {
            ys.col(static_cast<Eigen::Index>(c)) = Eigen::Map<const Eigen::VectorXd>(rows[c].data(), width);
        }
        return {std::move(xs), std::move(ys)};
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("json dataset: ") + e.what());
    }
}

inline LabeledDataset load_dataset(const std::filesystem::path& path, DatasetFormat format) {
    auto text = detail::read_file(path);
    if (format == DatasetFormat::csv) return parse_dataset_csv(text);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("json dataset: ") + e.what());
    }
    return dataset_from_json(j);
}

inline LabeledDataset load_dataset(const std::filesystem::path& path) {
    return load_dataset(path, format_from_path(path));
}

/// JSON form with a "cluster" label per record and the cluster count K.
inline nlohmann::json clustered_to_json(const ClusteredDataset& cd) {
    nlohmann::json j = dataset_to_json(cd.base());
    j["clusters"] = cd.clusters();
    auto& recs = j["records"];
    for (std::size_t i = 0; i < cd.size(); ++i) recs[i]["cluster"] = cd.labels()[i];
    return j;
}

/// Labels from a JSON dataset when every record carries one; otherwise nullopt.
inline std::optional<ClusteredDataset> clustered_from_json(const nlohmann::json& j) {
    LabeledDataset ds = dataset_from_json(j);
    try {
        const auto& recs = j.at("records");
        if (recs.empty() || !j.contains("clusters")) return std::nullopt;
        std::vector<std::pair<double, std::size_t>> tagged;
        for (const auto& rec : recs) {
            if (!rec.contains("cluster")) return std::nullopt;
            tagged.emplace_back(rec.at("chi").get<double>(), rec.at("cluster").get<std::size_t>());
        }
        std::sort(tagged.begin(), tagged.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
        std::vector<std::size_t> labels;
        for (const auto& t : tagged) labels.push_back(t.second);
        return ClusteredDataset(std::move(ds), std::move(labels), j.at("clusters").get<std::size_t>());
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("json dataset: ") + e.what());
    }
}

inline nlohmann::json read_json_file(const std::filesystem::path& path) {
    auto text = detail::read_file(path);
    try {
        return nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

inline void save_dataset(const LabeledDataset& ds, const std::filesystem::path& path, DatasetFormat format) {
    if (format == DatasetFormat::csv) {
        detail::write_file(path, dataset_to_csv(ds));
    } else {
        detail::write_file(path, dataset_to_json(ds).dump(2) + "\n");
    }
}

inline void save_dataset(const LabeledDataset& ds, const std::filesystem::path& path) {
    save_dataset(ds, path, format_from_path(path));
}

} // namespace cag

#endif // CAG_DATASET_HPP
