#pragma once

// Accuracy metrics, accuracy tables and their renderings.

#include <nlohmann/json.hpp>

#include <cstdio>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "fusepipe/error.hpp"
#include "fusepipe/featureio.hpp"

namespace fusepipe {

inline double accuracy(const Labels& y_true, const Labels& y_pred) {
    require(y_true.size() == y_pred.size(), ErrorCode::LengthMismatch,
            "accuracy over " + std::to_string(y_true.size()) + " truths and " + std::to_string(y_pred.size()) + " predictions");
    require(!y_true.empty(), ErrorCode::Empty, "accuracy of an empty label list");
    std::size_t hit = 0;
    for (std::size_t i = 0; i < y_true.size(); ++i) hit += y_true[i] == y_pred[i];
    return static_cast<double>(hit) / static_cast<double>(y_true.size());
}

/// M(i, j) = number of samples with truth i predicted as j.
inline std::vector<std::vector<std::size_t>> confusion_matrix(const Labels& y_true, const Labels& y_pred, int n_classes) {
    require(y_true.size() == y_pred.size(), ErrorCode::LengthMismatch, "confusion matrix inputs differ in length");
    std::vector<std::vector<std::size_t>> m(static_cast<std::size_t>(n_classes),
                                            std::vector<std::size_t>(static_cast<std::size_t>(n_classes), 0));
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        require(y_true[i] >= 0 && y_true[i] < n_classes && y_pred[i] >= 0 && y_pred[i] < n_classes,
                ErrorCode::LabelOutOfRange, "label outside [0, " + std::to_string(n_classes) + ")");
        ++m[static_cast<std::size_t>(y_true[i])][static_cast<std::size_t>(y_pred[i])];
    }
    return m;
}

/// One accuracy table: named rows by named columns.
struct RunReport {
    std::string dataset;
    std::string variant;
    std::string table; // single | fusion | vote
    std::vector<std::string> rows;
    std::vector<std::string> columns;
    std::map<std::pair<std::string, std::string>, double> cells;
    std::uint64_t seed = 0;
    std::string config_hash;

    void set(const std::string& row, const std::string& column, double acc) {
        require(acc >= 0.0 && acc <= 1.0, ErrorCode::ParamOutOfRange, "accuracy outside [0,1]");
        if (std::find(rows.begin(), rows.end(), row) == rows.end()) rows.push_back(row);
        if (std::find(columns.begin(), columns.end(), column) == columns.end()) columns.push_back(column);
        cells[{row, column}] = acc;
    }

    std::optional<double> get(const std::string& row, const std::string& column) const {
        const auto it = cells.find({row, column});
        if (it == cells.end()) return std::nullopt;
        return it->second;
    }

    double at(const std::string& row, const std::string& column) const {
        const auto v = get(row, column);
        if (!v) fail(ErrorCode::IncompleteReport, "missing cell (" + row + ", " + column + ") in " + table + " table");
        return *v;
    }

    void require_complete() const {
        require(!rows.empty() && !columns.empty(), ErrorCode::IncompleteReport, "report has no cells");
        for (const auto& r : rows)
            for (const auto& c : columns) (void)at(r, c);
    }

    double row_mean(const std::string& row) const {
        double s = 0.0;
        for (const auto& c : columns) s += at(row, c);
        return s / static_cast<double>(columns.size());
    }

    double column_mean(const std::string& column) const {
        double s = 0.0;
        for (const auto& r : rows) s += at(r, column);
        return s / static_cast<double>(rows.size());
    }
};

inline nlohmann::json to_json(const RunReport& r) {
    nlohmann::json cells = nlohmann::json::array();
    for (const auto& row : r.rows)
        for (const auto& col : r.columns)
            if (const auto v = r.get(row, col)) cells.push_back({row, col, *v});
    return {{"dataset", r.dataset}, {"variant", r.variant},   {"table", r.table},
            {"rows", r.rows},       {"columns", r.columns},   {"cells", cells},
            {"seed", r.seed},       {"config_hash", r.config_hash}};
}

inline RunReport report_from_json(const nlohmann::json& j) {
    RunReport r;
    r.dataset = j.at("dataset").get<std::string>();
    r.variant = j.at("variant").get<std::string>();
    r.table = j.at("table").get<std::string>();
    r.rows = j.at("rows").get<std::vector<std::string>>();
    r.columns = j.at("columns").get<std::vector<std::string>>();
    for (const auto& c : j.at("cells")) r.cells[{c[0].get<std::string>(), c[1].get<std::string>()}] = c[2].get<double>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.config_hash = j.at("config_hash").get<std::string>();
    return r;
}

enum class TableFormat { Markdown, Csv };

inline std::string fixed4(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

/// Rows by columns with a trailing Average column and row; rows listed in
/// `starred` get a trailing '*'.
inline std::string make_table(const RunReport& r, TableFormat format, const std::set<std::string>& starred = {}) {
    r.require_complete();
    const std::string corner = r.table == "vote" ? "Ensemble" : "Feature set";
    std::vector<std::vector<std::string>> grid;
    std::vector<std::string> header{corner};
    header.insert(header.end(), r.columns.begin(), r.columns.end());
    header.push_back("Average");
    grid.push_back(header);
    for (const auto& row : r.rows) {
        std::vector<std::string> line{row + (starred.count(row) ? "*" : "")};
        for (const auto& c : r.columns) line.push_back(fixed4(r.at(row, c)));
        line.push_back(fixed4(r.row_mean(row)));
        grid.push_back(std::move(line));
    }
    std::vector<std::string> avg{"Average"};
    for (const auto& c : r.columns) avg.push_back(fixed4(r.column_mean(c)));
    avg.emplace_back("");
    grid.push_back(std::move(avg));

    std::string out;
    if (format == TableFormat::Csv) {
        for (const auto& line : grid) {
            for (std::size_t i = 0; i < line.size(); ++i) out += (i ? "," : "") + line[i];
            out += "\n";
        }
        return out;
    }
    for (std::size_t l = 0; l < grid.size(); ++l) {
        out += "|";
        for (const auto& cell : grid[l]) out += " " + cell + " |";
        out += "\n";
        if (l == 0) {
            out += "|";
            for (std::size_t i = 0; i < grid[0].size(); ++i) out += i == 0 ? "---|" : "---:|";
            out += "\n";
        }
    }
    return out;
}

} // namespace fusepipe
