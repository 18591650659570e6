#include "macrocast/panel.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "macrocast/errors.hpp"

namespace macrocast {

// ---------------------------------------------------------------------------
// QuarterDate
// ---------------------------------------------------------------------------

std::string QuarterDate::to_string() const {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04dQ%d", year, quarter);
    return buf;
}

QuarterDate QuarterDate::parse(const std::string& text) {
    // Exactly four year digits, a separator, and the quarter digit(s);
    // anything trailing (e.g. "2017Q1x") is rejected, never truncated.
    const auto qpos = text.find_first_of("Qq");
    if (qpos != 4 || qpos + 1 >= text.size()) {
        throw DataError("malformed quarter date '" + text + "' (expected YYYYQn)");
    }
    QuarterDate q;
    const char* year_end = text.data() + qpos;
    const char* quarter_end = text.data() + text.size();
    const auto yr = std::from_chars(text.data(), year_end, q.year);
    const auto qr = std::from_chars(text.data() + qpos + 1, quarter_end, q.quarter);
    if (yr.ec != std::errc{} || yr.ptr != year_end || qr.ec != std::errc{} ||
        qr.ptr != quarter_end) {
        throw DataError("malformed quarter date '" + text + "' (expected YYYYQn)");
    }
    if (q.quarter < 1 || q.quarter > 4) {
        throw DataError("quarter out of range in date '" + text + "'");
    }
    return q;
}

// ---------------------------------------------------------------------------
// PartitionSpec
// ---------------------------------------------------------------------------

PartitionSpec PartitionSpec::default_spec() {
    PartitionSpec s;
    s.estimation = {{1947, 3}, {1959, 4}};
    s.training = {{1960, 1}, {2017, 3}};
    s.test = {{2017, 4}, {2025, 2}};
    return s;
}

void PartitionSpec::validate() const {
    for (const PeriodRange* r : {&estimation, &training, &test}) {
        if (r->length() < 1) {
            throw ConfigError("partition range " + r->start.to_string() + ".." +
                              r->end.to_string() + " is empty");
        }
    }
    if (training.start.index() != estimation.end.index() + 1 ||
        test.start.index() != training.end.index() + 1) {
        throw ConfigError("partition ranges must be contiguous in order estimation < training < test");
    }
}

// ---------------------------------------------------------------------------
// CSV ingestion
// ---------------------------------------------------------------------------

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n\"");
    if (b == std::string::npos) {
        return "";
    }
    const auto e = s.find_last_not_of(" \t\r\n\"");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        cells.push_back(trim(cell));
    }
    if (!line.empty() && line.back() == ',') {
        cells.push_back("");
    }
    return cells;
}

double parse_cell(const std::string& cell, size_t data_row, const std::string& col_name) {
    if (cell.empty()) {
        throw DataError("missing cell at row " + std::to_string(data_row) + ", column '" +
                        col_name + "'");
    }
    double v = 0.0;
    const auto* first = cell.data();
    const auto* last = cell.data() + cell.size();
    const auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc() || res.ptr != last) {
        throw DataError("malformed numeric cell '" + cell + "' at row " +
                        std::to_string(data_row) + ", column '" + col_name + "'");
    }
    if (!std::isfinite(v)) {
        throw DataError("non-finite cell at row " + std::to_string(data_row) + ", column '" +
                        col_name + "'");
    }
    return v;
}

}  // namespace

Panel load_real_panel(const std::string& path, const std::vector<std::string>& expected_vars) {
    std::ifstream file(path);
    if (!file.is_open()) {
        throw DataError("cannot open CSV file: " + path);
    }

    std::string line;
    if (!std::getline(file, line)) {
        throw DataError("empty CSV file: " + path);
    }
    const auto header = split_csv_line(line);
    if (header.size() != expected_vars.size() + 1) {
        throw DataError("CSV header has " + std::to_string(header.size()) +
                        " columns, expected date + " + std::to_string(expected_vars.size()) +
                        " variables");
    }
    for (size_t k = 0; k < expected_vars.size(); ++k) {
        if (header[k + 1] != expected_vars[k]) {
            throw DataError("CSV header column " + std::to_string(k + 2) + " is '" +
                            header[k + 1] + "', expected '" + expected_vars[k] + "'");
        }
    }

    Panel panel;
    panel.var_names = expected_vars;
    const size_t K = expected_vars.size();

    size_t data_row = 0;
    while (std::getline(file, line)) {
        if (trim(line).empty()) {
            continue;
        }
        ++data_row;
        const auto cells = split_csv_line(line);
        if (cells.size() != K + 1) {
            throw DataError("row " + std::to_string(data_row) + " has " +
                            std::to_string(cells.size()) + " cells, expected " +
                            std::to_string(K + 1));
        }
        const QuarterDate date = QuarterDate::parse(cells[0]);
        if (!panel.times.empty()) {
            const int prev = panel.times.back().index();
            if (date.index() <= prev) {
                throw DataError("non-monotone time index at row " + std::to_string(data_row) +
                                " (" + date.to_string() + ")");
            }
            if (date.index() != prev + 1) {
                throw DataError("gap in quarterly time index before " + date.to_string());
            }
        }
        panel.times.push_back(date);
        for (size_t k = 0; k < K; ++k) {
            panel.values.push_back(parse_cell(cells[k + 1], data_row, expected_vars[k]));
        }
    }
    if (panel.times.empty()) {
        throw DataError("CSV file has no data rows: " + path);
    }
    return panel;
}

// ---------------------------------------------------------------------------
// Partition
// ---------------------------------------------------------------------------

namespace {

Panel slice_panel(const Panel& panel, const PeriodRange& range) {
    const int first = panel.times.front().index();
    const int lo = range.start.index() - first;
    const int hi = range.end.index() - first;
    if (lo < 0 || hi >= static_cast<int>(panel.rows())) {
        throw DataError("partition range " + range.start.to_string() + ".." +
                        range.end.to_string() + " lies outside the panel");
    }
    Panel out;
    out.var_names = panel.var_names;
    const size_t K = panel.num_vars();
    for (int r = lo; r <= hi; ++r) {
        out.times.push_back(panel.times[static_cast<size_t>(r)]);
        for (size_t k = 0; k < K; ++k) {
            out.values.push_back(panel.at(static_cast<size_t>(r), k));
        }
    }
    return out;
}

}  // namespace

PanelPartition partition_panel(const Panel& panel, const PartitionSpec& spec) {
    spec.validate();
    if (panel.times.empty()) {
        throw DataError("cannot partition a panel without time labels");
    }
    PanelPartition parts;
    parts.estimation = slice_panel(panel, spec.estimation);
    parts.training = slice_panel(panel, spec.training);
    parts.test = slice_panel(panel, spec.test);
    return parts;
}

// ---------------------------------------------------------------------------
// Standardization
// ---------------------------------------------------------------------------

StandardizationStats fit_standardization(const Panel& training) {
    const size_t n = training.rows();
    const size_t K = training.num_vars();
    if (n < 2) {
        throw DataError("standardization requires at least 2 training rows");
    }

    StandardizationStats stats;
    stats.var_names = training.var_names;
    if (!training.times.empty()) {
        stats.source_range = {training.times.front(), training.times.back()};
    }
    stats.means.resize(K);
    stats.stds.resize(K);

    // Welford's algorithm; the test suite checks it against a two-pass oracle.
    for (size_t k = 0; k < K; ++k) {
        double mean = 0.0;
        double m2 = 0.0;
        for (size_t r = 0; r < n; ++r) {
            const double x = training.at(r, k);
            const double delta = x - mean;
            mean += delta / static_cast<double>(r + 1);
            m2 += delta * (x - mean);
        }
        const double var = m2 / static_cast<double>(n - 1);
        if (!(var > 0.0)) {
            throw DataError("zero variance in variable '" + training.var_names[k] +
                            "' over the training segment");
        }
        stats.means[k] = mean;
        stats.stds[k] = std::sqrt(var);
    }
    return stats;
}

Panel apply_standardization(const Panel& panel, const StandardizationStats& stats) {
    if (panel.num_vars() != stats.num_vars()) {
        throw DataError("panel has " + std::to_string(panel.num_vars()) +
                        " variables, stats have " + std::to_string(stats.num_vars()));
    }
    Panel out = panel;
    const size_t K = panel.num_vars();
    for (size_t r = 0; r < panel.rows(); ++r) {
        for (size_t k = 0; k < K; ++k) {
            out.at(r, k) = (panel.at(r, k) - stats.means[k]) / stats.stds[k];
        }
    }
    return out;
}

Panel invert_standardization(const Panel& panel, const StandardizationStats& stats) {
    if (panel.num_vars() != stats.num_vars()) {
        throw DataError("panel/stats dimension mismatch");
    }
    Panel out = panel;
    const size_t K = panel.num_vars();
    for (size_t r = 0; r < panel.rows(); ++r) {
        for (size_t k = 0; k < K; ++k) {
            out.at(r, k) = panel.at(r, k) * stats.stds[k] + stats.means[k];
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Stats text format
// ---------------------------------------------------------------------------

std::string stats_to_text(const StandardizationStats& stats) {
    std::ostringstream os;
    os << "STANDARDIZATION 1\n";
    os << "range " << stats.source_range.start.to_string() << " "
       << stats.source_range.end.to_string() << "\n";
    os << "K " << stats.num_vars() << "\n";
    char buf[64];
    for (size_t k = 0; k < stats.num_vars(); ++k) {
        os << "var " << stats.var_names[k];
        std::snprintf(buf, sizeof(buf), " %.17g", stats.means[k]);
        os << buf;
        std::snprintf(buf, sizeof(buf), " %.17g", stats.stds[k]);
        os << buf << "\n";
    }
    return os.str();
}

StandardizationStats stats_from_text(const std::string& text) {
    std::istringstream is(text);
    std::string word;
    int version = 0;
    is >> word >> version;
    if (word != "STANDARDIZATION" || version != 1) {
        throw DataError("unrecognized standardization block");
    }
    StandardizationStats stats;
    std::string a;
    std::string b;
    is >> word >> a >> b;
    if (word != "range") {
        throw DataError("standardization block missing range");
    }
    stats.source_range = {QuarterDate::parse(a), QuarterDate::parse(b)};
    size_t K = 0;
    is >> word >> K;
    if (word != "K") {
        throw DataError("standardization block missing K");
    }
    for (size_t k = 0; k < K; ++k) {
        std::string name;
        double mean = 0.0;
        double sd = 0.0;
        is >> word >> name >> mean >> sd;
        if (word != "var" || !is) {
            throw DataError("standardization block truncated");
        }
        stats.var_names.push_back(name);
        stats.means.push_back(mean);
        stats.stds.push_back(sd);
    }
    return stats;
}

}  // namespace macrocast
