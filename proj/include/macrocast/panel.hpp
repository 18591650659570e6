#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace macrocast {

// ---------------------------------------------------------------------------
// Quarterly calendar
// ---------------------------------------------------------------------------

// A calendar quarter, e.g. 1960Q1. Ordering and arithmetic work on the
// linearized index year*4 + (quarter-1).
struct QuarterDate {
    int year = 0;
    int quarter = 1;  // 1..4

    int index() const { return year * 4 + (quarter - 1); }
    static QuarterDate from_index(int idx) {
        QuarterDate q;
        q.year = idx >= 0 ? idx / 4 : (idx - 3) / 4;
        q.quarter = idx - q.year * 4 + 1;
        return q;
    }
    QuarterDate plus(int quarters) const { return from_index(index() + quarters); }

    std::string to_string() const;            // "1960Q1"
    static QuarterDate parse(const std::string& text);

    friend bool operator==(const QuarterDate& a, const QuarterDate& b) {
        return a.index() == b.index();
    }
    friend auto operator<=>(const QuarterDate& a, const QuarterDate& b) {
        return a.index() <=> b.index();
    }
};

// Inclusive range of quarters.
struct PeriodRange {
    QuarterDate start;
    QuarterDate end;

    int length() const { return end.index() - start.index() + 1; }
    bool contains(const QuarterDate& q) const {
        return q.index() >= start.index() && q.index() <= end.index();
    }
};

// ---------------------------------------------------------------------------
// Panel
// ---------------------------------------------------------------------------

// A T_len x K matrix of continuous observations. `times` may be empty for
// synthetic panels; when present it is strictly increasing with no quarterly
// gaps and has one entry per row.
struct Panel {
    std::vector<QuarterDate> times;
    std::vector<double> values;  // row-major, rows() x K
    std::vector<std::string> var_names;

    size_t rows() const { return var_names.empty() ? 0 : values.size() / var_names.size(); }
    size_t num_vars() const { return var_names.size(); }
    double at(size_t row, size_t col) const { return values[row * num_vars() + col]; }
    double& at(size_t row, size_t col) { return values[row * num_vars() + col]; }
};

// The three-way sample split. Ranges must be contiguous and in order.
struct PartitionSpec {
    PeriodRange estimation;
    PeriodRange training;
    PeriodRange test;

    // 50 / 231 / 31 quarters.
    static PartitionSpec default_spec();
    void validate() const;
};

// Per-variable training-segment moments used for standardization.
struct StandardizationStats {
    std::vector<double> means;
    std::vector<double> stds;  // > 0
    std::vector<std::string> var_names;
    PeriodRange source_range;

    size_t num_vars() const { return means.size(); }
};

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

// Reads a CSV whose first column is a YYYYQn date and whose remaining columns
// match expected_vars in order. Rejects missing cells, malformed rows, and
// non-monotone or gapped time indices.
Panel load_real_panel(const std::string& path, const std::vector<std::string>& expected_vars);

struct PanelPartition {
    Panel estimation;
    Panel training;
    Panel test;
};

PanelPartition partition_panel(const Panel& panel, const PartitionSpec& spec);

// Column sample means and standard deviations (divisor n-1) of the training
// segment only. Errors on constant columns.
StandardizationStats fit_standardization(const Panel& training);

// (value - mean) / std per column.
Panel apply_standardization(const Panel& panel, const StandardizationStats& stats);

// Inverse transform: value * std + mean.
Panel invert_standardization(const Panel& panel, const StandardizationStats& stats);

// Text serialization of the stats (also embedded in checkpoints).
std::string stats_to_text(const StandardizationStats& stats);
StandardizationStats stats_from_text(const std::string& text);

}  // namespace macrocast
