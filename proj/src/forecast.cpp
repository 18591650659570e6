#include "macrocast/forecast.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "macrocast/errors.hpp"

namespace macrocast {

namespace {

std::string g17(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

size_t argmax_lowest_local(const std::vector<double>& v) {
    size_t best = 0;
    for (size_t i = 1; i < v.size(); ++i) {
        if (v[i] > v[best]) {
            best = i;
        }
    }
    return best;
}

}  // namespace

ForecastTable rolling_forecast(const Predictor& predict, const Panel& full_real,
                               const PartitionSpec& partition, const StandardizationStats& stats,
                               const TokenizerSpec& tokenizer, size_t target_var, size_t context) {
    partition.validate();
    const size_t K = full_real.num_vars();
    if (target_var >= K) {
        throw ConfigError("target variable index out of range");
    }
    if (stats.var_names != full_real.var_names || tokenizer.var_names != full_real.var_names) {
        throw DataError("checkpoint variables do not match the panel's variables");
    }
    if (full_real.times.empty()) {
        throw DataError("real panel carries no time labels");
    }

    const int first = full_real.times.front().index();
    const auto row_of = [&](const QuarterDate& q) -> size_t {
        const int idx = q.index() - first;
        if (idx < 0 || static_cast<size_t>(idx) >= full_real.rows()) {
            throw DataError("period " + q.to_string() + " outside the panel");
        }
        return static_cast<size_t>(idx);
    };
    const size_t test_begin = row_of(partition.test.start);
    const size_t test_end = row_of(partition.test.end);
    if (test_begin < context) {
        throw DataError("insufficient history before the first test period (need " +
                        std::to_string(context) + " quarters)");
    }

    const Panel standardized = apply_standardization(full_real, stats);
    const TokenPanel tokens = encode(standardized, tokenizer);
    const size_t J = tokenizer.J;
    const std::vector<double>& edges = tokenizer.boundaries[target_var];

    ForecastTable table;
    table.var_name = full_real.var_names[target_var];
    table.vocab = J;
    table.boundaries = edges;
    table.mean = stats.means[target_var];
    table.stddev = stats.stds[target_var];

    for (size_t r = test_begin; r <= test_end; ++r) {
        std::vector<int> window(context * K);
        for (size_t t = 0; t < context; ++t) {
            for (size_t k = 0; k < K; ++k) {
                window[t * K + k] = tokens.at(r - context + t, k);
            }
        }
        ForecastRow row;
        row.period = full_real.times[r];
        row.probs = predict(window);
        if (row.probs.size() != J) {
            throw DataError("predictor returned " + std::to_string(row.probs.size()) +
                            " probabilities, expected " + std::to_string(J));
        }
        row.predicted_token = static_cast<int>(argmax_lowest_local(row.probs));
        row.realized_token = tokens.at(r, target_var);
        row.realized_value = full_real.at(r, target_var);
        row.correct = row.predicted_token == row.realized_token;
        const double z = standardized.at(r, target_var);
        if (z < edges.front() || z > edges.back()) {
            ++table.clamp_count;
        }
        table.rows.push_back(std::move(row));
    }
    return table;
}

AccuracyRow score(const ForecastTable& table) {
    if (table.rows.empty()) {
        throw DataError("cannot score an empty forecast table");
    }
    AccuracyRow out;
    out.var_name = table.var_name;
    out.n = table.rows.size();
    out.clamp_count = table.clamp_count;
    double exact = 0.0;
    double adjacent = 0.0;
    double abs_err = 0.0;
    double log_sum = 0.0;
    for (const ForecastRow& r : table.rows) {
        const int diff = std::abs(r.predicted_token - r.realized_token);
        exact += diff == 0 ? 1.0 : 0.0;
        adjacent += diff <= 1 ? 1.0 : 0.0;
        abs_err += diff;
        log_sum += std::log(r.probs[static_cast<size_t>(r.realized_token)]);
    }
    const double n = static_cast<double>(out.n);
    out.exact_accuracy = exact / n;
    out.adjacent_accuracy = adjacent / n;
    out.mean_abs_error = abs_err / n;
    out.log_score = log_sum / n;
    return out;
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

void save_forecast_csv(const ForecastTable& table, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) {
        throw DataError("cannot write forecast table '" + path + "'");
    }
    f << "period,realized_value,realized_token,predicted_token,correct_flag";
    for (size_t j = 0; j < table.vocab; ++j) {
        f << ",p" << j;
    }
    f << "\n";
    for (const ForecastRow& r : table.rows) {
        f << r.period.to_string() << "," << g17(r.realized_value) << "," << r.realized_token
          << "," << r.predicted_token << "," << (r.correct ? 1 : 0);
        for (double p : r.probs) {
            f << "," << g17(p);
        }
        f << "\n";
    }
}

ForecastTable load_forecast_csv(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) {
        throw DataError("cannot open forecast table '" + path + "'");
    }
    std::string line;
    if (!std::getline(f, line)) {
        throw DataError("empty forecast table '" + path + "'");
    }
    std::vector<std::string> header;
    {
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            header.push_back(cell);
        }
    }
    if (header.size() < 6 || header[0] != "period") {
        throw DataError("unrecognized forecast table header in '" + path + "'");
    }
    ForecastTable table;
    table.vocab = header.size() - 5;

    size_t line_no = 1;
    while (std::getline(f, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        std::stringstream ss(line);
        std::string cell;
        std::vector<std::string> cells;
        while (std::getline(ss, cell, ',')) {
            cells.push_back(cell);
        }
        if (cells.size() != header.size()) {
            throw DataError("malformed forecast row at line " + std::to_string(line_no) +
                            " of '" + path + "'");
        }
        ForecastRow r;
        r.period = QuarterDate::parse(cells[0]);
        r.realized_value = std::stod(cells[1]);
        r.realized_token = std::stoi(cells[2]);
        r.predicted_token = std::stoi(cells[3]);
        r.correct = cells[4] == "1";
        for (size_t j = 0; j < table.vocab; ++j) {
            r.probs.push_back(std::stod(cells[5 + j]));
        }
        table.rows.push_back(std::move(r));
    }
    return table;
}

// ---------------------------------------------------------------------------
// SVG heatmap
// ---------------------------------------------------------------------------

namespace {

std::string f1(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.1f", v);
    return buf;
}

std::string f2(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

std::string gray_fill(double p) {
    const double clamped = std::min(1.0, std::max(0.0, p));
    const int level = static_cast<int>(std::lround(255.0 * (1.0 - clamped)));
    char buf[8];
    std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", level, level, level);
    return buf;
}

}  // namespace

void save_heatmap_svg(const ForecastTable& table, const std::string& path) {
    if (table.rows.empty() || table.boundaries.size() != table.vocab + 1) {
        throw DataError("forecast table is empty or lacks bin boundaries");
    }
    const size_t n = table.rows.size();
    const size_t J = table.vocab;
    const double cell_w = 22.0;
    const double cell_h = 22.0;
    const double left = 74.0;
    const double top = 34.0;
    const double grid_w = cell_w * static_cast<double>(n);
    const double grid_h = cell_h * static_cast<double>(J);
    const double width = left + grid_w + 20.0;
    const double height = top + grid_h + 52.0;

    // Vertical placement of a standardized value: fractional position within
    // its bin, token 0 at the bottom.
    const std::vector<double>& e = table.boundaries;
    const auto y_of_value = [&](double z) {
        const double zc = std::min(e.back(), std::max(e.front(), z));
        size_t j = 0;
        while (j + 1 < J && zc >= e[j + 1]) {
            ++j;
        }
        const double lo = e[j];
        const double hi = e[j + 1];
        const double frac = hi > lo ? (zc - lo) / (hi - lo) : 0.5;
        return top + grid_h - (static_cast<double>(j) + frac) * cell_h;
    };

    std::ofstream f(path, std::ios::binary);
    if (!f) {
        throw DataError("cannot write heatmap '" + path + "'");
    }
    f << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << f1(width) << "\" height=\""
      << f1(height) << "\" viewBox=\"0 0 " << f1(width) << " " << f1(height) << "\">\n";
    f << "<rect width=\"" << f1(width) << "\" height=\"" << f1(height)
      << "\" fill=\"#ffffff\"/>\n";
    f << "<text x=\"" << f1(left) << "\" y=\"20\" font-family=\"sans-serif\" font-size=\"13\">"
      << table.var_name << " \xe2\x80\x94 one-step-ahead predictive distribution</text>\n";

    // Probability cells, darker = more likely.
    for (size_t i = 0; i < n; ++i) {
        const double x = left + cell_w * static_cast<double>(i);
        for (size_t j = 0; j < J; ++j) {
            const double y = top + cell_h * static_cast<double>(J - 1 - j);
            f << "<rect x=\"" << f1(x) << "\" y=\"" << f1(y) << "\" width=\"" << f1(cell_w)
              << "\" height=\"" << f1(cell_h) << "\" fill=\"" << gray_fill(table.rows[i].probs[j])
              << "\"/>\n";
        }
    }

    // Point predictions: a horizontal bar in the argmax cell, green when it
    // matches the realized token, red otherwise.
    for (size_t i = 0; i < n; ++i) {
        const ForecastRow& r = table.rows[i];
        const double x = left + cell_w * static_cast<double>(i);
        const double y =
            top + cell_h * static_cast<double>(J - 1 - static_cast<size_t>(r.predicted_token)) +
            cell_h / 2.0 - 2.0;
        f << "<rect x=\"" << f1(x + 2.0) << "\" y=\"" << f1(y) << "\" width=\""
          << f1(cell_w - 4.0) << "\" height=\"4\" fill=\"" << (r.correct ? "#2e8b57" : "#d94040")
          << "\"/>\n";
    }

    // Realized values as a line through the grid.
    f << "<polyline fill=\"none\" stroke=\"#1f5fbf\" stroke-width=\"1.5\" points=\"";
    for (size_t i = 0; i < n; ++i) {
        const double z = (table.rows[i].realized_value - table.mean) / table.stddev;
        const double x = left + cell_w * (static_cast<double>(i) + 0.5);
        f << (i ? " " : "") << f1(x) << "," << f1(y_of_value(z));
    }
    f << "\"/>\n";

    // Bin boundaries in natural units on the vertical axis.
    for (size_t j = 0; j <= J; ++j) {
        const double y = top + grid_h - cell_h * static_cast<double>(j);
        const double natural = e[j] * table.stddev + table.mean;
        f << "<line x1=\"" << f1(left - 4.0) << "\" y1=\"" << f1(y) << "\" x2=\"" << f1(left)
          << "\" y2=\"" << f1(y) << "\" stroke=\"#000000\"/>\n";
        f << "<text x=\"" << f1(left - 8.0) << "\" y=\"" << f1(y + 3.0)
          << "\" font-family=\"sans-serif\" font-size=\"9\" text-anchor=\"end\">" << f2(natural)
          << "</text>\n";
    }

    // Period labels along the bottom, thinned to every fourth quarter.
    const size_t stride = n > 8 ? 4 : 1;
    for (size_t i = 0; i < n; i += stride) {
        const double x = left + cell_w * (static_cast<double>(i) + 0.5);
        f << "<text x=\"" << f1(x) << "\" y=\"" << f1(top + grid_h + 16.0)
          << "\" font-family=\"sans-serif\" font-size=\"9\" text-anchor=\"middle\">"
          << table.rows[i].period.to_string() << "</text>\n";
    }

    // Legend.
    const double ly = top + grid_h + 36.0;
    f << "<rect x=\"" << f1(left) << "\" y=\"" << f1(ly) << "\" width=\"18\" height=\"4\" "
      << "fill=\"#2e8b57\"/>\n";
    f << "<text x=\"" << f1(left + 24.0) << "\" y=\"" << f1(ly + 5.0)
      << "\" font-family=\"sans-serif\" font-size=\"9\">correct prediction</text>\n";
    f << "<rect x=\"" << f1(left + 120.0) << "\" y=\"" << f1(ly) << "\" width=\"18\" "
      << "height=\"4\" fill=\"#d94040\"/>\n";
    f << "<text x=\"" << f1(left + 144.0) << "\" y=\"" << f1(ly + 5.0)
      << "\" font-family=\"sans-serif\" font-size=\"9\">missed prediction</text>\n";
    f << "<line x1=\"" << f1(left + 240.0) << "\" y1=\"" << f1(ly + 2.0) << "\" x2=\""
      << f1(left + 258.0) << "\" y2=\"" << f1(ly + 2.0)
      << "\" stroke=\"#1f5fbf\" stroke-width=\"1.5\"/>\n";
    f << "<text x=\"" << f1(left + 264.0) << "\" y=\"" << f1(ly + 5.0)
      << "\" font-family=\"sans-serif\" font-size=\"9\">realized value</text>\n";
    f << "</svg>\n";
}

// ---------------------------------------------------------------------------
// Combined report
// ---------------------------------------------------------------------------

void save_report_csv(const std::vector<AccuracyRow>& rows, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) {
        throw DataError("cannot write report '" + path + "'");
    }
    f << "variable,n,exact_accuracy,adjacent_accuracy,mean_abs_token_error,log_score,"
      << "clamp_count\n";
    for (const AccuracyRow& r : rows) {
        f << r.var_name << "," << r.n << "," << g17(r.exact_accuracy) << ","
          << g17(r.adjacent_accuracy) << "," << g17(r.mean_abs_error) << "," << g17(r.log_score)
          << "," << r.clamp_count << "\n";
    }
}

std::string report_text(const std::vector<AccuracyRow>& rows) {
    std::string out;
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%-24s %5s %8s %8s %8s %10s %7s\n", "variable", "n", "exact",
                  "adjacent", "mae", "log_score", "clamped");
    out += buf;
    for (const AccuracyRow& r : rows) {
        std::snprintf(buf, sizeof(buf), "%-24s %5zu %8.3f %8.3f %8.3f %10.3f %7zu\n",
                      r.var_name.c_str(), r.n, r.exact_accuracy, r.adjacent_accuracy,
                      r.mean_abs_error, r.log_score, r.clamp_count);
        out += buf;
    }
    return out;
}

}  // namespace macrocast
