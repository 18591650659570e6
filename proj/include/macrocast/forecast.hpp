#pragma once

#include <functional>
#include <string>
#include <vector>

#include "macrocast/panel.hpp"
#include "macrocast/tokenizer.hpp"

namespace macrocast {

// One test quarter: the full predictive token distribution plus what
// actually happened.
struct ForecastRow {
    QuarterDate period;
    double realized_value = 0.0;  // natural units, as ingested
    int realized_token = 0;
    int predicted_token = 0;  // argmax, ties to the lowest index
    bool correct = false;
    std::vector<double> probs;  // J entries
};

struct ForecastTable {
    std::string var_name;
    size_t vocab = 0;  // J
    std::vector<ForecastRow> rows;
    size_t clamp_count = 0;          // test values outside the fitted token range
    std::vector<double> boundaries;  // J+1 standardized bin edges of the target
    double mean = 0.0;               // target's standardization moments, used to
    double stddev = 1.0;             // label axes in natural units
};

// Maps a T*K t-major context window of token ids to a J-vector of
// probabilities. Wraps predict_distribution in production; tests substitute
// hand-built stubs.
using Predictor = std::function<std::vector<double>(const std::vector<int>&)>;

// One-step-ahead evaluation over the test segment: the context for period t
// is the T quarters strictly before t, standardized with training stats and
// tokenized with the supplied spec. Realized history only — predictions are
// never fed back.
ForecastTable rolling_forecast(const Predictor& predict, const Panel& full_real,
                               const PartitionSpec& partition, const StandardizationStats& stats,
                               const TokenizerSpec& tokenizer, size_t target_var, size_t context);

// Accuracy metrics for one variable's table.
struct AccuracyRow {
    std::string var_name;
    size_t n = 0;
    double exact_accuracy = 0.0;     // predicted token == realized token
    double adjacent_accuracy = 0.0;  // |predicted - realized| <= 1
    double mean_abs_error = 0.0;     // mean |predicted - realized| in tokens
    double log_score = 0.0;          // mean log probability of the realized token
    size_t clamp_count = 0;
};

AccuracyRow score(const ForecastTable& table);

// CSV schema: period,realized_value,realized_token,predicted_token,
// correct_flag,p0..p{J-1}. Round-trips through load_forecast_csv.
void save_forecast_csv(const ForecastTable& table, const std::string& path);
ForecastTable load_forecast_csv(const std::string& path);

// Standalone SVG: grayscale probability grid (one column per test quarter,
// one row per token), the realized-value line, green/red point-prediction
// bars, and natural-unit bin-boundary labels on the vertical axis.
void save_heatmap_svg(const ForecastTable& table, const std::string& path);

// Combined accuracy report across variables.
void save_report_csv(const std::vector<AccuracyRow>& rows, const std::string& path);
std::string report_text(const std::vector<AccuracyRow>& rows);

}  // namespace macrocast
