#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "macrocast/panel.hpp"

namespace macrocast {

// Per-variable decile-style bin edges fitted on pooled training data.
// boundaries[k] holds J+1 non-decreasing edges; edge 0 is the empirical
// minimum and edge J the empirical maximum of the fitting pool.
struct TokenizerSpec {
    std::vector<std::vector<double>> boundaries;  // K x (J+1)
    size_t J = 0;
    std::vector<std::string> var_names;

    size_t num_vars() const { return boundaries.size(); }
};

// Discretized panel; every entry lies in 0..J-1.
struct TokenPanel {
    std::vector<uint8_t> tokens;  // row-major, rows x K
    std::vector<QuarterDate> times;  // empty for synthetic panels
    size_t K = 0;

    size_t rows() const { return K == 0 ? 0 : tokens.size() / K; }
    uint8_t at(size_t row, size_t col) const { return tokens[row * K + col]; }
};

// Empirical quantile at level p in [0,1] with linear interpolation between
// closest order statistics. `sorted` must be ascending.
double quantile_sorted(const std::vector<double>& sorted, double p);

// Fits per-variable bin edges on the pooled panels. Every panel must carry
// the same K variables; each variable needs at least J distinct pooled values.
TokenizerSpec fit_tokenizer(const std::vector<const Panel*>& pool, size_t J);

// Maps each value to the largest j with boundaries[k][j] <= v, clamped to
// 0..J-1 (bins left-closed, last bin closed; out-of-range values clamp to
// the extreme tokens).
TokenPanel encode(const Panel& panel, const TokenizerSpec& spec);
int encode_value(double v, const std::vector<double>& edges, size_t J);

// Half-open value interval represented by one token.
std::pair<double, double> token_interval(size_t var, int token, const TokenizerSpec& spec);

// Text block embedded in checkpoints (and written by the tokenize command).
std::string tokenizer_to_text(const TokenizerSpec& spec);
TokenizerSpec tokenizer_from_text(const std::string& text);

}  // namespace macrocast
