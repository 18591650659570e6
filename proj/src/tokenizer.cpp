#include "macrocast/tokenizer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "macrocast/errors.hpp"

namespace macrocast {

double quantile_sorted(const std::vector<double>& sorted, double p) {
    if (sorted.empty()) {
        throw DataError("quantile of an empty sample");
    }
    const size_t n = sorted.size();
    if (n == 1) {
        return sorted[0];
    }
    const double h = p * static_cast<double>(n - 1);
    const size_t lo = std::min(static_cast<size_t>(h), n - 2);
    const double frac = h - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

TokenizerSpec fit_tokenizer(const std::vector<const Panel*>& pool, size_t J) {
    if (J < 2) {
        throw ConfigError("tokenizer needs at least 2 bins");
    }
    if (pool.empty()) {
        throw DataError("tokenizer fitting pool is empty");
    }
    const size_t K = pool.front()->num_vars();
    for (const Panel* p : pool) {
        if (p->num_vars() != K) {
            throw DataError("panels in the fitting pool have inconsistent variable counts");
        }
    }

    TokenizerSpec spec;
    spec.J = J;
    spec.var_names = pool.front()->var_names;
    spec.boundaries.resize(K);

    std::vector<double> column;
    for (size_t k = 0; k < K; ++k) {
        column.clear();
        for (const Panel* p : pool) {
            const size_t rows = p->rows();
            for (size_t r = 0; r < rows; ++r) {
                column.push_back(p->at(r, k));
            }
        }
        std::sort(column.begin(), column.end());

        size_t distinct = column.empty() ? 0 : 1;
        for (size_t i = 1; i < column.size() && distinct < J; ++i) {
            if (column[i] != column[i - 1]) {
                ++distinct;
            }
        }
        if (distinct < J) {
            throw DataError("variable '" + spec.var_names[k] +
                            "': degenerate distribution (fewer than " + std::to_string(J) +
                            " distinct values)");
        }

        auto& edges = spec.boundaries[k];
        edges.resize(J + 1);
        for (size_t j = 0; j <= J; ++j) {
            edges[j] = quantile_sorted(column, static_cast<double>(j) / static_cast<double>(J));
        }
    }
    return spec;
}

int encode_value(double v, const std::vector<double>& edges, size_t J) {
    if (!std::isfinite(v)) {
        throw DataError("cannot tokenize a non-finite value");
    }
    // Largest j with edges[j] <= v, clamped into 0..J-1.
    const auto it = std::upper_bound(edges.begin(), edges.end(), v);
    const long j = static_cast<long>(it - edges.begin()) - 1;
    if (j < 0) {
        return 0;
    }
    if (j >= static_cast<long>(J)) {
        return static_cast<int>(J) - 1;
    }
    return static_cast<int>(j);
}

TokenPanel encode(const Panel& panel, const TokenizerSpec& spec) {
    const size_t K = spec.num_vars();
    if (panel.num_vars() != K) {
        throw DataError("panel has " + std::to_string(panel.num_vars()) +
                        " variables, tokenizer expects " + std::to_string(K));
    }
    TokenPanel out;
    out.K = K;
    out.times = panel.times;
    out.tokens.reserve(panel.values.size());
    for (size_t r = 0; r < panel.rows(); ++r) {
        for (size_t k = 0; k < K; ++k) {
            out.tokens.push_back(
                static_cast<uint8_t>(encode_value(panel.at(r, k), spec.boundaries[k], spec.J)));
        }
    }
    return out;
}

std::pair<double, double> token_interval(size_t var, int token, const TokenizerSpec& spec) {
    if (var >= spec.num_vars()) {
        throw DataError("token_interval: variable index out of range");
    }
    if (token < 0 || static_cast<size_t>(token) >= spec.J) {
        throw DataError("token_interval: token " + std::to_string(token) + " out of 0.." +
                        std::to_string(spec.J - 1));
    }
    const auto& edges = spec.boundaries[var];
    return {edges[static_cast<size_t>(token)], edges[static_cast<size_t>(token) + 1]};
}

std::string tokenizer_to_text(const TokenizerSpec& spec) {
    std::ostringstream os;
    os << "TOKENIZER 1\n";
    os << "J " << spec.J << "\n";
    os << "K " << spec.num_vars() << "\n";
    char buf[64];
    for (size_t k = 0; k < spec.num_vars(); ++k) {
        os << "var " << spec.var_names[k];
        for (double edge : spec.boundaries[k]) {
            std::snprintf(buf, sizeof(buf), " %.17g", edge);
            os << buf;
        }
        os << "\n";
    }
    return os.str();
}

TokenizerSpec tokenizer_from_text(const std::string& text) {
    std::istringstream is(text);
    std::string word;
    int version = 0;
    is >> word >> version;
    if (word != "TOKENIZER" || version != 1) {
        throw DataError("unrecognized tokenizer block");
    }
    TokenizerSpec spec;
    size_t K = 0;
    is >> word >> spec.J;
    if (word != "J") {
        throw DataError("tokenizer block missing J");
    }
    is >> word >> K;
    if (word != "K") {
        throw DataError("tokenizer block missing K");
    }
    spec.boundaries.resize(K);
    for (size_t k = 0; k < K; ++k) {
        std::string name;
        is >> word >> name;
        if (word != "var" || !is) {
            throw DataError("tokenizer block truncated");
        }
        spec.var_names.push_back(name);
        spec.boundaries[k].resize(spec.J + 1);
        for (size_t j = 0; j <= spec.J; ++j) {
            if (!(is >> spec.boundaries[k][j])) {
                throw DataError("tokenizer block truncated");
            }
        }
    }
    return spec;
}

}  // namespace macrocast
