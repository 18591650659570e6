#include "macrocast/simulator.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "macrocast/errors.hpp"

namespace macrocast {

// ---------------------------------------------------------------------------
// Spectral radius
// ---------------------------------------------------------------------------

double spectral_radius(const std::vector<double>& m, size_t n) {
    if (m.size() != n * n) {
        throw NumericError("spectral_radius: matrix size mismatch");
    }
    if (n == 0) {
        return 0.0;
    }
    // rho(G) = lim ||G^(2^j)||^(1/2^j). Square repeatedly with Frobenius
    // normalization; the accumulated log scale converges to log rho well
    // below 1e-8 within ~60 squarings.
    std::vector<double> b = m;
    std::vector<double> next(n * n);
    double log_scale = 0.0;   // log ||G^(2^j)||_F estimate accumulator
    double weight = 1.0;      // 1 / 2^j
    double prev_estimate = -1.0;
    for (int iter = 0; iter < 200; ++iter) {
        double norm = 0.0;
        for (double v : b) {
            norm += v * v;
        }
        norm = std::sqrt(norm);
        if (norm == 0.0) {
            return 0.0;  // nilpotent
        }
        log_scale += weight * std::log(norm);
        const double estimate = std::exp(log_scale);
        if (prev_estimate >= 0.0 && std::abs(estimate - prev_estimate) <= 1e-10 * (1.0 + estimate)) {
            return estimate;
        }
        prev_estimate = estimate;

        const double inv = 1.0 / norm;
        for (size_t i = 0; i < n * n; ++i) {
            b[i] *= inv;
        }
        for (size_t i = 0; i < n; ++i) {
            for (size_t j = 0; j < n; ++j) {
                double acc = 0.0;
                for (size_t k = 0; k < n; ++k) {
                    acc += b[i * n + k] * b[k * n + j];
                }
                next[i * n + j] = acc;
            }
        }
        b.swap(next);
        weight *= 0.5;
    }
    return prev_estimate;
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

std::optional<std::string> validate_draw(const PosteriorDraw& draw) {
    const size_t n = draw.n;
    const size_t q = draw.q;
    const size_t K = draw.K;
    if (n == 0 || q == 0 || K == 0) {
        return "empty dimensions";
    }
    if (draw.G.size() != n * n || draw.R.size() != n * q || draw.H.size() != K * n ||
        draw.d.size() != K || draw.sv.size() != q || draw.nu.size() != q) {
        return "dimension mismatch";
    }
    for (const auto* mat : {&draw.G, &draw.R, &draw.H, &draw.d, &draw.nu}) {
        for (double v : *mat) {
            if (!std::isfinite(v)) {
                return "non-finite entries";
            }
        }
    }
    for (const auto& sv : draw.sv) {
        if (!std::isfinite(sv.mu) || !std::isfinite(sv.rho) || !std::isfinite(sv.sigma_eta)) {
            return "non-finite entries";
        }
        if (!(std::abs(sv.rho) < 1.0)) {
            return "log-variance persistence |rho| >= 1";
        }
        if (sv.sigma_eta < 0.0) {
            return "negative log-variance innovation std";
        }
    }
    for (double nu : draw.nu) {
        if (!(nu > 2.0)) {
            return "degrees of freedom <= 2";
        }
    }
    if (!(spectral_radius(draw.G, n) < 1.0)) {
        return "unstable transition";
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Draw file format
//
//   STATESPACE_DRAWS 1
//   n <n> q <q> K <K> count <count>
//   DRAW <i>
//   G    (n lines of n values)
//   R    (n lines of q values)
//   H    (K lines of n values)
//   d    (one line of K values)
//   SV   (q lines of "mu rho sigma_eta")
//   NU   (one line of q values)
//   END
// ---------------------------------------------------------------------------

namespace {

void write_row(std::ostream& os, const double* v, size_t count) {
    char buf[64];
    for (size_t i = 0; i < count; ++i) {
        std::snprintf(buf, sizeof(buf), "%.17g", v[i]);
        os << (i ? " " : "") << buf;
    }
    os << "\n";
}

void expect_word(std::istream& is, const std::string& expected) {
    std::string word;
    if (!(is >> word) || word != expected) {
        throw DataError("posterior draw file: expected '" + expected + "', got '" + word + "'");
    }
}

void read_values(std::istream& is, std::vector<double>& out, size_t count,
                 const std::string& what) {
    out.resize(count);
    for (size_t i = 0; i < count; ++i) {
        if (!(is >> out[i])) {
            throw DataError("posterior draw file: truncated while reading " + what);
        }
    }
}

}  // namespace

void save_posterior_draws(const std::string& path, const std::vector<PosteriorDraw>& draws) {
    if (draws.empty()) {
        throw DataError("refusing to write an empty draw file");
    }
    std::ofstream os(path);
    if (!os.is_open()) {
        throw DataError("cannot write draw file: " + path);
    }
    const auto& first = draws.front();
    os << "STATESPACE_DRAWS 1\n";
    os << "n " << first.n << " q " << first.q << " K " << first.K << " count " << draws.size()
       << "\n";
    for (size_t i = 0; i < draws.size(); ++i) {
        const auto& dr = draws[i];
        os << "DRAW " << i << "\n";
        os << "G\n";
        for (size_t r = 0; r < dr.n; ++r) {
            write_row(os, dr.G.data() + r * dr.n, dr.n);
        }
        os << "R\n";
        for (size_t r = 0; r < dr.n; ++r) {
            write_row(os, dr.R.data() + r * dr.q, dr.q);
        }
        os << "H\n";
        for (size_t r = 0; r < dr.K; ++r) {
            write_row(os, dr.H.data() + r * dr.n, dr.n);
        }
        os << "d\n";
        write_row(os, dr.d.data(), dr.K);
        os << "SV\n";
        for (const auto& sv : dr.sv) {
            const double row[3] = {sv.mu, sv.rho, sv.sigma_eta};
            write_row(os, row, 3);
        }
        os << "NU\n";
        write_row(os, dr.nu.data(), dr.q);
        os << "END\n";
    }
}

DrawLoadResult load_posterior_draws(const std::string& path,
                                    const std::vector<std::string>& var_names) {
    std::ifstream is(path);
    if (!is.is_open()) {
        throw DataError("cannot open draw file: " + path);
    }
    expect_word(is, "STATESPACE_DRAWS");
    int version = 0;
    if (!(is >> version) || version != 1) {
        throw DataError("posterior draw file: unsupported version");
    }
    size_t n = 0;
    size_t q = 0;
    size_t K = 0;
    size_t count = 0;
    expect_word(is, "n");
    is >> n;
    expect_word(is, "q");
    is >> q;
    expect_word(is, "K");
    is >> K;
    expect_word(is, "count");
    is >> count;
    if (!is || n == 0 || q == 0 || K == 0 || count == 0) {
        throw DataError("posterior draw file: bad header");
    }
    if (!var_names.empty() && var_names.size() != K) {
        throw DataError("posterior draw file has K=" + std::to_string(K) + ", config expects " +
                        std::to_string(var_names.size()) + " variables");
    }

    DrawLoadResult result;
    for (size_t i = 0; i < count; ++i) {
        expect_word(is, "DRAW");
        size_t idx = 0;
        is >> idx;
        PosteriorDraw dr;
        dr.n = n;
        dr.q = q;
        dr.K = K;
        expect_word(is, "G");
        read_values(is, dr.G, n * n, "G");
        expect_word(is, "R");
        read_values(is, dr.R, n * q, "R");
        expect_word(is, "H");
        read_values(is, dr.H, K * n, "H");
        expect_word(is, "d");
        read_values(is, dr.d, K, "d");
        expect_word(is, "SV");
        dr.sv.resize(q);
        for (size_t s = 0; s < q; ++s) {
            std::vector<double> row;
            read_values(is, row, 3, "SV");
            dr.sv[s] = {row[0], row[1], row[2]};
        }
        expect_word(is, "NU");
        read_values(is, dr.nu, q, "NU");
        expect_word(is, "END");

        if (auto reason = validate_draw(dr)) {
            result.rejected.emplace_back(idx, *reason);
        } else {
            result.draws.push_back(std::move(dr));
        }
    }
    if (result.draws.empty()) {
        throw DataError("all " + std::to_string(count) + " posterior draws were rejected");
    }
    return result;
}

// ---------------------------------------------------------------------------
// Simulation
// ---------------------------------------------------------------------------

double draw_innovation(double nu, Rng& rng) {
    return rng.student_t_unit(nu);
}

std::vector<double> simulate_sv_path(const SvParams& sv, size_t steps, Rng& rng) {
    std::vector<double> h(steps);
    double prev = sv.mu;
    for (size_t t = 0; t < steps; ++t) {
        prev = (1.0 - sv.rho) * sv.mu + sv.rho * prev + sv.sigma_eta * rng.normal();
        h[t] = prev;
    }
    return h;
}

Panel simulate_trajectory(const PosteriorDraw& draw, size_t length, size_t burn_in,
                          uint64_t seed, const std::vector<std::string>& var_names) {
    if (auto reason = validate_draw(draw)) {
        throw DataError("invalid posterior draw: " + *reason);
    }
    const size_t n = draw.n;
    const size_t q = draw.q;
    const size_t K = draw.K;
    const size_t total = burn_in + length;

    Rng rng(seed);

    // Per-shock log-variance paths first, then the innovation stream; the
    // call order is part of the determinism contract.
    std::vector<std::vector<double>> h(q);
    for (size_t i = 0; i < q; ++i) {
        h[i] = simulate_sv_path(draw.sv[i], total, rng);
    }

    Panel panel;
    panel.var_names = var_names.empty() ? std::vector<std::string>(K, "") : var_names;
    if (panel.var_names.size() != K) {
        throw DataError("variable name count does not match observation dimension");
    }
    panel.values.reserve(length * K);

    std::vector<double> state(n, 0.0);
    std::vector<double> next(n);
    std::vector<double> scaled_eps(q);
    for (size_t t = 0; t < total; ++t) {
        for (size_t i = 0; i < q; ++i) {
            const double sigma = std::exp(0.5 * h[i][t]);
            scaled_eps[i] = sigma * draw_innovation(draw.nu[i], rng);
        }
        for (size_t r = 0; r < n; ++r) {
            double acc = 0.0;
            for (size_t c = 0; c < n; ++c) {
                acc += draw.G[r * n + c] * state[c];
            }
            for (size_t c = 0; c < q; ++c) {
                acc += draw.R[r * q + c] * scaled_eps[c];
            }
            next[r] = acc;
        }
        state.swap(next);
        if (t < burn_in) {
            continue;
        }
        for (size_t k = 0; k < K; ++k) {
            double acc = draw.d[k];
            for (size_t c = 0; c < n; ++c) {
                acc += draw.H[k * n + c] * state[c];
            }
            if (!std::isfinite(acc)) {
                throw NumericError("numerical overflow in trajectory at period " +
                                   std::to_string(t - burn_in));
            }
            panel.values.push_back(acc);
        }
    }
    return panel;
}

SyntheticCorpus generate_corpus(const std::vector<PosteriorDraw>& draws,
                                const SimulationPlan& plan,
                                const std::vector<std::string>& var_names) {
    if (draws.empty()) {
        throw DataError("generate_corpus requires at least one posterior draw");
    }
    SyntheticCorpus corpus;
    corpus.panels.reserve(plan.trajectories);
    corpus.draw_index.reserve(plan.trajectories);
    corpus.seeds.reserve(plan.trajectories);

    // One selection stream per trajectory so the pairing is independent of
    // any parallel decomposition of the m-loop.
    for (size_t m = 0; m < plan.trajectories; ++m) {
        Rng select(derive_seed(plan.base_seed, "corpus-draw-select", m));
        const size_t which = select.uniform_index(draws.size());
        const uint64_t seed = derive_seed(plan.base_seed, "corpus-trajectory", m);
        try {
            corpus.panels.push_back(
                simulate_trajectory(draws[which], plan.length, plan.burn_in, seed, var_names));
        } catch (const std::exception& e) {
            throw NumericError("trajectory " + std::to_string(m) + ": " + e.what());
        }
        corpus.draw_index.push_back(which);
        corpus.seeds.push_back(seed);
    }
    return corpus;
}

// ---------------------------------------------------------------------------
// Corpus CSV
// ---------------------------------------------------------------------------

void save_corpus_csv(const std::string& path, const SyntheticCorpus& corpus) {
    std::ofstream os(path);
    if (!os.is_open()) {
        throw DataError("cannot write corpus file: " + path);
    }
    if (corpus.panels.empty()) {
        throw DataError("corpus is empty");
    }
    os << "panel_id";
    for (const auto& name : corpus.panels.front().var_names) {
        os << "," << name;
    }
    os << "\n";
    char buf[64];
    for (size_t m = 0; m < corpus.panels.size(); ++m) {
        const Panel& p = corpus.panels[m];
        const size_t K = p.num_vars();
        for (size_t r = 0; r < p.rows(); ++r) {
            os << m;
            for (size_t k = 0; k < K; ++k) {
                std::snprintf(buf, sizeof(buf), "%.17g", p.at(r, k));
                os << "," << buf;
            }
            os << "\n";
        }
    }
}

std::vector<Panel> load_corpus_csv(const std::string& path,
                                   const std::vector<std::string>& expected_vars) {
    std::ifstream is(path);
    if (!is.is_open()) {
        throw DataError("cannot open corpus file: " + path);
    }
    std::string line;
    if (!std::getline(is, line)) {
        throw DataError("empty corpus file: " + path);
    }
    {
        std::stringstream header(line);
        std::string cell;
        std::getline(header, cell, ',');
        if (cell != "panel_id") {
            throw DataError("corpus file must start with a panel_id column");
        }
        size_t k = 0;
        while (std::getline(header, cell, ',')) {
            if (k >= expected_vars.size() || cell != expected_vars[k]) {
                throw DataError("corpus header does not match configured variables");
            }
            ++k;
        }
        if (k != expected_vars.size()) {
            throw DataError("corpus header does not match configured variables");
        }
    }

    std::vector<Panel> panels;
    long long current_id = -1;
    const size_t K = expected_vars.size();
    size_t row_no = 1;
    while (std::getline(is, line)) {
        if (line.empty()) {
            continue;
        }
        ++row_no;
        std::stringstream ss(line);
        std::string cell;
        std::getline(ss, cell, ',');
        const long long id = std::stoll(cell);
        if (id != current_id) {
            if (id != current_id + 1) {
                throw DataError("corpus panel ids must be contiguous, jumped to " +
                                std::to_string(id) + " at line " + std::to_string(row_no));
            }
            current_id = id;
            panels.emplace_back();
            panels.back().var_names = expected_vars;
        }
        size_t k = 0;
        while (std::getline(ss, cell, ',')) {
            if (k >= K) {
                throw DataError("too many cells at corpus line " + std::to_string(row_no));
            }
            panels.back().values.push_back(std::stod(cell));
            ++k;
        }
        if (k != K) {
            throw DataError("missing cells at corpus line " + std::to_string(row_no));
        }
    }
    if (panels.empty()) {
        throw DataError("corpus file has no data rows: " + path);
    }
    return panels;
}

}  // namespace macrocast
