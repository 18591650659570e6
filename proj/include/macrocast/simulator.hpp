#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "macrocast/panel.hpp"
#include "macrocast/rng.hpp"

namespace macrocast {

// ---------------------------------------------------------------------------
// Posterior draws
// ---------------------------------------------------------------------------

// AR(1) law of motion for one shock's log variance:
//   h_t = (1 - rho) * mu + rho * h_{t-1} + sigma_eta * eta_t,  eta ~ N(0,1).
struct SvParams {
    double mu = 0.0;         // long-run log variance
    double rho = 0.0;        // persistence, |rho| < 1
    double sigma_eta = 0.0;  // log-variance innovation std, >= 0
};

// One solved parameter draw of the state-space system
//   s_t = G s_{t-1} + R diag(sigma_t) eps_t,   y_t = d + H s_t,
// with unit-variance Student-t eps and per-shock stochastic volatility.
struct PosteriorDraw {
    std::vector<double> G;      // n x n, row-major
    std::vector<double> R;      // n x q
    std::vector<double> H;      // K x n
    std::vector<double> d;      // K
    std::vector<SvParams> sv;   // q
    std::vector<double> nu;     // q, each > 2
    size_t n = 0;
    size_t q = 0;
    size_t K = 0;
};

struct SimulationPlan {
    size_t trajectories = 1;    // M
    size_t length = 1;          // S, quarters kept per trajectory
    size_t burn_in = 100;       // discarded initial quarters
    uint64_t base_seed = 0;
};

struct SyntheticCorpus {
    std::vector<Panel> panels;        // M panels of S rows each
    std::vector<size_t> draw_index;   // which draw produced each panel
    std::vector<uint64_t> seeds;      // per-panel derived seed
};

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

// Spectral radius of a dense square matrix via the normalized matrix-power
// method (repeated squaring), accurate to ~1e-8.
double spectral_radius(const std::vector<double>& m, size_t n);

// Empty result means the draw is valid; otherwise the rejection reason.
std::optional<std::string> validate_draw(const PosteriorDraw& draw);

struct DrawLoadResult {
    std::vector<PosteriorDraw> draws;
    std::vector<std::pair<size_t, std::string>> rejected;  // (index in file, reason)
};

DrawLoadResult load_posterior_draws(const std::string& path,
                                    const std::vector<std::string>& var_names);
void save_posterior_draws(const std::string& path, const std::vector<PosteriorDraw>& draws);

// Unit-variance Student-t innovation; nu must exceed 2.
double draw_innovation(double nu, Rng& rng);

// Log-variance path for one shock, h_0 at the unconditional mean mu.
std::vector<double> simulate_sv_path(const SvParams& sv, size_t steps, Rng& rng);

// Simulates one trajectory; the returned panel has exactly `length` rows and
// K columns, with no time labels. Identical (draw, seed) pairs give
// bit-identical panels.
Panel simulate_trajectory(const PosteriorDraw& draw, size_t length, size_t burn_in,
                          uint64_t seed, const std::vector<std::string>& var_names);

// Simulates the full corpus: one uniformly resampled draw per trajectory,
// seeds derived from (base_seed, m) so the result does not depend on worker
// scheduling.
SyntheticCorpus generate_corpus(const std::vector<PosteriorDraw>& draws,
                                const SimulationPlan& plan,
                                const std::vector<std::string>& var_names);

// Columnar corpus file: header `panel_id,<vars...>`, one row per observation.
void save_corpus_csv(const std::string& path, const SyntheticCorpus& corpus);
std::vector<Panel> load_corpus_csv(const std::string& path,
                                   const std::vector<std::string>& expected_vars);

}  // namespace macrocast
