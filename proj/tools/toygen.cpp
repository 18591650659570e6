// Generates a small self-consistent fixture set for exercising the pipeline:
// a three-variable quarterly "real" panel (312 rows, 1947Q3-2025Q2), a file
// of toy posterior draws, and a run configuration sized so the whole
// simulate -> tokenize -> train -> forecast -> report chain finishes in
// seconds. Deterministic in the seed.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "macrocast/errors.hpp"
#include "macrocast/panel.hpp"
#include "macrocast/rng.hpp"
#include "macrocast/simulator.hpp"

namespace mc = macrocast;

namespace {

std::string g17(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// A stable random state-space draw: dense G rescaled to a target spectral
// radius, mild stochastic volatility, moderately fat tails.
mc::PosteriorDraw make_draw(mc::Rng& rng, double radius, size_t n, size_t q, size_t K) {
    mc::PosteriorDraw d;
    d.n = n;
    d.q = q;
    d.K = K;
    d.G.resize(n * n);
    for (double& v : d.G) {
        v = rng.normal() * 0.5;
    }
    const double rho = mc::spectral_radius(d.G, n);
    for (double& v : d.G) {
        v *= radius / rho;
    }
    d.R.resize(n * q);
    for (double& v : d.R) {
        v = rng.normal() * 0.6;
    }
    d.H.resize(K * n);
    for (double& v : d.H) {
        v = rng.normal() * 0.8;
    }
    d.d.resize(K);
    for (double& v : d.d) {
        v = rng.normal() * 0.3;
    }
    for (size_t i = 0; i < q; ++i) {
        mc::SvParams sv;
        sv.mu = -0.8 + 0.3 * rng.normal();
        sv.rho = 0.9;
        sv.sigma_eta = 0.15;
        d.sv.push_back(sv);
        d.nu.push_back(5.0 + 2.0 * static_cast<double>(i));
    }
    return d;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"generate a toy fixture set (real.csv, draws.txt, run.conf)"};
    std::string dir;
    uint64_t seed = 20240501;
    app.add_option("dir", dir, "output directory")->required();
    app.add_option("--seed", seed, "fixture seed");
    CLI11_PARSE(app, argc, argv);

    try {
        std::filesystem::create_directories(dir);
        const std::vector<std::string> vars = {"output_growth", "inflation", "interest_rate"};

        // Posterior draws.
        mc::Rng rng(seed);
        std::vector<mc::PosteriorDraw> draws;
        for (int i = 0; i < 3; ++i) {
            draws.push_back(make_draw(rng, 0.6 + 0.1 * i, 3, 2, vars.size()));
        }
        const std::string draws_path = dir + "/draws.txt";
        mc::save_posterior_draws(draws_path, draws);

        // The "real" panel: one long trajectory from its own draw, dated so
        // the default 50/231/31 partition applies.
        const mc::PosteriorDraw real_draw = make_draw(rng, 0.75, 3, 2, vars.size());
        mc::Panel real = mc::simulate_trajectory(real_draw, 312, 100,
                                                 mc::derive_seed(seed, "toy-real", 0), vars);
        const mc::QuarterDate start{1947, 3};
        for (int i = 0; i < 312; ++i) {
            real.times.push_back(start.plus(i));
        }
        const std::string real_path = dir + "/real.csv";
        {
            std::ofstream f(real_path, std::ios::binary);
            if (!f) {
                throw mc::DataError("cannot write '" + real_path + "'");
            }
            f << "date";
            for (const auto& v : vars) {
                f << "," << v;
            }
            f << "\n";
            for (size_t r = 0; r < real.rows(); ++r) {
                f << real.times[r].to_string();
                for (size_t k = 0; k < vars.size(); ++k) {
                    f << "," << g17(real.at(r, k));
                }
                f << "\n";
            }
        }

        // Run configuration sized for seconds-long end-to-end runs.
        const std::string conf_path = dir + "/run.conf";
        {
            std::ofstream f(conf_path, std::ios::binary);
            if (!f) {
                throw mc::DataError("cannot write '" + conf_path + "'");
            }
            f << "# toy pipeline fixture\n";
            f << "real_csv = " << real_path << "\n";
            f << "posterior_draws = " << draws_path << "\n";
            f << "output_dir = " << dir << "/out\n";
            f << "var_names = output_growth, inflation, interest_rate\n";
            f << "embed_dim = 12\n";
            f << "layers = 1\n";
            f << "heads = 2\n";
            f << "context_len = 4\n";
            f << "tokens_per_var = 10\n";
            f << "mlp_factor = 2\n";
            f << "batch_size = 32\n";
            f << "real_mix = 0.1\n";
            f << "learning_rate = 0.003\n";
            f << "max_steps = 300\n";
            f << "eval_interval = 50\n";
            f << "patience = 8\n";
            f << "validation_fraction = 0.15\n";
            f << "trajectories = 20\n";
            f << "trajectory_len = 120\n";
            f << "burn_in = 50\n";
            f << "base_seed = 1337\n";
        }

        std::cout << "wrote " << real_path << ", " << draws_path << ", " << conf_path << "\n";
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
