// Pipeline driver: simulate -> tokenize -> train -> forecast -> report, plus
// a built-in selftest. Every subcommand is deterministic given the config
// and writes a manifest with checksums of its inputs and outputs.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "macrocast/config.hpp"
#include "macrocast/errors.hpp"
#include "macrocast/forecast.hpp"
#include "macrocast/model.hpp"
#include "macrocast/panel.hpp"
#include "macrocast/rng.hpp"
#include "macrocast/simulator.hpp"
#include "macrocast/tensor.hpp"
#include "macrocast/tokenizer.hpp"
#include "macrocast/trainer.hpp"

namespace mc = macrocast;

namespace {

// ---------------------------------------------------------------------------
// Manifests
// ---------------------------------------------------------------------------

std::string checksum_hex(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) {
        throw mc::DataError("cannot open '" + path + "' for checksumming");
    }
    std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(mc::fnv1a64(bytes.data(), bytes.size())));
    return buf;
}

// Line-oriented key=value audit trail. No timestamps: manifests must be
// byte-identical across reruns of the same config.
class Manifest {
public:
    Manifest(const std::string& command, const std::string& config_path,
             const std::vector<std::string>& overrides) {
        add("command", command);
        add("config", config_path);
        add("config.checksum", checksum_hex(config_path));
        for (const auto& o : overrides) {
            add("override", o);
        }
    }

    void add(const std::string& key, const std::string& value) {
        lines_.push_back(key + "=" + value);
    }
    void add(const std::string& key, size_t value) { add(key, std::to_string(value)); }
    void add_file(const std::string& key, const std::string& path) {
        add(key, path);
        add(key + ".checksum", checksum_hex(path));
    }

    void save(const std::string& path) const {
        std::ofstream f(path, std::ios::binary);
        if (!f) {
            throw mc::DataError("cannot write manifest '" + path + "'");
        }
        for (const auto& line : lines_) {
            f << line << "\n";
        }
    }

private:
    std::vector<std::string> lines_;
};

void ensure_output_dir(const mc::RunConfig& cfg) {
    std::filesystem::create_directories(cfg.output_dir);
}

std::string g17(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

int cmd_simulate(const mc::RunConfig& cfg, const std::string& config_path,
                 const std::vector<std::string>& overrides) {
    ensure_output_dir(cfg);
    const mc::DrawLoadResult loaded = mc::load_posterior_draws(cfg.posterior_draws,
                                                               cfg.var_names);
    mc::SimulationPlan plan;
    plan.trajectories = cfg.trajectories;
    plan.length = cfg.trajectory_len;
    plan.burn_in = cfg.burn_in;
    plan.base_seed = cfg.base_seed;

    const mc::SyntheticCorpus corpus = mc::generate_corpus(loaded.draws, plan, cfg.var_names);
    mc::save_corpus_csv(cfg.corpus_path(), corpus);

    Manifest m("simulate", config_path, overrides);
    m.add_file("input.draws", cfg.posterior_draws);
    m.add("draws.loaded", loaded.draws.size());
    m.add("draws.rejected", loaded.rejected.size());
    for (const auto& [idx, reason] : loaded.rejected) {
        m.add("rejected." + std::to_string(idx), reason);
    }
    m.add("plan.trajectories", plan.trajectories);
    m.add("plan.length", plan.length);
    m.add("plan.burn_in", plan.burn_in);
    m.add("plan.base_seed", std::to_string(plan.base_seed));
    m.add("corpus.rows", plan.trajectories * plan.length);
    m.add("corpus.values", plan.trajectories * plan.length * cfg.num_vars());
    m.add_file("output.corpus", cfg.corpus_path());
    m.save(cfg.output_dir + "/simulate.manifest");

    std::cout << "simulated " << corpus.panels.size() << " panels ("
              << plan.trajectories * plan.length << " rows) -> " << cfg.corpus_path() << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// tokenize
// ---------------------------------------------------------------------------

int cmd_tokenize(const mc::RunConfig& cfg, const std::string& config_path,
                 const std::vector<std::string>& overrides) {
    ensure_output_dir(cfg);
    const mc::Panel real = mc::load_real_panel(cfg.real_csv, cfg.var_names);
    const mc::PanelPartition parts = mc::partition_panel(real, cfg.partition);
    const mc::StandardizationStats stats = mc::fit_standardization(parts.training);
    {
        std::ofstream f(cfg.stats_path(), std::ios::binary);
        if (!f) {
            throw mc::DataError("cannot write '" + cfg.stats_path() + "'");
        }
        f << mc::stats_to_text(stats);
    }

    if (!std::filesystem::exists(cfg.corpus_path())) {
        throw mc::DataError("synthetic corpus '" + cfg.corpus_path() +
                            "' not found; run `macrocast simulate` first");
    }
    const std::vector<mc::Panel> corpus = mc::load_corpus_csv(cfg.corpus_path(), cfg.var_names);

    // Pool = standardized real training segment plus the standardized corpus,
    // one observation one vote.
    std::vector<mc::Panel> standardized;
    standardized.reserve(corpus.size() + 1);
    standardized.push_back(mc::apply_standardization(parts.training, stats));
    for (const mc::Panel& p : corpus) {
        standardized.push_back(mc::apply_standardization(p, stats));
    }
    std::vector<const mc::Panel*> pool;
    pool.reserve(standardized.size());
    for (const mc::Panel& p : standardized) {
        pool.push_back(&p);
    }
    const mc::TokenizerSpec spec = mc::fit_tokenizer(pool, cfg.tokens_per_var);
    {
        std::ofstream f(cfg.tokenizer_path(), std::ios::binary);
        if (!f) {
            throw mc::DataError("cannot write '" + cfg.tokenizer_path() + "'");
        }
        f << mc::tokenizer_to_text(spec);
    }

    size_t pool_rows = 0;
    for (const mc::Panel& p : standardized) {
        pool_rows += p.rows();
    }

    Manifest m("tokenize", config_path, overrides);
    m.add_file("input.real", cfg.real_csv);
    m.add_file("input.corpus", cfg.corpus_path());
    m.add("pool.rows", pool_rows);
    m.add("tokens_per_var", cfg.tokens_per_var);
    m.add_file("output.stats", cfg.stats_path());
    m.add_file("output.tokenizer", cfg.tokenizer_path());
    m.save(cfg.output_dir + "/tokenize.manifest");

    std::cout << "fitted " << cfg.tokens_per_var << "-bin tokenizer on " << pool_rows
              << " pooled rows -> " << cfg.tokenizer_path() << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

std::string read_text_file(const std::string& path, const char* hint) {
    std::ifstream f(path, std::ios::binary);
    if (!f) {
        throw mc::DataError("cannot open '" + path + "'; " + hint);
    }
    return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

int cmd_train(const mc::RunConfig& cfg, const std::string& config_path,
              const std::vector<std::string>& overrides) {
    ensure_output_dir(cfg);
    const mc::Panel real = mc::load_real_panel(cfg.real_csv, cfg.var_names);
    const mc::PanelPartition parts = mc::partition_panel(real, cfg.partition);
    const mc::StandardizationStats stats = mc::stats_from_text(
        read_text_file(cfg.stats_path(), "run `macrocast tokenize` first"));
    const mc::TokenizerSpec tokenizer = mc::tokenizer_from_text(
        read_text_file(cfg.tokenizer_path(), "run `macrocast tokenize` first"));

    const mc::TokenPanel real_tokens =
        mc::encode(mc::apply_standardization(parts.training, stats), tokenizer);

    std::vector<mc::TokenPanel> synth_tokens;
    if (std::filesystem::exists(cfg.corpus_path())) {
        const std::vector<mc::Panel> corpus = mc::load_corpus_csv(cfg.corpus_path(),
                                                                  cfg.var_names);
        synth_tokens.reserve(corpus.size());
        for (const mc::Panel& p : corpus) {
            synth_tokens.push_back(mc::encode(mc::apply_standardization(p, stats), tokenizer));
        }
    } else if (cfg.real_mix < 1.0) {
        throw mc::DataError("synthetic corpus '" + cfg.corpus_path() +
                            "' is missing and real_mix < 1; run `macrocast simulate` first");
    }

    std::vector<const mc::TokenPanel*> real_ptrs = {&real_tokens};
    std::vector<const mc::TokenPanel*> synth_ptrs;
    for (const mc::TokenPanel& p : synth_tokens) {
        synth_ptrs.push_back(&p);
    }
    const mc::WindowStore store =
        mc::build_windows(real_ptrs, synth_ptrs, cfg.context_len, cfg.validation_fraction);
    for (const std::string& w : store.warnings) {
        std::cerr << "warning: " << w << "\n";
    }

    mc::TrainConfig tcfg;
    tcfg.batch_size = cfg.batch_size;
    tcfg.real_mix = cfg.real_mix;
    tcfg.learning_rate = cfg.learning_rate;
    tcfg.max_steps = cfg.max_steps;
    tcfg.eval_interval = cfg.eval_interval;
    tcfg.patience = cfg.patience;
    tcfg.validation_fraction = cfg.validation_fraction;
    tcfg.seed = cfg.base_seed;

    Manifest m("train", config_path, overrides);
    m.add_file("input.real", cfg.real_csv);
    m.add_file("input.stats", cfg.stats_path());
    m.add_file("input.tokenizer", cfg.tokenizer_path());
    if (!synth_tokens.empty()) {
        m.add_file("input.corpus", cfg.corpus_path());
    }
    m.add("windows.real_train", store.real_train.size());
    m.add("windows.real_val", store.real_val.size());
    m.add("windows.synthetic", store.synthetic.size());

    std::vector<std::string> failures;
    for (size_t k = 0; k < cfg.num_vars(); ++k) {
        const std::string& var = cfg.var_names[k];
        mc::ModelConfig mcfg;
        mcfg.num_vars = cfg.num_vars();
        mcfg.vocab = cfg.tokens_per_var;
        mcfg.embed_per_var = cfg.embed_dim_per_var();
        mcfg.layers = cfg.layers;
        mcfg.heads = cfg.heads;
        mcfg.context = cfg.context_len;
        mcfg.target_var = k;
        mcfg.mlp_factor = cfg.mlp_factor;
        const std::string lineage = "base_seed=" + std::to_string(cfg.base_seed) +
                                    " streams=model-init/" + std::to_string(k) +
                                    ",train-batches/" + std::to_string(k);
        try {
            const mc::TrainResult result = mc::train_model(mcfg, store, tcfg, tokenizer, stats,
                                                           cfg.var_names, lineage);
            mc::save_checkpoint(result.checkpoint, cfg.checkpoint_path(var));
            mc::save_loss_trace(cfg.trace_path(var), result.trace);
            m.add_file("output.checkpoint." + var, cfg.checkpoint_path(var));
            m.add_file("output.trace." + var, cfg.trace_path(var));
            m.add("steps." + var, result.steps_run);
            m.add("early_stopped." + var, result.early_stopped ? "1" : "0");
            m.add("val_loss." + var, g17(result.checkpoint.final_val_loss));
            std::cout << "trained " << var << ": " << result.steps_run << " steps, val loss "
                      << g17(result.checkpoint.final_val_loss)
                      << (result.early_stopped ? " (early stop)" : "") << "\n";
        } catch (const std::exception& e) {
            failures.push_back(var + ": " + e.what());
            m.add("failed." + var, e.what());
            std::cerr << "error: training " << var << " failed: " << e.what() << "\n";
        }
    }
    m.save(cfg.output_dir + "/train.manifest");

    if (!failures.empty()) {
        std::cerr << failures.size() << " of " << cfg.num_vars()
                  << " variables failed to train\n";
        return 3;
    }
    return 0;
}

// ---------------------------------------------------------------------------
// forecast
// ---------------------------------------------------------------------------

int cmd_forecast(const mc::RunConfig& cfg, const std::string& config_path,
                 const std::vector<std::string>& overrides) {
    ensure_output_dir(cfg);
    const mc::Panel real = mc::load_real_panel(cfg.real_csv, cfg.var_names);

    Manifest m("forecast", config_path, overrides);
    m.add_file("input.real", cfg.real_csv);

    size_t produced = 0;
    std::vector<std::string> missing;
    for (const std::string& var : cfg.var_names) {
        const std::string ckpt_path = cfg.checkpoint_path(var);
        if (!std::filesystem::exists(ckpt_path)) {
            missing.push_back(var);
            m.add("missing.checkpoint." + var, ckpt_path);
            std::cerr << "notice: no checkpoint for " << var << " (" << ckpt_path
                      << "); skipping\n";
            continue;
        }
        const mc::Checkpoint ckpt = mc::load_checkpoint(ckpt_path);
        if (ckpt.var_names != cfg.var_names) {
            throw mc::DataError("checkpoint '" + ckpt_path +
                                "' was trained on different variables");
        }
        m.add_file("input.checkpoint." + var, ckpt_path);
        const mc::Predictor predictor = [&ckpt](const std::vector<int>& window) {
            return mc::predict_distribution(ckpt.params, window);
        };
        const mc::ForecastTable table =
            mc::rolling_forecast(predictor, real, cfg.partition, ckpt.stats, ckpt.tokenizer,
                                 ckpt.model_config.target_var, ckpt.model_config.context);
        mc::save_forecast_csv(table, cfg.forecast_path(var));
        mc::save_heatmap_svg(table, cfg.heatmap_path(var));
        m.add_file("output.forecast." + var, cfg.forecast_path(var));
        m.add_file("output.heatmap." + var, cfg.heatmap_path(var));
        m.add("clamped." + var, table.clamp_count);
        ++produced;
        std::cout << "forecast " << var << ": " << table.rows.size() << " periods -> "
                  << cfg.forecast_path(var) << "\n";
    }
    m.save(cfg.output_dir + "/forecast.manifest");

    if (produced == 0) {
        throw mc::DataError("no checkpoints found under '" + cfg.output_dir +
                            "'; run `macrocast train` first");
    }
    if (!missing.empty()) {
        std::cerr << "notice: forecasts cover " << produced << " of " << cfg.num_vars()
                  << " variables\n";
    }
    return 0;
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

int cmd_report(const mc::RunConfig& cfg, const std::string& config_path,
               const std::vector<std::string>& overrides) {
    ensure_output_dir(cfg);
    const mc::StandardizationStats stats = mc::stats_from_text(
        read_text_file(cfg.stats_path(), "run `macrocast tokenize` first"));
    const mc::TokenizerSpec tokenizer = mc::tokenizer_from_text(
        read_text_file(cfg.tokenizer_path(), "run `macrocast tokenize` first"));

    Manifest m("report", config_path, overrides);
    std::vector<mc::AccuracyRow> rows;
    std::vector<std::string> missing;
    for (size_t k = 0; k < cfg.num_vars(); ++k) {
        const std::string& var = cfg.var_names[k];
        const std::string path = cfg.forecast_path(var);
        if (!std::filesystem::exists(path)) {
            missing.push_back(var);
            m.add("missing.forecast." + var, path);
            std::cerr << "notice: no forecast table for " << var << "; skipping\n";
            continue;
        }
        mc::ForecastTable table = mc::load_forecast_csv(path);
        table.var_name = var;
        table.boundaries = tokenizer.boundaries[k];
        table.mean = stats.means[k];
        table.stddev = stats.stds[k];
        for (const mc::ForecastRow& r : table.rows) {
            const double z = (r.realized_value - table.mean) / table.stddev;
            if (z < table.boundaries.front() || z > table.boundaries.back()) {
                ++table.clamp_count;
            }
        }
        m.add_file("input.forecast." + var, path);
        rows.push_back(mc::score(table));
    }
    if (rows.empty()) {
        throw mc::DataError("no forecast tables found under '" + cfg.output_dir +
                            "'; run `macrocast forecast` first");
    }

    mc::save_report_csv(rows, cfg.output_dir + "/report.csv");
    const std::string text = mc::report_text(rows);
    {
        std::ofstream f(cfg.output_dir + "/report.txt", std::ios::binary);
        f << text;
        for (const std::string& var : missing) {
            f << "missing: no forecast table for " << var << "\n";
        }
    }
    m.add_file("output.report_csv", cfg.output_dir + "/report.csv");
    m.add_file("output.report_txt", cfg.output_dir + "/report.txt");
    m.save(cfg.output_dir + "/report.manifest");

    std::cout << text;
    for (const std::string& var : missing) {
        std::cout << "missing: no forecast table for " << var << "\n";
    }
    return 0;
}

// ---------------------------------------------------------------------------
// selftest
// ---------------------------------------------------------------------------

struct SelftestReport {
    size_t passed = 0;
    size_t failed = 0;

    void check(const std::string& name, bool ok, const std::string& detail) {
        if (ok) {
            ++passed;
            std::cout << "PASS " << name << "\n";
        } else {
            ++failed;
            std::cout << "FAIL " << name << ": " << detail << "\n";
        }
    }
};

void selftest_gradients(SelftestReport& report) {
    // Softmax routed into the loss explicitly, so the corruption hook (and
    // any real regression in the softmax backward) is caught here.
    {
        mc::Rng rng(11);
        auto x = mc::make_tensor({3, 5}, true);
        for (double& v : x->data) {
            v = rng.normal();
        }
        const std::vector<int> targets = {1, 4, 0};
        const auto build = [&](mc::Graph& g) {
            return g.cross_entropy_mean(g.softmax_rows(x), targets);
        };
        const double err = mc::grad_check(build, {x}, 1e-5);
        report.check("gradient-softmax", err <= 1e-6,
                     "max relative error " + g17(err) + " > 1e-6");
    }
    // Full tiny model: exercises every primitive the transformer uses.
    {
        mc::ModelConfig c;
        c.num_vars = 2;
        c.vocab = 3;
        c.embed_per_var = 2;
        c.layers = 1;
        c.heads = 1;
        c.context = 2;
        c.target_var = 0;
        c.mlp_factor = 2;
        mc::ModelParams params = mc::init_model(c, 146);
        // Refill every tensor with O(1)-scale values: the 0.02-scale training
        // init makes many gradient entries so small that central-difference
        // roundoff (~eps*|loss|/2h) dominates them, and the check would be
        // measuring noise instead of the backward pass.
        mc::Rng refill(1023);
        for (const auto& t : params.all()) {
            for (double& v : t->data) {
                v = refill.uniform01() - 0.5;
            }
        }
        mc::BatchInput input;
        input.batch = 2;
        input.tokens = {{0, 1, 2, 1}, {2, 0, 1, 1}};
        const std::vector<int> targets = {1, 2, 0, 1};
        const auto build = [&](mc::Graph& g) {
            return g.cross_entropy_mean(mc::forward_batch(g, params, input), targets);
        };
        const double err = mc::grad_check(build, params.all(), 1e-5);
        report.check("gradient-model", err <= 1e-5,
                     "max relative error " + g17(err) + " > 1e-5");
    }
}

void selftest_simulator(SelftestReport& report) {
    // Scalar AR(1): y_t = 0.9 y_{t-1} + eps, stationary variance 1/(1-0.81).
    mc::PosteriorDraw draw;
    draw.n = draw.q = draw.K = 1;
    draw.G = {0.9};
    draw.R = {1.0};
    draw.H = {1.0};
    draw.d = {0.0};
    draw.sv = {{0.0, 0.0, 0.0}};
    draw.nu = {1e9};
    const mc::Panel panel = mc::simulate_trajectory(draw, 200000, 100, 77, {"y"});
    double mean = 0.0;
    for (size_t r = 0; r < panel.rows(); ++r) {
        mean += panel.at(r, 0);
    }
    mean /= static_cast<double>(panel.rows());
    double var = 0.0;
    double lag = 0.0;
    for (size_t r = 0; r < panel.rows(); ++r) {
        const double dev = panel.at(r, 0) - mean;
        var += dev * dev;
        if (r > 0) {
            lag += dev * (panel.at(r - 1, 0) - mean);
        }
    }
    var /= static_cast<double>(panel.rows() - 1);
    const double rho = lag / static_cast<double>(panel.rows() - 1) / var;
    const double target = 1.0 / (1.0 - 0.81);
    report.check("simulator-ar1-variance", std::abs(var - target) / target <= 0.03,
                 "sample variance " + g17(var) + " vs " + g17(target));
    report.check("simulator-ar1-autocorr", std::abs(rho - 0.9) <= 0.01,
                 "lag-1 autocorrelation " + g17(rho) + " vs 0.9");

    // nu = 4 innovations are leptokurtic.
    mc::Rng rng(5150);
    double m2 = 0.0;
    double m4 = 0.0;
    const size_t n_draws = 1000000;
    for (size_t i = 0; i < n_draws; ++i) {
        const double x = mc::draw_innovation(4.0, rng);
        m2 += x * x;
        m4 += x * x * x * x;
    }
    m2 /= static_cast<double>(n_draws);
    m4 /= static_cast<double>(n_draws);
    const double excess = m4 / (m2 * m2) - 3.0;
    report.check("simulator-fat-tails", excess > 0.5,
                 "nu=4 excess kurtosis " + g17(excess) + " not > 0.5");
}

void selftest_tokenizer(SelftestReport& report) {
    mc::Rng rng(99);
    mc::Panel pool;
    pool.var_names = {"x"};
    pool.values.resize(100000);
    for (double& v : pool.values) {
        v = rng.normal();
    }
    const mc::TokenizerSpec spec = mc::fit_tokenizer({&pool}, 10);
    std::vector<size_t> counts(10, 0);
    const mc::TokenPanel tokens = mc::encode(pool, spec);
    for (size_t r = 0; r < tokens.rows(); ++r) {
        counts[tokens.at(r, 0)]++;
    }
    bool balanced = true;
    std::string detail;
    for (size_t j = 0; j < 10; ++j) {
        const double freq = static_cast<double>(counts[j]) / 100000.0;
        if (freq < 0.095 || freq > 0.105) {
            balanced = false;
            detail = "bin " + std::to_string(j) + " frequency " + g17(freq);
        }
    }
    report.check("tokenizer-balance", balanced, detail);

    // Binary-search encode vs a linear scan over the edges.
    bool agree = true;
    for (size_t i = 0; i < 10000 && agree; ++i) {
        const double v = rng.normal() * 2.0;
        const int fast = mc::encode_value(v, spec.boundaries[0], 10);
        int slow = 0;
        for (size_t j = 1; j < 10; ++j) {
            if (spec.boundaries[0][j] <= v) {
                slow = static_cast<int>(j);
            }
        }
        if (fast != slow) {
            agree = false;
            detail = "value " + g17(v) + ": " + std::to_string(fast) + " vs " +
                     std::to_string(slow);
        }
    }
    report.check("tokenizer-encode-oracle", agree, detail);
}

void selftest_batches(SelftestReport& report) {
    mc::TokenPanel real;
    real.K = 1;
    real.tokens.assign(50, 0);
    mc::TokenPanel synth;
    synth.K = 1;
    synth.tokens.assign(500, 0);
    const mc::WindowStore store = mc::build_windows({&real}, {&synth}, 4, 0.0);
    mc::Rng rng(13);
    bool exact = true;
    std::string detail;
    for (size_t b = 0; b < 200 && exact; ++b) {
        const auto batch = mc::sample_mixed_batch(store, 256, 0.1, rng);
        size_t n_real = 0;
        for (const mc::WindowRef& w : batch) {
            n_real += w.panel == 0 ? 1 : 0;
        }
        if (batch.size() != 256 || n_real != 26) {
            exact = false;
            detail = "batch " + std::to_string(b) + " has " + std::to_string(n_real) +
                     " real windows (want 26)";
        }
    }
    report.check("batch-composition", exact, detail);
}

void selftest_adam(SelftestReport& report) {
    auto p = mc::make_tensor({1}, true);
    p->data[0] = 1.0;
    p->grad[0] = 1.0;
    mc::AdamState state = mc::AdamState::init({p}, 0.1);
    mc::adam_step({p}, state);
    const double moved = p->data[0] - 1.0;
    report.check("adam-first-step", std::abs(moved + 0.1) <= 1e-8,
                 "first step moved " + g17(moved) + ", want -0.1");
}

int cmd_selftest(bool corrupt_softmax) {
    mc::testhook::corrupt_softmax_backward = corrupt_softmax;
    SelftestReport report;
    selftest_gradients(report);
    mc::testhook::corrupt_softmax_backward = false;
    selftest_simulator(report);
    selftest_tokenizer(report);
    selftest_batches(report);
    selftest_adam(report);
    std::cout << report.passed << " passed, " << report.failed << " failed\n";
    return report.failed == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"macrocast: synthetic-panel pretraining for one-step-ahead "
                 "macroeconomic token forecasts"};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> overrides;
    bool corrupt_softmax = false;

    const auto add_config_opts = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "run configuration file")->required();
        sub->add_option("--set", overrides,
                        "override a config entry (key=value); recorded in the manifest");
    };

    CLI::App* simulate = app.add_subcommand("simulate", "generate the synthetic corpus");
    add_config_opts(simulate);
    CLI::App* tokenize =
        app.add_subcommand("tokenize", "fit standardization stats and token boundaries");
    add_config_opts(tokenize);
    CLI::App* train = app.add_subcommand("train", "train one model per variable");
    add_config_opts(train);
    CLI::App* forecast =
        app.add_subcommand("forecast", "roll one-step-ahead forecasts over the test segment");
    add_config_opts(forecast);
    CLI::App* report = app.add_subcommand("report", "summarize forecast accuracy");
    add_config_opts(report);
    CLI::App* selftest = app.add_subcommand("selftest", "run the built-in property suite");
    selftest
        ->add_flag("--corrupt-softmax", corrupt_softmax,
                   "negative control: sabotage the softmax backward pass so the gradient "
                   "check must fail")
        ->group("");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (selftest->parsed()) {
            return cmd_selftest(corrupt_softmax);
        }
        const mc::RunConfig cfg = mc::load_run_config(config_path, overrides);
        if (simulate->parsed()) {
            return cmd_simulate(cfg, config_path, overrides);
        }
        if (tokenize->parsed()) {
            return cmd_tokenize(cfg, config_path, overrides);
        }
        if (train->parsed()) {
            return cmd_train(cfg, config_path, overrides);
        }
        if (forecast->parsed()) {
            return cmd_forecast(cfg, config_path, overrides);
        }
        if (report->parsed()) {
            return cmd_report(cfg, config_path, overrides);
        }
        std::cerr << "error: no subcommand\n";
        return 2;
    } catch (const mc::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const mc::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const mc::NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
