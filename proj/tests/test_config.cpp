// test_config.cpp
// The key = value run configuration: file parsing, command-line overrides,
// and every validation rule that guards the pipeline's invariants.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "macrocast/config.hpp"
#include "macrocast/errors.hpp"

namespace mc = macrocast;
namespace fs = std::filesystem;

namespace {

fs::path write_config(const std::string& name, const std::string& text) {
    const fs::path p = fs::temp_directory_path() / name;
    std::ofstream f(p);
    f << text;
    return p;
}

const char* kFullConfig =
    "# pipeline configuration\n"
    "real_csv = data/panel.csv\n"
    "posterior_draws = data/draws.txt\n"
    "output_dir = runs/exp1\n"
    "var_names = gdp, prices, wages   # trailing comment\n"
    "\n"
    "estimation_start = 1947Q3\n"
    "estimation_end   = 1959Q4\n"
    "training_start   = 1960Q1\n"
    "training_end     = 2017Q3\n"
    "test_start       = 2017Q4\n"
    "test_end         = 2025Q2\n"
    "\n"
    "embed_dim = 24\n"
    "layers = 3\n"
    "heads = 4\n"
    "context_len = 5\n"
    "tokens_per_var = 12\n"
    "mlp_factor = 2\n"
    "batch_size = 64\n"
    "real_mix = 0.2\n"
    "learning_rate = 1e-3\n"
    "max_steps = 500\n"
    "eval_interval = 50\n"
    "patience = 4\n"
    "validation_fraction = 0.1\n"
    "trajectories = 20\n"
    "trajectory_len = 40\n"
    "burn_in = 10\n"
    "base_seed = 777\n";

}  // namespace

TEST_CASE("a config file populates every field") {
    const fs::path p = write_config("cfg_full.txt", kFullConfig);
    const mc::RunConfig cfg = mc::load_run_config(p.string());

    CHECK(cfg.real_csv == "data/panel.csv");
    CHECK(cfg.posterior_draws == "data/draws.txt");
    CHECK(cfg.output_dir == "runs/exp1");
    CHECK(cfg.var_names == std::vector<std::string>{"gdp", "prices", "wages"});
    CHECK(cfg.partition.estimation.start == mc::QuarterDate{1947, 3});
    CHECK(cfg.partition.training.end == mc::QuarterDate{2017, 3});
    CHECK(cfg.partition.test.start == mc::QuarterDate{2017, 4});
    CHECK(cfg.partition.test.end == mc::QuarterDate{2025, 2});
    CHECK(cfg.embed_dim == 24);
    CHECK(cfg.layers == 3);
    CHECK(cfg.heads == 4);
    CHECK(cfg.context_len == 5);
    CHECK(cfg.tokens_per_var == 12);
    CHECK(cfg.mlp_factor == 2);
    CHECK(cfg.batch_size == 64);
    CHECK(cfg.real_mix == 0.2);
    CHECK(cfg.learning_rate == 1e-3);
    CHECK(cfg.max_steps == 500);
    CHECK(cfg.eval_interval == 50);
    CHECK(cfg.patience == 4);
    CHECK(cfg.validation_fraction == 0.1);
    CHECK(cfg.trajectories == 20);
    CHECK(cfg.trajectory_len == 40);
    CHECK(cfg.burn_in == 10);
    CHECK(cfg.base_seed == 777);
    CHECK(cfg.num_vars() == 3);
    CHECK(cfg.embed_dim_per_var() == 8);

    SUBCASE("derived artifact paths hang off output_dir") {
        CHECK(cfg.corpus_path() == "runs/exp1/corpus.csv");
        CHECK(cfg.checkpoint_path("gdp") == "runs/exp1/ckpt_gdp.bin");
        CHECK(cfg.heatmap_path("wages") == "runs/exp1/heatmap_wages.svg");
    }
}

TEST_CASE("overrides land after the file and win") {
    const fs::path p = write_config("cfg_override.txt", kFullConfig);
    const mc::RunConfig cfg =
        mc::load_run_config(p.string(), {"layers=1", "base_seed = 42", "output_dir=elsewhere"});
    CHECK(cfg.layers == 1);
    CHECK(cfg.base_seed == 42);
    CHECK(cfg.output_dir == "elsewhere");
    CHECK(cfg.embed_dim == 24);  // untouched keys keep their file values

    CHECK_THROWS_WITH_AS((void)mc::load_run_config(p.string(), {"layers"}),
                         doctest::Contains("not key=value"), mc::ConfigError);
}

TEST_CASE("parse errors are precise") {
    SUBCASE("unknown keys are refused, not ignored") {
        const fs::path p = write_config("cfg_unknown.txt",
                                        std::string(kFullConfig) + "embedd_dim = 56\n");
        CHECK_THROWS_WITH_AS((void)mc::load_run_config(p.string()),
                             doctest::Contains("unknown config key 'embedd_dim'"),
                             mc::ConfigError);
    }
    SUBCASE("a line without '=' names its line number") {
        const fs::path p = write_config("cfg_noeq.txt", "real_csv data.csv\n");
        CHECK_THROWS_WITH_AS((void)mc::load_run_config(p.string()),
                             doctest::Contains("line 1"), mc::ConfigError);
    }
    SUBCASE("integers and numbers are checked") {
        mc::RunConfig cfg;
        CHECK_THROWS_WITH_AS(mc::apply_config_entry(cfg, "layers", "two"),
                             doctest::Contains("non-negative integer"), mc::ConfigError);
        CHECK_THROWS_WITH_AS(mc::apply_config_entry(cfg, "real_mix", "fast"),
                             doctest::Contains("expects a number"), mc::ConfigError);
        CHECK_THROWS_WITH_AS(mc::apply_config_entry(cfg, "real_mix", "0.1x"),
                             doctest::Contains("expects a number"), mc::ConfigError);
        CHECK_THROWS_AS(mc::apply_config_entry(cfg, "layers", "-3"), mc::ConfigError);
    }
    SUBCASE("malformed quarter dates surface the data error") {
        mc::RunConfig cfg;
        CHECK_THROWS_WITH_AS(mc::apply_config_entry(cfg, "test_start", "2018Q7"),
                             doctest::Contains("quarter out of range"), mc::DataError);
        CHECK_THROWS_WITH_AS(mc::apply_config_entry(cfg, "test_start", "spring-2018"),
                             doctest::Contains("malformed quarter date"), mc::DataError);
    }
    SUBCASE("a missing file is a config error") {
        CHECK_THROWS_WITH_AS((void)mc::load_run_config("/nonexistent/cfg.txt"),
                             doctest::Contains("cannot open config file"), mc::ConfigError);
    }
}

TEST_CASE("validation guards the pipeline invariants") {
    // A valid baseline to perturb one field at a time.
    mc::RunConfig base;
    base.var_names = {"a", "b", "c", "d", "e", "f", "g"};
    CHECK_NOTHROW(base.validate());

    SUBCASE("no variables, no run") {
        mc::RunConfig c = base;
        c.var_names.clear();
        CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("at least one variable"),
                             mc::ConfigError);
    }
    SUBCASE("embed_dim must split evenly across variables") {
        mc::RunConfig c = base;
        c.embed_dim = 54;  // not a multiple of 7
        CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("multiple of the variable count"),
                             mc::ConfigError);
    }
    SUBCASE("embed_dim must split evenly across heads") {
        mc::RunConfig c = base;
        c.heads = 3;  // 56 % 3 != 0
        CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("divisible by heads"),
                             mc::ConfigError);
    }
    SUBCASE("token vocabulary bounds") {
        mc::RunConfig c = base;
        c.tokens_per_var = 1;
        CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("[2, 256]"), mc::ConfigError);
        c.tokens_per_var = 257;
        CHECK_THROWS_AS(c.validate(), mc::ConfigError);
    }
    SUBCASE("mix and validation fractions") {
        mc::RunConfig c = base;
        c.real_mix = 1.2;
        CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("[0, 1]"), mc::ConfigError);
        c = base;
        c.validation_fraction = 0.6;
        CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("[0, 0.5]"), mc::ConfigError);
    }
    SUBCASE("synthetic trajectories must be long enough to window") {
        mc::RunConfig c = base;
        c.trajectory_len = c.context_len;  // one row short
        CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("context_len + 1"),
                             mc::ConfigError);
        c.trajectory_len = c.context_len + 1;
        CHECK_NOTHROW(c.validate());
    }
    SUBCASE("degenerate sizes") {
        mc::RunConfig c = base;
        c.context_len = 0;
        CHECK_THROWS_AS(c.validate(), mc::ConfigError);
        c = base;
        c.batch_size = 0;
        CHECK_THROWS_AS(c.validate(), mc::ConfigError);
        c = base;
        c.trajectories = 0;
        CHECK_THROWS_AS(c.validate(), mc::ConfigError);
        c = base;
        c.embed_dim = 0;
        CHECK_THROWS_AS(c.validate(), mc::ConfigError);
    }
    SUBCASE("the partition must be contiguous and ordered") {
        mc::RunConfig c = base;
        c.partition.training.start = {1960, 2};  // gap after estimation_end 1959Q4
        CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("contiguous"), mc::ConfigError);
        c = base;
        c.partition.test.end = {2017, 3};  // empty test range
        CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("empty"), mc::ConfigError);
    }
}
