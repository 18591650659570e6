#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "macrocast/panel.hpp"

namespace macrocast {

// Full run configuration. Loaded from a flat `key = value` text file; every
// output manifest echoes the effective values so runs can be audited.
struct RunConfig {
    // data paths
    std::string real_csv;
    std::string posterior_draws;
    std::string output_dir = "out";
    std::vector<std::string> var_names;

    // sample partition
    PartitionSpec partition = PartitionSpec::default_spec();

    // model
    size_t embed_dim = 56;      // E, must be divisible by K and by heads
    size_t layers = 2;          // L
    size_t heads = 2;           // H
    size_t context_len = 4;     // T
    size_t tokens_per_var = 10; // J
    size_t mlp_factor = 2;

    // training
    size_t batch_size = 256;
    double real_mix = 0.1;      // alpha
    double learning_rate = 3e-4;
    size_t max_steps = 20000;
    size_t eval_interval = 250;
    size_t patience = 8;
    double validation_fraction = 0.15;

    // simulator plan
    size_t trajectories = 10000;   // M
    size_t trajectory_len = 1000;  // S
    size_t burn_in = 100;

    uint64_t base_seed = 1337;

    size_t num_vars() const { return var_names.size(); }
    size_t embed_dim_per_var() const { return embed_dim / var_names.size(); }

    void validate() const;

    // Derived artifact locations under output_dir.
    std::string corpus_path() const { return output_dir + "/corpus.csv"; }
    std::string tokenizer_path() const { return output_dir + "/tokenizer.txt"; }
    std::string stats_path() const { return output_dir + "/standardization.txt"; }
    std::string checkpoint_path(const std::string& var) const {
        return output_dir + "/ckpt_" + var + ".bin";
    }
    std::string trace_path(const std::string& var) const {
        return output_dir + "/trace_" + var + ".csv";
    }
    std::string forecast_path(const std::string& var) const {
        return output_dir + "/forecast_" + var + ".csv";
    }
    std::string heatmap_path(const std::string& var) const {
        return output_dir + "/heatmap_" + var + ".svg";
    }
};

// Parses the config file. Unknown keys are an error. `overrides` are
// key=value pairs applied after the file (same key set).
RunConfig load_run_config(const std::string& path, const std::vector<std::string>& overrides = {});

// Applies a single key=value assignment; throws ConfigError on unknown keys.
void apply_config_entry(RunConfig& cfg, const std::string& key, const std::string& value);

}  // namespace macrocast
