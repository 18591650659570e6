#include "macrocast/config.hpp"

#include <fstream>
#include <sstream>

#include "macrocast/errors.hpp"

namespace macrocast {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) {
        return "";
    }
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

size_t parse_size(const std::string& key, const std::string& value) {
    try {
        const long long v = std::stoll(value);
        if (v < 0) {
            throw std::invalid_argument("negative");
        }
        return static_cast<size_t>(v);
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "' expects a non-negative integer, got '" +
                          value + "'");
    }
}

double parse_double(const std::string& key, const std::string& value) {
    try {
        size_t pos = 0;
        const double v = std::stod(value, &pos);
        if (pos != value.size()) {
            throw std::invalid_argument("trailing");
        }
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "' expects a number, got '" + value + "'");
    }
}

std::vector<std::string> parse_name_list(const std::string& value) {
    std::vector<std::string> names;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) {
            names.push_back(item);
        }
    }
    return names;
}

}  // namespace

void apply_config_entry(RunConfig& cfg, const std::string& key, const std::string& value) {
    if (key == "real_csv") {
        cfg.real_csv = value;
    } else if (key == "posterior_draws") {
        cfg.posterior_draws = value;
    } else if (key == "output_dir") {
        cfg.output_dir = value;
    } else if (key == "var_names") {
        cfg.var_names = parse_name_list(value);
    } else if (key == "estimation_start") {
        cfg.partition.estimation.start = QuarterDate::parse(value);
    } else if (key == "estimation_end") {
        cfg.partition.estimation.end = QuarterDate::parse(value);
    } else if (key == "training_start") {
        cfg.partition.training.start = QuarterDate::parse(value);
    } else if (key == "training_end") {
        cfg.partition.training.end = QuarterDate::parse(value);
    } else if (key == "test_start") {
        cfg.partition.test.start = QuarterDate::parse(value);
    } else if (key == "test_end") {
        cfg.partition.test.end = QuarterDate::parse(value);
    } else if (key == "embed_dim") {
        cfg.embed_dim = parse_size(key, value);
    } else if (key == "layers") {
        cfg.layers = parse_size(key, value);
    } else if (key == "heads") {
        cfg.heads = parse_size(key, value);
    } else if (key == "context_len") {
        cfg.context_len = parse_size(key, value);
    } else if (key == "tokens_per_var") {
        cfg.tokens_per_var = parse_size(key, value);
    } else if (key == "mlp_factor") {
        cfg.mlp_factor = parse_size(key, value);
    } else if (key == "batch_size") {
        cfg.batch_size = parse_size(key, value);
    } else if (key == "real_mix") {
        cfg.real_mix = parse_double(key, value);
    } else if (key == "learning_rate") {
        cfg.learning_rate = parse_double(key, value);
    } else if (key == "max_steps") {
        cfg.max_steps = parse_size(key, value);
    } else if (key == "eval_interval") {
        cfg.eval_interval = parse_size(key, value);
    } else if (key == "patience") {
        cfg.patience = parse_size(key, value);
    } else if (key == "validation_fraction") {
        cfg.validation_fraction = parse_double(key, value);
    } else if (key == "trajectories") {
        cfg.trajectories = parse_size(key, value);
    } else if (key == "trajectory_len") {
        cfg.trajectory_len = parse_size(key, value);
    } else if (key == "burn_in") {
        cfg.burn_in = parse_size(key, value);
    } else if (key == "base_seed") {
        cfg.base_seed = static_cast<uint64_t>(parse_size(key, value));
    } else {
        throw ConfigError("unknown config key '" + key + "'");
    }
}

RunConfig load_run_config(const std::string& path, const std::vector<std::string>& overrides) {
    std::ifstream file(path);
    if (!file.is_open()) {
        throw ConfigError("cannot open config file: " + path);
    }
    RunConfig cfg;
    std::string line;
    size_t line_no = 0;
    while (std::getline(file, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) {
            line = line.substr(0, hash);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(line_no) +
                              " is not a key = value assignment");
        }
        apply_config_entry(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    for (const auto& ov : overrides) {
        const auto eq = ov.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("override '" + ov + "' is not key=value");
        }
        apply_config_entry(cfg, trim(ov.substr(0, eq)), trim(ov.substr(eq + 1)));
    }
    cfg.validate();
    return cfg;
}

void RunConfig::validate() const {
    if (var_names.empty()) {
        throw ConfigError("var_names must list at least one variable");
    }
    const size_t K = var_names.size();
    if (embed_dim == 0 || embed_dim % K != 0) {
        throw ConfigError("embed_dim must be a positive multiple of the variable count (" +
                          std::to_string(K) + ")");
    }
    if (heads == 0 || embed_dim % heads != 0) {
        throw ConfigError("embed_dim must be divisible by heads");
    }
    if (tokens_per_var < 2 || tokens_per_var > 256) {
        throw ConfigError("tokens_per_var must be in [2, 256]");
    }
    if (context_len < 1) {
        throw ConfigError("context_len must be >= 1");
    }
    if (!(real_mix >= 0.0 && real_mix <= 1.0)) {
        throw ConfigError("real_mix must lie in [0, 1]");
    }
    if (batch_size < 1) {
        throw ConfigError("batch_size must be >= 1");
    }
    if (!(validation_fraction >= 0.0 && validation_fraction <= 0.5)) {
        throw ConfigError("validation_fraction must lie in [0, 0.5]");
    }
    if (trajectories < 1) {
        throw ConfigError("trajectories must be >= 1");
    }
    if (trajectory_len < context_len + 1) {
        throw ConfigError("trajectory_len must be at least context_len + 1 so every synthetic "
                          "panel yields a training window");
    }
    partition.validate();
}

}  // namespace macrocast
