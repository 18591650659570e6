#include "macrocast/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include "macrocast/errors.hpp"

namespace macrocast {

namespace {

std::string g17(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

size_t round_half_up(double x) {
    return static_cast<size_t>(std::llround(x));
}

}  // namespace

void TrainConfig::validate() const {
    if (batch_size == 0) {
        throw ConfigError("batch_size must be at least 1");
    }
    if (real_mix < 0.0 || real_mix > 1.0) {
        throw ConfigError("real_mix must lie in [0, 1]");
    }
    if (learning_rate <= 0.0) {
        throw ConfigError("learning_rate must be positive");
    }
    if (max_steps == 0 || eval_interval == 0 || patience == 0) {
        throw ConfigError("max_steps, eval_interval, and patience must be at least 1");
    }
    if (validation_fraction < 0.0 || validation_fraction > 0.5) {
        throw ConfigError("validation_fraction must lie in [0, 0.5]");
    }
}

// ---------------------------------------------------------------------------
// Windows
// ---------------------------------------------------------------------------

WindowStore build_windows(const std::vector<const TokenPanel*>& real_panels,
                          const std::vector<const TokenPanel*>& synthetic_panels, size_t context,
                          double validation_fraction) {
    if (context == 0) {
        throw ConfigError("context must be at least 1");
    }
    if (validation_fraction < 0.0 || validation_fraction > 0.5) {
        throw ConfigError("validation_fraction must lie in [0, 0.5]");
    }
    WindowStore store;
    store.context = context;

    std::vector<WindowRef> real_all;
    const auto add_panel = [&](const TokenPanel* panel, std::vector<WindowRef>& sink,
                               const char* kind) {
        const size_t idx = store.panels.size();
        store.panels.push_back(panel);
        const size_t rows = panel->rows();
        if (rows < context + 1) {
            store.warnings.push_back(std::string(kind) + " panel " + std::to_string(idx) +
                                     " has " + std::to_string(rows) +
                                     " rows, too short for context " + std::to_string(context) +
                                     "; skipped");
            return;
        }
        for (size_t start = 0; start + context < rows; ++start) {
            sink.push_back({idx, start});
        }
    };

    for (const TokenPanel* p : real_panels) {
        add_panel(p, real_all, "real");
    }
    for (const TokenPanel* p : synthetic_panels) {
        add_panel(p, store.synthetic, "synthetic");
    }
    for (const TokenPanel* p : store.panels) {
        if (p->K != store.panels.front()->K) {
            throw DataError("token panels disagree on the variable count");
        }
    }

    // Chronological split: the latest windows become validation.
    size_t n_val = round_half_up(validation_fraction * static_cast<double>(real_all.size()));
    if (n_val > real_all.size()) {
        n_val = real_all.size();
    }
    const size_t n_train = real_all.size() - n_val;
    store.real_train.assign(real_all.begin(), real_all.begin() + n_train);
    store.real_val.assign(real_all.begin() + n_train, real_all.end());
    return store;
}

std::vector<WindowRef> sample_mixed_batch(const WindowStore& store, size_t batch_size,
                                          double alpha, Rng& rng) {
    if (alpha < 0.0 || alpha > 1.0) {
        throw ConfigError("real mixing ratio must lie in [0, 1]");
    }
    const size_t n_real = round_half_up(alpha * static_cast<double>(batch_size));
    const size_t n_synth = batch_size - n_real;
    if (n_real > 0 && store.real_train.empty()) {
        throw DataError("real training window pool is empty");
    }
    if (n_synth > 0 && store.synthetic.empty()) {
        throw DataError("synthetic window pool is empty");
    }

    std::vector<WindowRef> batch;
    batch.reserve(batch_size);
    for (size_t i = 0; i < n_real; ++i) {
        batch.push_back(store.real_train[rng.uniform_index(store.real_train.size())]);
    }
    for (size_t i = 0; i < n_synth; ++i) {
        batch.push_back(store.synthetic[rng.uniform_index(store.synthetic.size())]);
    }
    // Fisher-Yates so real windows are not clustered at the front.
    for (size_t i = batch.size(); i > 1; --i) {
        const size_t j = rng.uniform_index(i);
        std::swap(batch[i - 1], batch[j]);
    }
    return batch;
}

void fill_batch(const WindowStore& store, const std::vector<WindowRef>& refs, size_t target_var,
                BatchInput& input, std::vector<int>& targets) {
    const size_t T = store.context;
    const size_t K = store.panels.empty() ? 0 : store.panels.front()->K;
    if (target_var >= K) {
        throw ConfigError("target variable index out of range");
    }
    input.batch = refs.size();
    input.tokens.assign(K, std::vector<int>(refs.size() * T));
    targets.assign(refs.size() * T, 0);
    for (size_t b = 0; b < refs.size(); ++b) {
        const TokenPanel& panel = *store.panels[refs[b].panel];
        const size_t start = refs[b].start;
        for (size_t t = 0; t < T; ++t) {
            for (size_t k = 0; k < K; ++k) {
                input.tokens[k][b * T + t] = panel.at(start + t, k);
            }
            targets[b * T + t] = panel.at(start + 1 + t, target_var);
        }
    }
}

EvalResult evaluate(const ModelParams& params, const WindowStore& store,
                    const std::vector<WindowRef>& refs, size_t chunk_windows) {
    if (refs.empty()) {
        throw DataError("evaluation window set is empty");
    }
    if (chunk_windows == 0) {
        chunk_windows = refs.size();
    }
    const size_t T = store.context;
    double loss_sum = 0.0;
    size_t correct = 0;
    size_t total_rows = 0;

    BatchInput input;
    std::vector<int> targets;
    for (size_t begin = 0; begin < refs.size(); begin += chunk_windows) {
        const size_t end = std::min(begin + chunk_windows, refs.size());
        const std::vector<WindowRef> chunk(refs.begin() + begin, refs.begin() + end);
        fill_batch(store, chunk, params.config.target_var, input, targets);
        Graph g(false);
        TensorPtr logits = forward_batch(g, params, input);
        TensorPtr loss = g.cross_entropy_mean(logits, targets);
        const size_t rows = chunk.size() * T;
        loss_sum += loss->data[0] * static_cast<double>(rows);
        for (size_t r = 0; r < rows; ++r) {
            size_t best = 0;
            for (size_t j = 1; j < params.config.vocab; ++j) {
                if (logits->at(r, j) > logits->at(r, best)) {
                    best = j;
                }
            }
            if (best == static_cast<size_t>(targets[r])) {
                ++correct;
            }
        }
        total_rows += rows;
    }
    EvalResult out;
    out.loss = loss_sum / static_cast<double>(total_rows);
    out.accuracy = static_cast<double>(correct) / static_cast<double>(total_rows);
    return out;
}

void save_loss_trace(const std::string& path, const std::vector<TraceRow>& rows) {
    std::ofstream f(path, std::ios::binary);
    if (!f) {
        throw DataError("cannot write loss trace '" + path + "'");
    }
    f << "step,train_loss,val_loss\n";
    for (const TraceRow& r : rows) {
        f << r.step << "," << g17(r.train_loss) << "," << g17(r.val_loss) << "\n";
    }
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

TrainResult train_model(const ModelConfig& model_config, const WindowStore& store,
                        const TrainConfig& train_config, const TokenizerSpec& tokenizer,
                        const StandardizationStats& stats,
                        const std::vector<std::string>& var_names,
                        const std::string& seed_lineage) {
    model_config.validate();
    train_config.validate();
    if (store.context != model_config.context) {
        throw ConfigError("window context differs from the model context");
    }
    if (!store.panels.empty() && store.panels.front()->K != model_config.num_vars) {
        throw ConfigError("token panels carry a different variable count than the model");
    }
    const size_t n_real = round_half_up(train_config.real_mix *
                                        static_cast<double>(train_config.batch_size));
    if (n_real > 0 && store.real_train.empty()) {
        throw DataError("real training window pool is empty");
    }
    if (train_config.batch_size - n_real > 0 && store.synthetic.empty()) {
        throw DataError("synthetic window pool is empty");
    }
    if (store.real_val.empty()) {
        throw DataError("validation window pool is empty; raise validation_fraction or supply "
                        "more real data");
    }

    ModelParams params = init_model(
        model_config, derive_seed(train_config.seed, "model-init", model_config.target_var));
    const std::vector<TensorPtr> tensors = params.all();
    AdamState adam = AdamState::init(tensors, train_config.learning_rate);
    Rng batch_rng(derive_seed(train_config.seed, "train-batches", model_config.target_var));

    double best_val = std::numeric_limits<double>::infinity();
    std::vector<std::vector<double>> best_data;
    size_t evals_without_improvement = 0;
    double last_train_loss = 0.0;
    bool pending_eval = false;
    double pending_val = 0.0;
    size_t pending_step = 0;

    TrainResult result;
    BatchInput input;
    std::vector<int> targets;

    const auto run_eval = [&](size_t step) {
        const double val =
            evaluate(params, store, store.real_val, train_config.batch_size).loss;
        if (!std::isfinite(val)) {
            throw NumericError("validation loss diverged at step " + std::to_string(step));
        }
        if (val < best_val) {
            best_val = val;
            best_data.clear();
            for (const auto& t : tensors) {
                best_data.push_back(t->data);
            }
            evals_without_improvement = 0;
        } else {
            ++evals_without_improvement;
        }
        return val;
    };

    size_t step = 0;
    for (; step < train_config.max_steps; ++step) {
        if (step % train_config.eval_interval == 0) {
            pending_val = run_eval(step);
            pending_step = step;
            pending_eval = true;
            if (evals_without_improvement >= train_config.patience) {
                result.early_stopped = true;
                result.trace.push_back({step, last_train_loss, pending_val});
                pending_eval = false;
                break;
            }
        }

        const std::vector<WindowRef> refs =
            sample_mixed_batch(store, train_config.batch_size, train_config.real_mix, batch_rng);
        fill_batch(store, refs, model_config.target_var, input, targets);
        Graph g;
        TensorPtr logits = forward_batch(g, params, input);
        TensorPtr loss = g.cross_entropy_mean(logits, targets);
        last_train_loss = loss->data[0];
        if (!std::isfinite(last_train_loss)) {
            throw NumericError("training diverged at step " + std::to_string(step) +
                               " (non-finite loss)");
        }
        params.zero_grads();
        g.backward(loss);
        adam_step(tensors, adam);

        if (pending_eval) {
            result.trace.push_back({pending_step, last_train_loss, pending_val});
            pending_eval = false;
        }
    }
    result.steps_run = step;

    if (!result.early_stopped) {
        // Catch any improvement from the final stretch of steps.
        const double val = run_eval(step);
        result.trace.push_back({step, last_train_loss, val});
    }

    // Restore the best-validation parameters.
    for (size_t i = 0; i < tensors.size(); ++i) {
        tensors[i]->data = best_data[i];
    }

    result.checkpoint.model_config = model_config;
    result.checkpoint.var_names = var_names;
    result.checkpoint.params = std::move(params);
    result.checkpoint.tokenizer = tokenizer;
    result.checkpoint.stats = stats;
    result.checkpoint.train_config = train_config;
    result.checkpoint.final_train_loss = last_train_loss;
    result.checkpoint.final_val_loss = best_val;
    result.checkpoint.seed_lineage = seed_lineage;
    return result;
}

// ---------------------------------------------------------------------------
// Checkpoint serialization
// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'M', 'A', 'C', 'R', 'O', 'C', 'K', 'P'};
constexpr uint32_t kVersion = 1;

void put_u32(std::string& s, uint32_t v) {
    for (int i = 0; i < 4; ++i) {
        s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
}

void put_u64(std::string& s, uint64_t v) {
    for (int i = 0; i < 8; ++i) {
        s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
}

void put_f64(std::string& s, double v) {
    uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put_u64(s, bits);
}

void put_str(std::string& s, const std::string& v) {
    put_u64(s, v.size());
    s.append(v);
}

class PayloadReader {
public:
    explicit PayloadReader(std::string_view data) : data_(data) {}

    uint32_t u32() {
        need(4);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) {
            v |= static_cast<uint32_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
        }
        pos_ += 4;
        return v;
    }
    uint64_t u64() {
        need(8);
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i) {
            v |= static_cast<uint64_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
        }
        pos_ += 8;
        return v;
    }
    double f64() {
        const uint64_t bits = u64();
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }
    std::string str() {
        const uint64_t len = u64();
        need(len);
        std::string v(data_.substr(pos_, len));
        pos_ += len;
        return v;
    }
    bool done() const { return pos_ == data_.size(); }

private:
    void need(size_t n) {
        if (pos_ + n > data_.size()) {
            throw DataError("truncated checkpoint payload");
        }
    }
    std::string_view data_;
    size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    std::string payload;
    const ModelConfig& c = ckpt.model_config;
    put_u64(payload, c.num_vars);
    put_u64(payload, c.vocab);
    put_u64(payload, c.embed_per_var);
    put_u64(payload, c.layers);
    put_u64(payload, c.heads);
    put_u64(payload, c.context);
    put_u64(payload, c.target_var);
    put_u64(payload, c.mlp_factor);

    put_u64(payload, ckpt.var_names.size());
    for (const auto& n : ckpt.var_names) {
        put_str(payload, n);
    }

    const auto tensors = ckpt.params.all();
    const auto names = ckpt.params.names();
    put_u64(payload, tensors.size());
    for (size_t i = 0; i < tensors.size(); ++i) {
        put_str(payload, names[i]);
        put_u64(payload, tensors[i]->shape.size());
        for (size_t d : tensors[i]->shape) {
            put_u64(payload, d);
        }
        put_u64(payload, tensors[i]->size());
        for (double v : tensors[i]->data) {
            put_f64(payload, v);
        }
    }

    put_str(payload, tokenizer_to_text(ckpt.tokenizer));
    put_str(payload, stats_to_text(ckpt.stats));

    const TrainConfig& t = ckpt.train_config;
    put_u64(payload, t.batch_size);
    put_f64(payload, t.real_mix);
    put_f64(payload, t.learning_rate);
    put_u64(payload, t.max_steps);
    put_u64(payload, t.eval_interval);
    put_u64(payload, t.patience);
    put_f64(payload, t.validation_fraction);
    put_u64(payload, t.seed);

    put_f64(payload, ckpt.final_train_loss);
    put_f64(payload, ckpt.final_val_loss);
    put_str(payload, ckpt.seed_lineage);

    std::string file;
    file.append(kMagic, sizeof(kMagic));
    put_u32(file, kVersion);
    put_u64(file, payload.size());
    put_u64(file, fnv1a64(payload.data(), payload.size()));
    file.append(payload);

    std::ofstream f(path, std::ios::binary);
    if (!f) {
        throw DataError("cannot write checkpoint '" + path + "'");
    }
    f.write(file.data(), static_cast<std::streamsize>(file.size()));
    if (!f) {
        throw DataError("failed writing checkpoint '" + path + "'");
    }
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) {
        throw DataError("cannot open checkpoint '" + path + "'");
    }
    std::string file((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

    if (file.size() < sizeof(kMagic) + 4 + 8 + 8 ||
        std::memcmp(file.data(), kMagic, sizeof(kMagic)) != 0) {
        throw DataError("'" + path + "' is not a checkpoint file");
    }
    PayloadReader header(std::string_view(file).substr(sizeof(kMagic)));
    const uint32_t version = header.u32();
    if (version != kVersion) {
        throw DataError("unsupported checkpoint version " + std::to_string(version) +
                        " (expected " + std::to_string(kVersion) + ")");
    }
    const uint64_t payload_len = header.u64();
    const uint64_t checksum = header.u64();
    const size_t header_len = sizeof(kMagic) + 4 + 8 + 8;
    if (file.size() != header_len + payload_len) {
        throw DataError("truncated or oversized checkpoint '" + path + "'");
    }
    const std::string_view payload = std::string_view(file).substr(header_len);
    if (fnv1a64(payload.data(), payload.size()) != checksum) {
        throw DataError("checkpoint checksum mismatch in '" + path + "' (corrupt file)");
    }

    PayloadReader r(payload);
    Checkpoint ckpt;
    ModelConfig& c = ckpt.model_config;
    c.num_vars = r.u64();
    c.vocab = r.u64();
    c.embed_per_var = r.u64();
    c.layers = r.u64();
    c.heads = r.u64();
    c.context = r.u64();
    c.target_var = r.u64();
    c.mlp_factor = r.u64();
    c.validate();

    const uint64_t nvars = r.u64();
    for (uint64_t i = 0; i < nvars; ++i) {
        ckpt.var_names.push_back(r.str());
    }

    ckpt.params = init_model(c, 0);
    const auto tensors = ckpt.params.all();
    const auto names = ckpt.params.names();
    const uint64_t count = r.u64();
    if (count != tensors.size()) {
        throw DataError("checkpoint parameter count does not match its model config");
    }
    for (size_t i = 0; i < tensors.size(); ++i) {
        const std::string name = r.str();
        if (name != names[i]) {
            throw DataError("checkpoint parameter '" + name + "' out of order (expected '" +
                            names[i] + "')");
        }
        const uint64_t ndim = r.u64();
        std::vector<size_t> shape;
        for (uint64_t di = 0; di < ndim; ++di) {
            shape.push_back(r.u64());
        }
        if (shape != tensors[i]->shape) {
            throw DataError("checkpoint parameter '" + name + "' has an unexpected shape");
        }
        const uint64_t n = r.u64();
        if (n != tensors[i]->size()) {
            throw DataError("checkpoint parameter '" + name + "' has an unexpected length");
        }
        for (uint64_t j = 0; j < n; ++j) {
            tensors[i]->data[j] = r.f64();
        }
    }

    ckpt.tokenizer = tokenizer_from_text(r.str());
    ckpt.stats = stats_from_text(r.str());

    TrainConfig& t = ckpt.train_config;
    t.batch_size = r.u64();
    t.real_mix = r.f64();
    t.learning_rate = r.f64();
    t.max_steps = r.u64();
    t.eval_interval = r.u64();
    t.patience = r.u64();
    t.validation_fraction = r.f64();
    t.seed = r.u64();

    ckpt.final_train_loss = r.f64();
    ckpt.final_val_loss = r.f64();
    ckpt.seed_lineage = r.str();
    if (!r.done()) {
        throw DataError("checkpoint payload has trailing bytes");
    }
    return ckpt;
}

}  // namespace macrocast
