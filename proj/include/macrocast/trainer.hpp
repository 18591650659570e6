#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "macrocast/model.hpp"
#include "macrocast/panel.hpp"
#include "macrocast/rng.hpp"
#include "macrocast/tokenizer.hpp"

namespace macrocast {

// Training hyperparameters for one model.
struct TrainConfig {
    size_t batch_size = 256;          // B
    double real_mix = 0.1;            // alpha, real fraction of each batch
    double learning_rate = 3e-4;
    size_t max_steps = 20000;
    size_t eval_interval = 250;
    size_t patience = 8;              // evaluations without improvement
    double validation_fraction = 0.15;
    uint64_t seed = 0;

    void validate() const;  // throws ConfigError
};

// One training window: context rows [start, start+T) of a token panel, with
// next-step targets at rows start+1 .. start+T. Windows are references, not
// copies; the store does not own the panels.
struct WindowRef {
    size_t panel = 0;  // index into WindowStore::panels
    size_t start = 0;
};

struct WindowStore {
    std::vector<const TokenPanel*> panels;  // real panels first, then synthetic
    std::vector<WindowRef> real_train;
    std::vector<WindowRef> real_val;        // latest real windows, held out
    std::vector<WindowRef> synthetic;
    size_t context = 0;  // T
    std::vector<std::string> warnings;      // skipped-panel notices
};

// Slides a length-(T+1) window over every panel: a panel of N rows yields
// N-T windows. Real windows are split chronologically, the latest
// validation_fraction going to validation. Panels shorter than T+1 are
// skipped with a warning.
WindowStore build_windows(const std::vector<const TokenPanel*>& real_panels,
                          const std::vector<const TokenPanel*>& synthetic_panels, size_t context,
                          double validation_fraction);

// Draws exactly round(alpha*B) real-train windows and B minus that many
// synthetic windows, each uniformly with replacement, then shuffles the
// batch order. Errors if a needed pool is empty.
std::vector<WindowRef> sample_mixed_batch(const WindowStore& store, size_t batch_size,
                                          double alpha, Rng& rng);

// Materializes token ids and next-step targets for a batch of windows.
void fill_batch(const WindowStore& store, const std::vector<WindowRef>& refs, size_t target_var,
                BatchInput& input, std::vector<int>& targets);

// Mean cross-entropy (and argmax accuracy) over a window set, evaluated in
// chunks without recording gradients.
struct EvalResult {
    double loss = 0.0;
    double accuracy = 0.0;
};

EvalResult evaluate(const ModelParams& params, const WindowStore& store,
                    const std::vector<WindowRef>& refs, size_t chunk_windows);

// One row per evaluation: step index, the training loss of the batch
// processed at that step, and the validation loss measured before it.
struct TraceRow {
    size_t step = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
};

void save_loss_trace(const std::string& path, const std::vector<TraceRow>& rows);

// Everything needed to forecast: model, tokenizer, standardization, and the
// training provenance. Self-contained by design.
struct Checkpoint {
    ModelConfig model_config;
    std::vector<std::string> var_names;  // K names, target = var_names[target_var]
    ModelParams params;
    TokenizerSpec tokenizer;
    StandardizationStats stats;
    TrainConfig train_config;
    double final_train_loss = 0.0;
    double final_val_loss = 0.0;   // best validation loss reached
    std::string seed_lineage;      // human-readable derivation note
};

struct TrainResult {
    Checkpoint checkpoint;
    std::vector<TraceRow> trace;
    size_t steps_run = 0;
    bool early_stopped = false;
};

// Runs up to max_steps Adam steps on mixed batches; evaluates on the real
// validation windows every eval_interval steps (and at step 0), keeps the
// best-validation parameters, and stops after `patience` evaluations without
// improvement. Non-finite loss aborts with the step index.
TrainResult train_model(const ModelConfig& model_config, const WindowStore& store,
                        const TrainConfig& train_config, const TokenizerSpec& tokenizer,
                        const StandardizationStats& stats,
                        const std::vector<std::string>& var_names,
                        const std::string& seed_lineage);

// Binary checkpoint file: magic, format version, payload length, FNV-1a
// checksum, payload. load(save(x)) is bit-exact; version or checksum
// mismatches are explicit errors.
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace macrocast
