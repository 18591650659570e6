#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "macrocast/tensor.hpp"

namespace macrocast {

// Dimensions of one per-variable forecasting model. The model width E is
// always num_vars * embed_per_var (one embedding slice per variable).
struct ModelConfig {
    size_t num_vars = 0;       // K
    size_t vocab = 0;          // J, tokens per variable
    size_t embed_per_var = 0;  // d
    size_t layers = 0;         // L
    size_t heads = 0;          // H
    size_t context = 0;        // T, quarters per window
    size_t target_var = 0;     // which variable the head predicts
    size_t mlp_factor = 2;     // feedforward hidden width = mlp_factor * E

    size_t width() const { return num_vars * embed_per_var; }  // E

    void validate() const;  // throws ConfigError
};

struct LayerParams {
    TensorPtr ln1_gain, ln1_bias;
    TensorPtr wq, bq, wk, bk, wv, bv, wo, bo;
    TensorPtr ln2_gain, ln2_bias;
    TensorPtr w1, b1;  // E -> mlp_factor*E
    TensorPtr w2, b2;  // mlp_factor*E -> E
};

// All learnable arrays of one model. The flattening order of all()/names()
// is fixed; checkpoints and optimizer state depend on it.
struct ModelParams {
    ModelConfig config;
    std::vector<TensorPtr> embed;  // K tables, each [J, d]
    TensorPtr pos;                 // [T, E]
    std::vector<LayerParams> layers;
    TensorPtr lnf_gain, lnf_bias;
    TensorPtr head_w;  // [E, J]
    TensorPtr head_b;  // [J]

    std::vector<TensorPtr> all() const;
    std::vector<std::string> names() const;  // parallel to all()
    size_t flat_size() const;                // total scalar count
    void zero_grads() const;
};

// Closed-form learnable-scalar count; always equals flat_size() of a model
// initialized from the same config.
size_t param_count(const ModelConfig& config);

// Weights ~ N(0, 0.02^2); layer-norm gains 1; all biases 0. Deterministic
// in the seed.
ModelParams init_model(const ModelConfig& config, uint64_t seed);

// One forward batch: per-variable token ids, window-major then position, so
// tokens[k][b*T + t] is variable k's token at position t of window b.
struct BatchInput {
    size_t batch = 0;
    std::vector<std::vector<int>> tokens;  // K vectors of length batch*T
};

// Intermediate activations captured for inspection and tests.
struct ForwardTrace {
    std::vector<AttentionTrace> attention;  // one per layer
    TensorPtr final_hidden;                 // [batch*T, E] after the final norm
};

// Logits for every position of every window: [batch*T, J]. Row b*T+t scores
// the target variable's next-step token after position t.
TensorPtr forward_batch(Graph& g, const ModelParams& params, const BatchInput& input,
                        ForwardTrace* trace = nullptr);

// Single-window inference. `window` holds T*K tokens laid out t-major
// (window[t*K + k]); the result is the last position's J logits.
std::vector<double> forward_logits(const ModelParams& params, const std::vector<int>& window);

// softmax(forward_logits); the point prediction is argmax_lowest of this.
std::vector<double> predict_distribution(const ModelParams& params,
                                         const std::vector<int>& window);

// Index of the maximum; ties break toward the lowest index.
size_t argmax_lowest(const std::vector<double>& v);

}  // namespace macrocast
