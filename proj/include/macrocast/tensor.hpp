#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

namespace macrocast {

// ---------------------------------------------------------------------------
// Tensor
// ---------------------------------------------------------------------------

// Dense row-major tensor of doubles, 1-D or 2-D. Gradients accumulate into
// `grad` when requires_grad is set.
class Tensor {
public:
    std::vector<size_t> shape;
    std::vector<double> data;
    std::vector<double> grad;
    bool requires_grad = false;

    Tensor() = default;
    Tensor(std::vector<size_t> s, bool rg);

    size_t size() const { return data.size(); }
    size_t rows() const { return shape.empty() ? 1 : shape[0]; }
    size_t cols() const { return shape.size() < 2 ? 1 : shape[1]; }
    double& at(size_t r, size_t c) { return data[r * cols() + c]; }
    double at(size_t r, size_t c) const { return data[r * cols() + c]; }

    void zero_grad();
};

using TensorPtr = std::shared_ptr<Tensor>;

TensorPtr make_tensor(std::vector<size_t> shape, bool requires_grad = false);
TensorPtr make_scalar(double v, bool requires_grad = false);

// Post-softmax attention weights captured for inspection, one T x T matrix
// per (batch, head); entries above the diagonal are exactly zero.
struct AttentionTrace {
    size_t batch = 0;
    size_t heads = 0;
    size_t seq = 0;
    std::vector<double> weights;  // batch * heads * seq * seq

    double at(size_t b, size_t h, size_t i, size_t j) const {
        return weights[((b * heads + h) * seq + i) * seq + j];
    }
};

namespace testhook {
// When set, the softmax backward pass is deliberately scaled wrong. Used by
// the selftest negative control to prove the gradient checker can fail.
extern bool corrupt_softmax_backward;
}  // namespace testhook

// ---------------------------------------------------------------------------
// Graph
// ---------------------------------------------------------------------------

// Dynamic computation tape, rebuilt for every batch. Ops append backward
// closures; backward() replays them in reverse creation order, which keeps
// gradient accumulation deterministic.
class Graph {
public:
    explicit Graph(bool record = true) : record_(record) {}

    // [m,k] x [k,n] -> [m,n]
    TensorPtr matmul(const TensorPtr& a, const TensorPtr& b);
    // elementwise, same shape
    TensorPtr add(const TensorPtr& a, const TensorPtr& b);
    // [r,c] + [c] broadcast over rows
    TensorPtr add_row_vector(const TensorPtr& a, const TensorPtr& bias);
    // [r,c] -> [times*r, c] by tiling; backward sums the tiles
    TensorPtr repeat_rows(const TensorPtr& a, size_t times);
    TensorPtr gelu(const TensorPtr& a);
    // softmax over the last axis, log-sum-exp stabilized
    TensorPtr softmax_rows(const TensorPtr& a);
    // per-row normalization over the last axis with learnable gain/bias
    TensorPtr layer_norm_rows(const TensorPtr& a, const TensorPtr& gain, const TensorPtr& bias);
    // table [V,d], ids in 0..V-1 -> [ids.size(), d]
    TensorPtr embedding_lookup(const TensorPtr& table, const std::vector<int>& ids);
    // horizontal concatenation of parts with equal row counts
    TensorPtr concat_cols(const std::vector<TensorPtr>& parts);
    // q,k,v: [batch*seq, width]; causal multi-head attention with 1/sqrt(head
    // dim) scaling; position i attends to positions <= i within its window
    TensorPtr causal_attention(const TensorPtr& q, const TensorPtr& k, const TensorPtr& v,
                               size_t batch, size_t seq, size_t heads,
                               AttentionTrace* trace = nullptr);
    // mean of -log softmax(logits)[target] over rows -> scalar
    TensorPtr cross_entropy_mean(const TensorPtr& logits, const std::vector<int>& targets);

    void backward(const TensorPtr& loss);

private:
    TensorPtr result(std::vector<size_t> shape, bool needs_grad);
    void push(std::function<void()> fn);

    bool record_;
    std::vector<std::function<void()>> tape_;
};

// ---------------------------------------------------------------------------
// Gradient checking
// ---------------------------------------------------------------------------

// Compares analytic gradients against central finite differences, mutating
// each parameter element in turn. `build_loss` must construct the loss from
// the current parameter values on the given graph. Returns the maximum
// relative error, with denominator max(|analytic|, |numeric|, 1e-8).
double grad_check(const std::function<TensorPtr(Graph&)>& build_loss,
                  const std::vector<TensorPtr>& params, double step);

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

struct AdamState {
    std::vector<std::vector<double>> m;  // first moments, one per parameter
    std::vector<std::vector<double>> v;  // second moments
    uint64_t step = 0;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    static AdamState init(const std::vector<TensorPtr>& params, double lr);
};

// Standard Adam update with bias correction, reading each parameter's .grad.
void adam_step(const std::vector<TensorPtr>& params, AdamState& state);

}  // namespace macrocast
