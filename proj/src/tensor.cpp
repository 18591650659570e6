#include "macrocast/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "macrocast/errors.hpp"

namespace macrocast {

namespace testhook {
bool corrupt_softmax_backward = false;
}

namespace {

constexpr double kLayerNormEps = 1e-5;
constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

size_t numel(const std::vector<size_t>& shape) {
    size_t n = 1;
    for (size_t d : shape) {
        n *= d;
    }
    return n;
}

void check(bool cond, const char* msg) {
    if (!cond) {
        throw NumericError(msg);
    }
}

}  // namespace

Tensor::Tensor(std::vector<size_t> s, bool rg) : shape(std::move(s)), requires_grad(rg) {
    data.assign(numel(shape), 0.0);
    if (requires_grad) {
        grad.assign(data.size(), 0.0);
    }
}

void Tensor::zero_grad() {
    std::fill(grad.begin(), grad.end(), 0.0);
}

TensorPtr make_tensor(std::vector<size_t> shape, bool requires_grad) {
    return std::make_shared<Tensor>(std::move(shape), requires_grad);
}

TensorPtr make_scalar(double v, bool requires_grad) {
    auto t = make_tensor({1}, requires_grad);
    t->data[0] = v;
    return t;
}

TensorPtr Graph::result(std::vector<size_t> shape, bool needs_grad) {
    return make_tensor(std::move(shape), record_ && needs_grad);
}

void Graph::push(std::function<void()> fn) {
    if (record_) {
        tape_.push_back(std::move(fn));
    }
}

void Graph::backward(const TensorPtr& loss) {
    check(loss->size() == 1, "backward target must be a scalar");
    check(loss->requires_grad, "backward target does not track gradients");
    loss->grad[0] = 1.0;
    for (auto it = tape_.rbegin(); it != tape_.rend(); ++it) {
        (*it)();
    }
}

// ---------------------------------------------------------------------------
// Primitives
// ---------------------------------------------------------------------------

TensorPtr Graph::matmul(const TensorPtr& a, const TensorPtr& b) {
    check(a->shape.size() == 2 && b->shape.size() == 2, "matmul expects 2-D operands");
    const size_t m = a->rows();
    const size_t k = a->cols();
    const size_t n = b->cols();
    check(b->rows() == k, "matmul inner dimensions differ");

    auto out = result({m, n}, a->requires_grad || b->requires_grad);
    const double* pa = a->data.data();
    const double* pb = b->data.data();
    double* po = out->data.data();
    // i-k-j order: streams through b rows, cache friendly.
    for (size_t i = 0; i < m; ++i) {
        double* orow = po + i * n;
        for (size_t kk = 0; kk < k; ++kk) {
            const double av = pa[i * k + kk];
            if (av == 0.0) {
                continue;
            }
            const double* brow = pb + kk * n;
            for (size_t j = 0; j < n; ++j) {
                orow[j] += av * brow[j];
            }
        }
    }

    if (out->requires_grad) {
        push([a, b, out, m, k, n] {
            const double* g = out->grad.data();
            if (a->requires_grad) {
                // dA = dOut * B^T
                double* ga = a->grad.data();
                const double* pb2 = b->data.data();
                for (size_t i = 0; i < m; ++i) {
                    for (size_t kk = 0; kk < k; ++kk) {
                        double acc = 0.0;
                        const double* grow = g + i * n;
                        const double* brow = pb2 + kk * n;
                        for (size_t j = 0; j < n; ++j) {
                            acc += grow[j] * brow[j];
                        }
                        ga[i * k + kk] += acc;
                    }
                }
            }
            if (b->requires_grad) {
                // dB = A^T * dOut
                double* gb = b->grad.data();
                const double* pa2 = a->data.data();
                for (size_t kk = 0; kk < k; ++kk) {
                    for (size_t i = 0; i < m; ++i) {
                        const double av = pa2[i * k + kk];
                        if (av == 0.0) {
                            continue;
                        }
                        const double* grow = g + i * n;
                        double* brow = gb + kk * n;
                        for (size_t j = 0; j < n; ++j) {
                            brow[j] += av * grow[j];
                        }
                    }
                }
            }
        });
    }
    return out;
}

TensorPtr Graph::add(const TensorPtr& a, const TensorPtr& b) {
    check(a->shape == b->shape, "add expects equal shapes");
    auto out = result(a->shape, a->requires_grad || b->requires_grad);
    for (size_t i = 0; i < a->size(); ++i) {
        out->data[i] = a->data[i] + b->data[i];
    }
    if (out->requires_grad) {
        push([a, b, out] {
            if (a->requires_grad) {
                for (size_t i = 0; i < a->size(); ++i) {
                    a->grad[i] += out->grad[i];
                }
            }
            if (b->requires_grad) {
                for (size_t i = 0; i < b->size(); ++i) {
                    b->grad[i] += out->grad[i];
                }
            }
        });
    }
    return out;
}

TensorPtr Graph::add_row_vector(const TensorPtr& a, const TensorPtr& bias) {
    const size_t r = a->rows();
    const size_t c = a->cols();
    check(bias->size() == c, "bias length must equal the column count");
    auto out = result(a->shape, a->requires_grad || bias->requires_grad);
    for (size_t i = 0; i < r; ++i) {
        for (size_t j = 0; j < c; ++j) {
            out->data[i * c + j] = a->data[i * c + j] + bias->data[j];
        }
    }
    if (out->requires_grad) {
        push([a, bias, out, r, c] {
            if (a->requires_grad) {
                for (size_t i = 0; i < a->size(); ++i) {
                    a->grad[i] += out->grad[i];
                }
            }
            if (bias->requires_grad) {
                for (size_t i = 0; i < r; ++i) {
                    for (size_t j = 0; j < c; ++j) {
                        bias->grad[j] += out->grad[i * c + j];
                    }
                }
            }
        });
    }
    return out;
}

TensorPtr Graph::repeat_rows(const TensorPtr& a, size_t times) {
    const size_t r = a->rows();
    const size_t c = a->cols();
    auto out = result({r * times, c}, a->requires_grad);
    for (size_t t = 0; t < times; ++t) {
        std::copy(a->data.begin(), a->data.end(), out->data.begin() + t * r * c);
    }
    if (out->requires_grad) {
        push([a, out, times, r, c] {
            for (size_t t = 0; t < times; ++t) {
                const double* g = out->grad.data() + t * r * c;
                for (size_t i = 0; i < r * c; ++i) {
                    a->grad[i] += g[i];
                }
            }
        });
    }
    return out;
}

TensorPtr Graph::gelu(const TensorPtr& a) {
    auto out = result(a->shape, a->requires_grad);
    for (size_t i = 0; i < a->size(); ++i) {
        const double x = a->data[i];
        out->data[i] = 0.5 * x * (1.0 + std::erf(x * kInvSqrt2));
    }
    if (out->requires_grad) {
        push([a, out] {
            for (size_t i = 0; i < a->size(); ++i) {
                const double x = a->data[i];
                const double cdf = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
                const double pdf = kInvSqrt2Pi * std::exp(-0.5 * x * x);
                a->grad[i] += out->grad[i] * (cdf + x * pdf);
            }
        });
    }
    return out;
}

TensorPtr Graph::softmax_rows(const TensorPtr& a) {
    const size_t r = a->rows();
    const size_t c = a->cols();
    check(c >= 1, "softmax over an empty axis");
    auto out = result(a->shape, a->requires_grad);
    for (size_t i = 0; i < r; ++i) {
        const double* x = a->data.data() + i * c;
        double* y = out->data.data() + i * c;
        double mx = x[0];
        for (size_t j = 1; j < c; ++j) {
            mx = std::max(mx, x[j]);
        }
        double sum = 0.0;
        for (size_t j = 0; j < c; ++j) {
            y[j] = std::exp(x[j] - mx);
            sum += y[j];
        }
        const double inv = 1.0 / sum;
        for (size_t j = 0; j < c; ++j) {
            y[j] *= inv;
        }
    }
    if (out->requires_grad) {
        push([a, out, r, c] {
            const double fudge = testhook::corrupt_softmax_backward ? 1.05 : 1.0;
            for (size_t i = 0; i < r; ++i) {
                const double* y = out->data.data() + i * c;
                const double* gy = out->grad.data() + i * c;
                double dot = 0.0;
                for (size_t j = 0; j < c; ++j) {
                    dot += gy[j] * y[j];
                }
                double* ga = a->grad.data() + i * c;
                for (size_t j = 0; j < c; ++j) {
                    ga[j] += fudge * y[j] * (gy[j] - dot);
                }
            }
        });
    }
    return out;
}

TensorPtr Graph::layer_norm_rows(const TensorPtr& a, const TensorPtr& gain,
                                 const TensorPtr& bias) {
    const size_t r = a->rows();
    const size_t c = a->cols();
    check(gain->size() == c && bias->size() == c, "layer norm gain/bias must match columns");
    auto out = result(a->shape, a->requires_grad || gain->requires_grad || bias->requires_grad);

    // Keep per-row mean and inverse std for the backward pass.
    auto mean = std::make_shared<std::vector<double>>(r);
    auto inv_std = std::make_shared<std::vector<double>>(r);
    for (size_t i = 0; i < r; ++i) {
        const double* x = a->data.data() + i * c;
        double mu = 0.0;
        for (size_t j = 0; j < c; ++j) {
            mu += x[j];
        }
        mu /= static_cast<double>(c);
        double var = 0.0;
        for (size_t j = 0; j < c; ++j) {
            const double dx = x[j] - mu;
            var += dx * dx;
        }
        var /= static_cast<double>(c);
        const double is = 1.0 / std::sqrt(var + kLayerNormEps);
        (*mean)[i] = mu;
        (*inv_std)[i] = is;
        double* y = out->data.data() + i * c;
        for (size_t j = 0; j < c; ++j) {
            y[j] = (x[j] - mu) * is * gain->data[j] + bias->data[j];
        }
    }

    if (out->requires_grad) {
        push([a, gain, bias, out, mean, inv_std, r, c] {
            const double cn = static_cast<double>(c);
            for (size_t i = 0; i < r; ++i) {
                const double* x = a->data.data() + i * c;
                const double* gy = out->grad.data() + i * c;
                const double mu = (*mean)[i];
                const double is = (*inv_std)[i];
                if (gain->requires_grad || bias->requires_grad) {
                    for (size_t j = 0; j < c; ++j) {
                        const double xhat = (x[j] - mu) * is;
                        if (gain->requires_grad) {
                            gain->grad[j] += gy[j] * xhat;
                        }
                        if (bias->requires_grad) {
                            bias->grad[j] += gy[j];
                        }
                    }
                }
                if (a->requires_grad) {
                    // dxhat = gy * gain; dx = is * (dxhat - mean(dxhat)
                    //        - xhat * mean(dxhat * xhat))
                    double sum_dxhat = 0.0;
                    double sum_dxhat_xhat = 0.0;
                    for (size_t j = 0; j < c; ++j) {
                        const double dxhat = gy[j] * gain->data[j];
                        const double xhat = (x[j] - mu) * is;
                        sum_dxhat += dxhat;
                        sum_dxhat_xhat += dxhat * xhat;
                    }
                    double* ga = a->grad.data() + i * c;
                    for (size_t j = 0; j < c; ++j) {
                        const double dxhat = gy[j] * gain->data[j];
                        const double xhat = (x[j] - mu) * is;
                        ga[j] += is * (dxhat - sum_dxhat / cn - xhat * sum_dxhat_xhat / cn);
                    }
                }
            }
        });
    }
    return out;
}

TensorPtr Graph::embedding_lookup(const TensorPtr& table, const std::vector<int>& ids) {
    check(table->shape.size() == 2, "embedding table must be 2-D");
    const size_t vocab = table->rows();
    const size_t d = table->cols();
    auto out = result({ids.size(), d}, table->requires_grad);
    for (size_t i = 0; i < ids.size(); ++i) {
        const int id = ids[i];
        if (id < 0 || static_cast<size_t>(id) >= vocab) {
            throw NumericError("embedding id " + std::to_string(id) + " out of vocabulary 0.." +
                               std::to_string(vocab - 1));
        }
        std::copy(table->data.begin() + id * d, table->data.begin() + (id + 1) * d,
                  out->data.begin() + i * d);
    }
    if (out->requires_grad) {
        const auto ids_copy = std::make_shared<std::vector<int>>(ids);
        push([table, out, ids_copy, d] {
            for (size_t i = 0; i < ids_copy->size(); ++i) {
                const size_t id = static_cast<size_t>((*ids_copy)[i]);
                const double* g = out->grad.data() + i * d;
                double* gt = table->grad.data() + id * d;
                for (size_t j = 0; j < d; ++j) {
                    gt[j] += g[j];
                }
            }
        });
    }
    return out;
}

TensorPtr Graph::concat_cols(const std::vector<TensorPtr>& parts) {
    check(!parts.empty(), "concat of zero tensors");
    const size_t r = parts.front()->rows();
    size_t total = 0;
    bool needs_grad = false;
    for (const auto& p : parts) {
        check(p->rows() == r, "concat parts must share the row count");
        total += p->cols();
        needs_grad = needs_grad || p->requires_grad;
    }
    auto out = result({r, total}, needs_grad);
    size_t offset = 0;
    for (const auto& p : parts) {
        const size_t c = p->cols();
        for (size_t i = 0; i < r; ++i) {
            std::copy(p->data.begin() + i * c, p->data.begin() + (i + 1) * c,
                      out->data.begin() + i * total + offset);
        }
        offset += c;
    }
    if (out->requires_grad) {
        push([parts, out, r, total] {
            size_t off = 0;
            for (const auto& p : parts) {
                const size_t c = p->cols();
                if (p->requires_grad) {
                    for (size_t i = 0; i < r; ++i) {
                        const double* g = out->grad.data() + i * total + off;
                        double* gp = p->grad.data() + i * c;
                        for (size_t j = 0; j < c; ++j) {
                            gp[j] += g[j];
                        }
                    }
                }
                off += c;
            }
        });
    }
    return out;
}

TensorPtr Graph::causal_attention(const TensorPtr& q, const TensorPtr& k, const TensorPtr& v,
                                  size_t batch, size_t seq, size_t heads, AttentionTrace* trace) {
    const size_t width = q->cols();
    check(q->shape == k->shape && k->shape == v->shape, "attention inputs must share shapes");
    check(q->rows() == batch * seq, "attention row count must equal batch*seq");
    check(width % heads == 0, "attention width must be divisible by heads");
    const size_t hd = width / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(hd));

    auto out = result(q->shape, q->requires_grad || k->requires_grad || v->requires_grad);

    // Post-softmax weights, needed by backward and exposed via the trace.
    auto weights = std::make_shared<std::vector<double>>(batch * heads * seq * seq, 0.0);

    for (size_t b = 0; b < batch; ++b) {
        for (size_t h = 0; h < heads; ++h) {
            double* w = weights->data() + (b * heads + h) * seq * seq;
            for (size_t i = 0; i < seq; ++i) {
                const double* qi = q->data.data() + (b * seq + i) * width + h * hd;
                // scores over j <= i only; the rest stay exactly zero
                double mx = -1e300;
                for (size_t j = 0; j <= i; ++j) {
                    const double* kj = k->data.data() + (b * seq + j) * width + h * hd;
                    double s = 0.0;
                    for (size_t d = 0; d < hd; ++d) {
                        s += qi[d] * kj[d];
                    }
                    s *= scale;
                    w[i * seq + j] = s;
                    mx = std::max(mx, s);
                }
                double sum = 0.0;
                for (size_t j = 0; j <= i; ++j) {
                    const double e = std::exp(w[i * seq + j] - mx);
                    w[i * seq + j] = e;
                    sum += e;
                }
                const double inv = 1.0 / sum;
                for (size_t j = 0; j <= i; ++j) {
                    w[i * seq + j] *= inv;
                }
                double* oi = out->data.data() + (b * seq + i) * width + h * hd;
                for (size_t j = 0; j <= i; ++j) {
                    const double a = w[i * seq + j];
                    const double* vj = v->data.data() + (b * seq + j) * width + h * hd;
                    for (size_t d = 0; d < hd; ++d) {
                        oi[d] += a * vj[d];
                    }
                }
            }
        }
    }

    if (trace) {
        trace->batch = batch;
        trace->heads = heads;
        trace->seq = seq;
        trace->weights = *weights;
    }

    if (out->requires_grad) {
        push([q, k, v, out, weights, batch, seq, heads, hd, width, scale] {
            std::vector<double> d_att(seq);
            for (size_t b = 0; b < batch; ++b) {
                for (size_t h = 0; h < heads; ++h) {
                    const double* w = weights->data() + (b * heads + h) * seq * seq;
                    for (size_t i = 0; i < seq; ++i) {
                        const double* go = out->grad.data() + (b * seq + i) * width + h * hd;
                        // dA_ij = dOut_i . V_j ; dV_j += A_ij dOut_i
                        double dot = 0.0;
                        for (size_t j = 0; j <= i; ++j) {
                            const double* vj = v->data.data() + (b * seq + j) * width + h * hd;
                            double da = 0.0;
                            for (size_t d = 0; d < hd; ++d) {
                                da += go[d] * vj[d];
                            }
                            d_att[j] = da;
                            dot += da * w[i * seq + j];
                            if (v->requires_grad) {
                                double* gv = v->grad.data() + (b * seq + j) * width + h * hd;
                                const double a = w[i * seq + j];
                                for (size_t d = 0; d < hd; ++d) {
                                    gv[d] += a * go[d];
                                }
                            }
                        }
                        // softmax backward then score gradients
                        const double* qi = q->data.data() + (b * seq + i) * width + h * hd;
                        double* gq = q->requires_grad
                                         ? q->grad.data() + (b * seq + i) * width + h * hd
                                         : nullptr;
                        for (size_t j = 0; j <= i; ++j) {
                            const double ds = w[i * seq + j] * (d_att[j] - dot) * scale;
                            const double* kj = k->data.data() + (b * seq + j) * width + h * hd;
                            if (gq) {
                                for (size_t d = 0; d < hd; ++d) {
                                    gq[d] += ds * kj[d];
                                }
                            }
                            if (k->requires_grad) {
                                double* gk = k->grad.data() + (b * seq + j) * width + h * hd;
                                for (size_t d = 0; d < hd; ++d) {
                                    gk[d] += ds * qi[d];
                                }
                            }
                        }
                    }
                }
            }
        });
    }
    return out;
}

TensorPtr Graph::cross_entropy_mean(const TensorPtr& logits, const std::vector<int>& targets) {
    const size_t r = logits->rows();
    const size_t c = logits->cols();
    check(targets.size() == r, "one target per logits row required");
    for (int t : targets) {
        if (t < 0 || static_cast<size_t>(t) >= c) {
            throw NumericError("cross-entropy target " + std::to_string(t) + " out of 0.." +
                               std::to_string(c - 1));
        }
    }
    auto out = result({1}, logits->requires_grad);

    // Cache softmax rows for the backward pass.
    auto probs = std::make_shared<std::vector<double>>(r * c);
    double total = 0.0;
    for (size_t i = 0; i < r; ++i) {
        const double* x = logits->data.data() + i * c;
        double* p = probs->data() + i * c;
        double mx = x[0];
        for (size_t j = 1; j < c; ++j) {
            mx = std::max(mx, x[j]);
        }
        double sum = 0.0;
        for (size_t j = 0; j < c; ++j) {
            p[j] = std::exp(x[j] - mx);
            sum += p[j];
        }
        const double inv = 1.0 / sum;
        for (size_t j = 0; j < c; ++j) {
            p[j] *= inv;
        }
        total += std::log(sum) + mx - x[targets[i]];
    }
    out->data[0] = total / static_cast<double>(r);

    if (out->requires_grad) {
        const auto targets_copy = std::make_shared<std::vector<int>>(targets);
        push([logits, out, probs, targets_copy, r, c] {
            const double g = out->grad[0] / static_cast<double>(r);
            for (size_t i = 0; i < r; ++i) {
                const double* p = probs->data() + i * c;
                double* gl = logits->grad.data() + i * c;
                const size_t y = static_cast<size_t>((*targets_copy)[i]);
                for (size_t j = 0; j < c; ++j) {
                    gl[j] += g * (p[j] - (j == y ? 1.0 : 0.0));
                }
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// Gradient check
// ---------------------------------------------------------------------------

double grad_check(const std::function<TensorPtr(Graph&)>& build_loss,
                  const std::vector<TensorPtr>& params, double step) {
    check(step > 0.0, "grad_check step must be positive");

    std::vector<std::vector<double>> analytic;
    {
        for (const auto& p : params) {
            p->zero_grad();
        }
        Graph g;
        auto loss = build_loss(g);
        if (!std::isfinite(loss->data[0])) {
            throw NumericError("grad_check: loss is not finite");
        }
        g.backward(loss);
        for (const auto& p : params) {
            analytic.push_back(p->grad);
        }
    }

    const auto eval = [&]() {
        Graph g(false);
        auto loss = build_loss(g);
        return loss->data[0];
    };

    double max_rel = 0.0;
    for (size_t pi = 0; pi < params.size(); ++pi) {
        auto& p = *params[pi];
        for (size_t i = 0; i < p.data.size(); ++i) {
            const double saved = p.data[i];
            p.data[i] = saved + step;
            const double fp = eval();
            p.data[i] = saved - step;
            const double fm = eval();
            p.data[i] = saved;
            const double numeric = (fp - fm) / (2.0 * step);
            const double a = analytic[pi][i];
            const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
            max_rel = std::max(max_rel, std::abs(a - numeric) / denom);
        }
    }
    return max_rel;
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

AdamState AdamState::init(const std::vector<TensorPtr>& params, double lr_in) {
    AdamState s;
    s.lr = lr_in;
    for (const auto& p : params) {
        s.m.emplace_back(p->size(), 0.0);
        s.v.emplace_back(p->size(), 0.0);
    }
    return s;
}

void adam_step(const std::vector<TensorPtr>& params, AdamState& state) {
    if (params.size() != state.m.size()) {
        throw NumericError("adam_step: parameter/state count mismatch");
    }
    state.step += 1;
    const double t = static_cast<double>(state.step);
    const double bc1 = 1.0 - std::pow(state.beta1, t);
    const double bc2 = 1.0 - std::pow(state.beta2, t);
    for (size_t pi = 0; pi < params.size(); ++pi) {
        auto& p = *params[pi];
        if (p.grad.size() != p.data.size()) {
            throw NumericError("adam_step: parameter has no gradient buffer");
        }
        auto& m = state.m[pi];
        auto& v = state.v[pi];
        for (size_t i = 0; i < p.data.size(); ++i) {
            const double g = p.grad[i];
            m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g;
            v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g * g;
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            p.data[i] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
        }
    }
}

}  // namespace macrocast
