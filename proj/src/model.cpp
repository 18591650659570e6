#include "macrocast/model.hpp"

#include <algorithm>
#include <cmath>

#include "macrocast/errors.hpp"
#include "macrocast/rng.hpp"

namespace macrocast {

namespace {

constexpr double kInitStd = 0.02;

void fill_normal(const TensorPtr& t, Rng& rng, double std_dev) {
    for (double& x : t->data) {
        x = rng.normal() * std_dev;
    }
}

void fill_const(const TensorPtr& t, double v) {
    std::fill(t->data.begin(), t->data.end(), v);
}

}  // namespace

void ModelConfig::validate() const {
    if (num_vars == 0 || vocab < 2 || embed_per_var == 0 || heads == 0 || context == 0 ||
        mlp_factor == 0) {
        throw ConfigError("model config has a zero or out-of-range dimension");
    }
    if (width() % heads != 0) {
        throw ConfigError("model width " + std::to_string(width()) +
                          " is not divisible by heads " + std::to_string(heads));
    }
    if (target_var >= num_vars) {
        throw ConfigError("target variable index " + std::to_string(target_var) +
                          " out of range for " + std::to_string(num_vars) + " variables");
    }
}

std::vector<TensorPtr> ModelParams::all() const {
    std::vector<TensorPtr> out;
    for (const auto& e : embed) {
        out.push_back(e);
    }
    out.push_back(pos);
    for (const auto& l : layers) {
        out.push_back(l.ln1_gain);
        out.push_back(l.ln1_bias);
        out.push_back(l.wq);
        out.push_back(l.bq);
        out.push_back(l.wk);
        out.push_back(l.bk);
        out.push_back(l.wv);
        out.push_back(l.bv);
        out.push_back(l.wo);
        out.push_back(l.bo);
        out.push_back(l.ln2_gain);
        out.push_back(l.ln2_bias);
        out.push_back(l.w1);
        out.push_back(l.b1);
        out.push_back(l.w2);
        out.push_back(l.b2);
    }
    out.push_back(lnf_gain);
    out.push_back(lnf_bias);
    out.push_back(head_w);
    out.push_back(head_b);
    return out;
}

std::vector<std::string> ModelParams::names() const {
    std::vector<std::string> out;
    for (size_t k = 0; k < embed.size(); ++k) {
        out.push_back("embed." + std::to_string(k));
    }
    out.push_back("pos");
    for (size_t l = 0; l < layers.size(); ++l) {
        const std::string p = "layer." + std::to_string(l) + ".";
        for (const char* n : {"ln1_gain", "ln1_bias", "wq", "bq", "wk", "bk", "wv", "bv", "wo",
                              "bo", "ln2_gain", "ln2_bias", "w1", "b1", "w2", "b2"}) {
            out.push_back(p + n);
        }
    }
    out.push_back("lnf_gain");
    out.push_back("lnf_bias");
    out.push_back("head_w");
    out.push_back("head_b");
    return out;
}

size_t ModelParams::flat_size() const {
    size_t n = 0;
    for (const auto& p : all()) {
        n += p->size();
    }
    return n;
}

void ModelParams::zero_grads() const {
    for (const auto& p : all()) {
        p->zero_grad();
    }
}

size_t param_count(const ModelConfig& c) {
    c.validate();
    const size_t E = c.width();
    const size_t f = c.mlp_factor;
    const size_t per_layer = 4 * E * E + 2 * f * E * E  // qkvo + feedforward weights
                             + (9 + f) * E;             // biases and layer-norm pairs
    return c.num_vars * c.vocab * c.embed_per_var  // embedding tables
           + c.context * E                         // positional table
           + c.layers * per_layer + 2 * E          // blocks + final norm
           + E * c.vocab + c.vocab;                // head
}

ModelParams init_model(const ModelConfig& config, uint64_t seed) {
    config.validate();
    const size_t E = config.width();
    const size_t J = config.vocab;
    const size_t d = config.embed_per_var;
    const size_t fE = config.mlp_factor * E;
    Rng rng(seed);

    ModelParams p;
    p.config = config;
    for (size_t k = 0; k < config.num_vars; ++k) {
        auto table = make_tensor({J, d}, true);
        fill_normal(table, rng, kInitStd);
        p.embed.push_back(table);
    }
    p.pos = make_tensor({config.context, E}, true);
    fill_normal(p.pos, rng, kInitStd);

    for (size_t l = 0; l < config.layers; ++l) {
        LayerParams lp;
        lp.ln1_gain = make_tensor({E}, true);
        lp.ln1_bias = make_tensor({E}, true);
        fill_const(lp.ln1_gain, 1.0);
        for (TensorPtr* w : {&lp.wq, &lp.wk, &lp.wv, &lp.wo}) {
            *w = make_tensor({E, E}, true);
            fill_normal(*w, rng, kInitStd);
        }
        lp.bq = make_tensor({E}, true);
        lp.bk = make_tensor({E}, true);
        lp.bv = make_tensor({E}, true);
        lp.bo = make_tensor({E}, true);
        lp.ln2_gain = make_tensor({E}, true);
        lp.ln2_bias = make_tensor({E}, true);
        fill_const(lp.ln2_gain, 1.0);
        lp.w1 = make_tensor({E, fE}, true);
        fill_normal(lp.w1, rng, kInitStd);
        lp.b1 = make_tensor({fE}, true);
        lp.w2 = make_tensor({fE, E}, true);
        fill_normal(lp.w2, rng, kInitStd);
        lp.b2 = make_tensor({E}, true);
        p.layers.push_back(std::move(lp));
    }

    p.lnf_gain = make_tensor({E}, true);
    p.lnf_bias = make_tensor({E}, true);
    fill_const(p.lnf_gain, 1.0);
    p.head_w = make_tensor({E, J}, true);
    fill_normal(p.head_w, rng, kInitStd);
    p.head_b = make_tensor({J}, true);
    return p;
}

TensorPtr forward_batch(Graph& g, const ModelParams& params, const BatchInput& input,
                        ForwardTrace* trace) {
    const ModelConfig& c = params.config;
    const size_t T = c.context;
    const size_t rows = input.batch * T;
    if (input.tokens.size() != c.num_vars) {
        throw DataError("batch carries " + std::to_string(input.tokens.size()) +
                        " variables, model expects " + std::to_string(c.num_vars));
    }
    for (size_t k = 0; k < c.num_vars; ++k) {
        if (input.tokens[k].size() != rows) {
            throw DataError("batch token stream " + std::to_string(k) + " has wrong length");
        }
        for (int id : input.tokens[k]) {
            if (id < 0 || static_cast<size_t>(id) >= c.vocab) {
                throw DataError("token " + std::to_string(id) + " out of range 0.." +
                                std::to_string(c.vocab - 1));
            }
        }
    }

    // Per-variable embeddings, concatenated to width E, plus positions.
    std::vector<TensorPtr> parts;
    parts.reserve(c.num_vars);
    for (size_t k = 0; k < c.num_vars; ++k) {
        parts.push_back(g.embedding_lookup(params.embed[k], input.tokens[k]));
    }
    TensorPtr x = g.concat_cols(parts);
    x = g.add(x, g.repeat_rows(params.pos, input.batch));

    if (trace) {
        trace->attention.assign(c.layers, AttentionTrace{});
    }
    for (size_t l = 0; l < c.layers; ++l) {
        const LayerParams& lp = params.layers[l];
        TensorPtr h = g.layer_norm_rows(x, lp.ln1_gain, lp.ln1_bias);
        TensorPtr q = g.add_row_vector(g.matmul(h, lp.wq), lp.bq);
        TensorPtr k = g.add_row_vector(g.matmul(h, lp.wk), lp.bk);
        TensorPtr v = g.add_row_vector(g.matmul(h, lp.wv), lp.bv);
        TensorPtr a = g.causal_attention(q, k, v, input.batch, T, c.heads,
                                         trace ? &trace->attention[l] : nullptr);
        a = g.add_row_vector(g.matmul(a, lp.wo), lp.bo);
        x = g.add(x, a);

        TensorPtr h2 = g.layer_norm_rows(x, lp.ln2_gain, lp.ln2_bias);
        TensorPtr m = g.add_row_vector(g.matmul(h2, lp.w1), lp.b1);
        m = g.gelu(m);
        m = g.add_row_vector(g.matmul(m, lp.w2), lp.b2);
        x = g.add(x, m);
    }

    TensorPtr xf = g.layer_norm_rows(x, params.lnf_gain, params.lnf_bias);
    if (trace) {
        trace->final_hidden = xf;
    }
    return g.add_row_vector(g.matmul(xf, params.head_w), params.head_b);
}

std::vector<double> forward_logits(const ModelParams& params, const std::vector<int>& window) {
    const ModelConfig& c = params.config;
    const size_t T = c.context;
    const size_t K = c.num_vars;
    if (window.size() != T * K) {
        throw DataError("window has " + std::to_string(window.size()) + " tokens, expected " +
                        std::to_string(T * K));
    }
    BatchInput input;
    input.batch = 1;
    input.tokens.assign(K, std::vector<int>(T));
    for (size_t t = 0; t < T; ++t) {
        for (size_t k = 0; k < K; ++k) {
            input.tokens[k][t] = window[t * K + k];
        }
    }
    Graph g(false);
    TensorPtr logits = forward_batch(g, params, input);
    const size_t J = c.vocab;
    std::vector<double> out(J);
    for (size_t j = 0; j < J; ++j) {
        out[j] = logits->at(T - 1, j);
    }
    return out;
}

std::vector<double> predict_distribution(const ModelParams& params,
                                         const std::vector<int>& window) {
    std::vector<double> z = forward_logits(params, window);
    const double mx = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (double& v : z) {
        v = std::exp(v - mx);
        sum += v;
    }
    for (double& v : z) {
        v /= sum;
    }
    return z;
}

size_t argmax_lowest(const std::vector<double>& v) {
    size_t best = 0;
    for (size_t i = 1; i < v.size(); ++i) {
        if (v[i] > v[best]) {
            best = i;
        }
    }
    return best;
}

}  // namespace macrocast
