#include "paflab/blocks.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "paflab/errors.hpp"

namespace paflab {

namespace {

void require_shape(const Tensor& t, std::size_t rows, std::size_t cols, const char* what) {
    if (t.rows() != rows || t.cols() != cols) {
        throw DimensionError(std::string(what) + ": expected " + std::to_string(rows) + "x" +
                             std::to_string(cols) + ", got " + t.shape());
    }
}

void require_width(Var x, std::size_t dim, const char* block) {
    if (x.cols() != dim) {
        throw DimensionError(std::string(block) + ": input " + x.value().shape() + " does not have " +
                             std::to_string(dim) + " columns");
    }
}

}  // namespace

std::string_view to_string(Activation a) { return a == Activation::gelu ? "gelu" : "relu"; }

Activation parse_activation(std::string_view name) {
    if (name == "gelu") {
        return Activation::gelu;
    }
    if (name == "relu") {
        return Activation::relu;
    }
    throw ConfigError("unknown activation '" + std::string(name) + "' (expected gelu or relu)");
}

LayerNormParams LayerNormParams::identity(std::size_t dim) {
    return LayerNormParams{Tensor::filled(1, dim, 1.0), Tensor(1, dim), kLayerNormEpsilon};
}

void AttentionParams::validate() const {
    const std::size_t d = w_q.rows();
    if (heads == 0 || d % heads != 0) {
        throw ConfigError("attention: dim " + std::to_string(d) + " is not divisible by " +
                          std::to_string(heads) + " heads");
    }
    for (const Tensor* w : {&w_q, &w_k, &w_v, &w_o}) {
        require_shape(*w, d, d, "attention weight");
    }
    for (const Tensor* b : {&b_q, &b_k, &b_v, &b_o}) {
        require_shape(*b, 1, d, "attention bias");
    }
}

void FfnParams::validate() const {
    const std::size_t d = w1.rows();
    const std::size_t hidden = w1.cols();
    require_shape(b1, 1, hidden, "ffn b1");
    require_shape(w2, hidden, d, "ffn w2");
    require_shape(b2, 1, d, "ffn b2");
}

LayerNormVars bind(Graph& g, const LayerNormParams& p) {
    return LayerNormVars{g.parameter_view(p.gain), g.parameter_view(p.bias), p.epsilon};
}

AttentionVars bind(Graph& g, const AttentionParams& p) {
    p.validate();
    return AttentionVars{g.parameter_view(p.w_q), g.parameter_view(p.w_k), g.parameter_view(p.w_v), g.parameter_view(p.w_o),
                         g.parameter_view(p.b_q), g.parameter_view(p.b_k), g.parameter_view(p.b_v), g.parameter_view(p.b_o),
                         p.heads};
}

FfnVars bind(Graph& g, const FfnParams& p) {
    p.validate();
    return FfnVars{g.parameter_view(p.w1), g.parameter_view(p.b1), g.parameter_view(p.w2), g.parameter_view(p.b2), p.activation};
}

AttentionVars import_into(Graph& branch, const AttentionVars& p) {
    return AttentionVars{branch.import(p.w_q), branch.import(p.w_k), branch.import(p.w_v),
                         branch.import(p.w_o), branch.import(p.b_q), branch.import(p.b_k),
                         branch.import(p.b_v), branch.import(p.b_o), p.heads};
}

FfnVars import_into(Graph& branch, const FfnVars& p) {
    return FfnVars{branch.import(p.w1), branch.import(p.b1), branch.import(p.w2), branch.import(p.b2),
                   p.activation};
}

Var layer_norm(Var x, const LayerNormVars& p) { return layer_norm(x, p.gain, p.bias, p.epsilon); }

Var attention(Var x, const AttentionVars& p) {
    const std::size_t d = p.w_q.rows();
    require_width(x, d, "attention");
    const std::size_t head_dim = d / p.heads;
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(head_dim));

    const Var q = add_row(matmul(x, p.w_q), p.b_q);
    // q_i . b_k is the same for every key in row i, so softmax cancels it.
    // b_k is kept in the layout but does not enter the computation.
    const Var k = matmul(x, p.w_k);
    const Var v = add_row(matmul(x, p.w_v), p.b_v);

    std::vector<Var> heads;
    heads.reserve(p.heads);
    for (std::size_t h = 0; h < p.heads; ++h) {
        const std::size_t first = h * head_dim;
        const Var qh = split_cols(q, first, head_dim);
        const Var kh = split_cols(k, first, head_dim);
        const Var vh = split_cols(v, first, head_dim);
        const Var weights = softmax_rows(scale(matmul(qh, transpose(kh)), inv_sqrt));
        heads.push_back(matmul(weights, vh));
    }
    const Var mixed = heads.size() == 1 ? heads.front() : concat_cols(heads);
    return add_row(matmul(mixed, p.w_o), p.b_o);
}

Var ffn(Var x, const FfnVars& p) {
    require_width(x, p.w1.rows(), "ffn");
    const Var pre = add_row(matmul(x, p.w1), p.b1);
    const Var hidden = p.activation == Activation::gelu ? gelu(pre) : relu(pre);
    return add_row(matmul(hidden, p.w2), p.b2);
}

Tensor layer_norm(const Tensor& x, const LayerNormParams& p) {
    Graph g(Graph::GradMode::disabled);
    return layer_norm(g.constant_view(x), bind(g, p)).value();
}

Tensor attention(const Tensor& x, const AttentionParams& p) {
    Graph g(Graph::GradMode::disabled);
    return attention(g.constant_view(x), bind(g, p)).value();
}

Tensor ffn(const Tensor& x, const FfnParams& p) {
    Graph g(Graph::GradMode::disabled);
    return ffn(g.constant_view(x), bind(g, p)).value();
}

}  // namespace paflab
