#pragma once

#include <cstddef>
#include <string_view>

#include "paflab/graph.hpp"
#include "paflab/ops.hpp"
#include "paflab/tensor.hpp"

namespace paflab {

inline constexpr double kLayerNormEpsilon = 1e-5;

enum class Activation { gelu, relu };

std::string_view to_string(Activation a);
Activation parse_activation(std::string_view name);

struct LayerNormParams {
    Tensor gain;  // 1 x d
    Tensor bias;  // 1 x d
    double epsilon = kLayerNormEpsilon;

    /// gain = 1, bias = 0.
    static LayerNormParams identity(std::size_t dim);
};

/// Projections are d x d, applied on the right of row-major activations
/// (Q = X * w_q + b_q). Heads partition the d columns into equal slices.
struct AttentionParams {
    Tensor w_q, w_k, w_v, w_o;
    Tensor b_q, b_k, b_v, b_o;
    std::size_t heads = 1;

    std::size_t dim() const { return w_q.rows(); }
    std::size_t head_dim() const { return dim() / heads; }
    /// Throws ConfigError if d is not divisible by heads, DimensionError on
    /// inconsistent shapes.
    void validate() const;
};

struct FfnParams {
    Tensor w1;  // d x d_ff
    Tensor b1;  // 1 x d_ff
    Tensor w2;  // d_ff x d
    Tensor b2;  // 1 x d
    Activation activation = Activation::gelu;

    void validate() const;
};

// Parameters bound as graph leaves.

struct LayerNormVars {
    Var gain, bias;
    double epsilon = kLayerNormEpsilon;
};

struct AttentionVars {
    Var w_q, w_k, w_v, w_o;
    Var b_q, b_k, b_v, b_o;
    std::size_t heads = 1;
};

struct FfnVars {
    Var w1, b1, w2, b2;
    Activation activation = Activation::gelu;
};

LayerNormVars bind(Graph& g, const LayerNormParams& p);
AttentionVars bind(Graph& g, const AttentionParams& p);
FfnVars bind(Graph& g, const FfnParams& p);

/// Imports already-bound parameters into a branch graph.
AttentionVars import_into(Graph& branch, const AttentionVars& p);
FfnVars import_into(Graph& branch, const FfnVars& p);

Var layer_norm(Var x, const LayerNormVars& p);

/// Multi-head self-attention residual A(x): no skip connection and no layer
/// norm. Bidirectional, unmasked, scores scaled by 1/sqrt(d/h). The key bias
/// shifts each score row by a constant and is therefore omitted; its
/// gradient is exactly zero.
Var attention(Var x, const AttentionVars& p);

/// Feed-forward residual F(x) = act(x * w1 + b1) * w2 + b2.
Var ffn(Var x, const FfnVars& p);

// Convenience evaluations without gradient recording.
Tensor layer_norm(const Tensor& x, const LayerNormParams& p);
Tensor attention(const Tensor& x, const AttentionParams& p);
Tensor ffn(const Tensor& x, const FfnParams& p);

}  // namespace paflab
