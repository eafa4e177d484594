#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "paflab/blocks.hpp"
#include "paflab/graph.hpp"
#include "paflab/probe.hpp"
#include "paflab/variant.hpp"

namespace paflab {

class WorkerPool;

struct ModelConfig {
    std::size_t depth = 1;
    std::size_t dim = 64;
    std::size_t heads = 4;
    std::size_t ffn_dim = 256;
    std::size_t vocab = 16;
    std::size_t max_seq = 32;
    DesignVariant variant = DesignVariant::saf;
    Activation activation = Activation::gelu;
    double init_std = 0.02;
    std::uint64_t seed = 0;

    /// Throws ConfigError naming the offending field.
    void validate() const;

    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// One layer's parameters. PAF uses only ln1; ln2 is carried so that SAF and
/// PAF models share one parameter layout.
struct LayerParams {
    AttentionParams attention;
    FfnParams ffn;
    LayerNormParams ln1;
    LayerNormParams ln2;
};

struct Model {
    ModelConfig config;
    Tensor token_embedding;     // vocab x d
    Tensor position_embedding;  // max_seq x d, learned absolute positions
    std::vector<LayerParams> layers;
    Tensor head_weight;  // d x vocab
    Tensor head_bias;    // 1 x vocab

    /// Gaussian(0, init_std) weights, zero biases, unit layer-norm gains.
    static Model initialize(const ModelConfig& config);

    void validate() const;
    std::string id() const;
};

/// Visits every parameter tensor in the fixed checkpoint order:
/// token_embedding, position_embedding, then per layer
///   attn.{w_q,b_q,w_k,b_k,w_v,b_v,w_o,b_o}, ffn.{w1,b1,w2,b2},
///   ln1.{gain,bias}, ln2.{gain,bias},
/// then head.weight, head.bias.
void for_each_parameter(const Model& m, const std::function<void(const std::string&, const Tensor&)>& f);
void for_each_parameter(Model& m, const std::function<void(const std::string&, Tensor&)>& f);
std::vector<const Tensor*> parameter_list(const Model& m);
std::vector<Tensor*> parameter_list(Model& m);
std::vector<std::string> parameter_names(const Model& m);
std::size_t parameter_count(const Model& m);

/// Copies every tensor verbatim into a PAF model. PAF's single layer norm is
/// the SAF ln1. Throws ContractError unless the input is SAF.
Model transplant_saf_to_paf(const Model& saf);
/// Inverse of transplant_saf_to_paf.
Model transplant_paf_to_saf(const Model& paf);

enum class ExecutionMode { sequential, concurrent };

struct LayerVars {
    AttentionVars attention;
    FfnVars ffn;
    LayerNormVars ln1;
    LayerNormVars ln2;
};

struct ModelVars {
    Var token_embedding;
    Var position_embedding;
    std::vector<LayerVars> layers;
    Var head_weight;
    Var head_bias;

    /// Same order as for_each_parameter.
    std::vector<Var> parameters() const;
};

LayerVars bind(Graph& g, const LayerParams& p);
ModelVars bind(Graph& g, const Model& m);

struct LayerOptions {
    std::size_t layer_index = 0;
    bool probe = true;
    ExecutionMode mode = ExecutionMode::sequential;
    /// Runs the attention branch in concurrent mode; a fresh thread when null.
    WorkerPool* pool = nullptr;
};

struct LayerOutput {
    Var out;
    Var attn_residual;
    std::optional<Var> ffn_residual;
    LayerProbe probe;
};

/// Y = LN1(x + A(x)); out = LN2(Y + F(Y)).
LayerOutput saf_layer(Var x, const LayerVars& p, const LayerOptions& opts = {});
/// out = LN1(x + A(x) + F(x)). In concurrent mode A and F are recorded on two
/// branch graphs on separate threads and merged attention-first, so values
/// and gradients match sequential mode exactly.
LayerOutput paf_layer(Var x, const LayerVars& p, const LayerOptions& opts = {});
/// out = LN2(LN1(x + A(x))).
LayerOutput no_ffn_layer(Var x, const LayerVars& p, const LayerOptions& opts = {});
/// out = LN2(LN1(A(x))).
LayerOutput no_skip_no_ffn_layer(Var x, const LayerVars& p, const LayerOptions& opts = {});
LayerOutput apply_layer(DesignVariant variant, Var x, const LayerVars& p, const LayerOptions& opts = {});

struct LayerResult {
    Tensor out;
    LayerProbe probe;
};

LayerResult saf_layer(const Tensor& x, const LayerParams& p);
LayerResult paf_layer(const Tensor& x, const LayerParams& p, ExecutionMode mode = ExecutionMode::sequential,
                      WorkerPool* pool = nullptr);

struct ForwardOptions {
    ExecutionMode mode = ExecutionMode::sequential;
    bool probe = false;
    WorkerPool* pool = nullptr;
};

struct GraphForward {
    Var embedded;
    Var hidden;
    Var logits;
    std::vector<LayerProbe> probes;
};

/// Validates ids and length; throws InputError.
void check_tokens(const ModelConfig& config, std::span<const TokenId> tokens);

/// Token + position embedding, L layers, output head (n x vocab logits).
GraphForward forward(const Model& m, const ModelVars& vars, std::span<const TokenId> tokens,
                     const ForwardOptions& opts = {});

struct ForwardResult {
    Tensor logits;
    ProbeTrace trace;
};

/// Gradient-free forward with probes on every layer.
ForwardResult forward(const Model& m, std::span<const TokenId> tokens, const ForwardOptions& opts = {});

/// Embedding rows (token + position) for a sequence.
Tensor embed(const Model& m, std::span<const TokenId> tokens);
/// Runs only the layer stack on precomputed activations, without recording
/// gradients.
Tensor run_layers(const Model& m, const Tensor& x, ExecutionMode mode, WorkerPool* pool = nullptr);

}  // namespace paflab
