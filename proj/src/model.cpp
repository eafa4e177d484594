#include "paflab/model.hpp"

#include <future>
#include <numeric>
#include <string>

#include "paflab/errors.hpp"
#include "paflab/rng.hpp"
#include "paflab/worker_pool.hpp"

namespace paflab {

void ModelConfig::validate() const {
    if (depth < 1) {
        throw ConfigError("model.depth must be >= 1");
    }
    if (dim < 1) {
        throw ConfigError("model.dim must be >= 1");
    }
    if (heads < 1 || dim % heads != 0) {
        throw ConfigError("model.dim (" + std::to_string(dim) + ") must be divisible by model.heads (" +
                          std::to_string(heads) + ")");
    }
    if (ffn_dim < 1) {
        throw ConfigError("model.ffn_dim must be >= 1");
    }
    if (vocab < 1) {
        throw ConfigError("model.vocab must be >= 1");
    }
    if (max_seq < 1) {
        throw ConfigError("model.max_seq must be >= 1");
    }
    if (!(init_std >= 0.0)) {
        throw ConfigError("model.init_std must be >= 0");
    }
}

Model Model::initialize(const ModelConfig& config) {
    config.validate();
    const std::size_t d = config.dim;
    const double s = config.init_std;
    Rng root(config.seed);

    Model m;
    m.config = config;
    Rng emb = root.fork(1);
    m.token_embedding = gaussian_init(emb, config.vocab, d, s);
    Rng pos = root.fork(2);
    m.position_embedding = gaussian_init(pos, config.max_seq, d, s);

    m.layers.reserve(config.depth);
    for (std::size_t l = 0; l < config.depth; ++l) {
        Rng r = root.fork(100 + l);
        LayerParams p;
        p.attention.heads = config.heads;
        p.attention.w_q = gaussian_init(r, d, d, s);
        p.attention.w_k = gaussian_init(r, d, d, s);
        p.attention.w_v = gaussian_init(r, d, d, s);
        p.attention.w_o = gaussian_init(r, d, d, s);
        p.attention.b_q = Tensor(1, d);
        p.attention.b_k = Tensor(1, d);
        p.attention.b_v = Tensor(1, d);
        p.attention.b_o = Tensor(1, d);
        p.ffn.activation = config.activation;
        p.ffn.w1 = gaussian_init(r, d, config.ffn_dim, s);
        p.ffn.b1 = Tensor(1, config.ffn_dim);
        p.ffn.w2 = gaussian_init(r, config.ffn_dim, d, s);
        p.ffn.b2 = Tensor(1, d);
        p.ln1 = LayerNormParams::identity(d);
        p.ln2 = LayerNormParams::identity(d);
        m.layers.push_back(std::move(p));
    }
    Rng head = root.fork(3);
    m.head_weight = gaussian_init(head, d, config.vocab, s);
    m.head_bias = Tensor(1, config.vocab);
    return m;
}

void Model::validate() const {
    config.validate();
    const std::size_t d = config.dim;
    auto expect = [](const Tensor& t, std::size_t r, std::size_t c, const std::string& name) {
        if (t.rows() != r || t.cols() != c) {
            throw DimensionError(name + ": expected " + std::to_string(r) + "x" + std::to_string(c) + ", got " +
                                 t.shape());
        }
    };
    expect(token_embedding, config.vocab, d, "token_embedding");
    expect(position_embedding, config.max_seq, d, "position_embedding");
    if (layers.size() != config.depth) {
        throw DimensionError("model has " + std::to_string(layers.size()) + " layers, config says " +
                             std::to_string(config.depth));
    }
    for (const auto& layer : layers) {
        layer.attention.validate();
        layer.ffn.validate();
        expect(layer.attention.w_q, d, d, "attention.w_q");
        expect(layer.ffn.w1, d, config.ffn_dim, "ffn.w1");
        expect(layer.ln1.gain, 1, d, "ln1.gain");
        expect(layer.ln1.bias, 1, d, "ln1.bias");
        expect(layer.ln2.gain, 1, d, "ln2.gain");
        expect(layer.ln2.bias, 1, d, "ln2.bias");
        if (layer.attention.heads != config.heads) {
            throw ConfigError("layer head count disagrees with config");
        }
    }
    expect(head_weight, d, config.vocab, "head.weight");
    expect(head_bias, 1, config.vocab, "head.bias");
}

std::string Model::id() const {
    return std::string(to_string(config.variant)) + "-L" + std::to_string(config.depth) + "-d" +
           std::to_string(config.dim) + "-h" + std::to_string(config.heads) + "-f" + std::to_string(config.ffn_dim) +
           "-" + std::string(to_string(config.activation)) + "-s" + std::to_string(config.seed);
}

namespace {

template <typename M, typename F>
void visit_parameters(M& m, F&& f) {
    f(std::string("token_embedding"), m.token_embedding);
    f(std::string("position_embedding"), m.position_embedding);
    for (std::size_t l = 0; l < m.layers.size(); ++l) {
        auto& p = m.layers[l];
        const std::string prefix = "layers." + std::to_string(l) + ".";
        f(prefix + "attn.w_q", p.attention.w_q);
        f(prefix + "attn.b_q", p.attention.b_q);
        f(prefix + "attn.w_k", p.attention.w_k);
        f(prefix + "attn.b_k", p.attention.b_k);
        f(prefix + "attn.w_v", p.attention.w_v);
        f(prefix + "attn.b_v", p.attention.b_v);
        f(prefix + "attn.w_o", p.attention.w_o);
        f(prefix + "attn.b_o", p.attention.b_o);
        f(prefix + "ffn.w1", p.ffn.w1);
        f(prefix + "ffn.b1", p.ffn.b1);
        f(prefix + "ffn.w2", p.ffn.w2);
        f(prefix + "ffn.b2", p.ffn.b2);
        f(prefix + "ln1.gain", p.ln1.gain);
        f(prefix + "ln1.bias", p.ln1.bias);
        f(prefix + "ln2.gain", p.ln2.gain);
        f(prefix + "ln2.bias", p.ln2.bias);
    }
    f(std::string("head.weight"), m.head_weight);
    f(std::string("head.bias"), m.head_bias);
}

}  // namespace

void for_each_parameter(const Model& m, const std::function<void(const std::string&, const Tensor&)>& f) {
    visit_parameters(m, f);
}

void for_each_parameter(Model& m, const std::function<void(const std::string&, Tensor&)>& f) {
    visit_parameters(m, f);
}

std::vector<const Tensor*> parameter_list(const Model& m) {
    std::vector<const Tensor*> out;
    visit_parameters(m, [&](const std::string&, const Tensor& t) { out.push_back(&t); });
    return out;
}

std::vector<Tensor*> parameter_list(Model& m) {
    std::vector<Tensor*> out;
    visit_parameters(m, [&](const std::string&, Tensor& t) { out.push_back(&t); });
    return out;
}

std::vector<std::string> parameter_names(const Model& m) {
    std::vector<std::string> out;
    visit_parameters(m, [&](const std::string& name, const Tensor&) { out.push_back(name); });
    return out;
}

std::size_t parameter_count(const Model& m) {
    std::size_t n = 0;
    visit_parameters(m, [&](const std::string&, const Tensor& t) { n += t.size(); });
    return n;
}

Model transplant_saf_to_paf(const Model& saf) {
    if (saf.config.variant != DesignVariant::saf) {
        throw ContractError("transplant_saf_to_paf: source model is " + std::string(to_string(saf.config.variant)) +
                            ", expected SAF");
    }
    Model paf = saf;
    paf.config.variant = DesignVariant::paf;
    return paf;
}

Model transplant_paf_to_saf(const Model& paf) {
    if (paf.config.variant != DesignVariant::paf) {
        throw ContractError("transplant_paf_to_saf: source model is " + std::string(to_string(paf.config.variant)) +
                            ", expected PAF");
    }
    Model saf = paf;
    saf.config.variant = DesignVariant::saf;
    return saf;
}

std::vector<Var> ModelVars::parameters() const {
    std::vector<Var> out{token_embedding, position_embedding};
    for (const auto& l : layers) {
        const auto& a = l.attention;
        const auto& f = l.ffn;
        out.insert(out.end(), {a.w_q, a.b_q, a.w_k, a.b_k, a.w_v, a.b_v, a.w_o, a.b_o, f.w1, f.b1, f.w2, f.b2,
                               l.ln1.gain, l.ln1.bias, l.ln2.gain, l.ln2.bias});
    }
    out.push_back(head_weight);
    out.push_back(head_bias);
    return out;
}

LayerVars bind(Graph& g, const LayerParams& p) {
    return LayerVars{bind(g, p.attention), bind(g, p.ffn), bind(g, p.ln1), bind(g, p.ln2)};
}

ModelVars bind(Graph& g, const Model& m) {
    m.validate();
    ModelVars v;
    v.token_embedding = g.parameter_view(m.token_embedding);
    v.position_embedding = g.parameter_view(m.position_embedding);
    v.layers.reserve(m.layers.size());
    for (const auto& layer : m.layers) {
        v.layers.push_back(bind(g, layer));
    }
    v.head_weight = g.parameter_view(m.head_weight);
    v.head_bias = g.parameter_view(m.head_bias);
    return v;
}

namespace {

void fill_probe(LayerOutput& o, Var x, const LayerOptions& opts) {
    o.probe.layer_index = opts.layer_index;
    if (!opts.probe) {
        return;
    }
    o.probe.input_norm = mean_row_norm(x.value());
    o.probe.attn_residual_norm = mean_row_norm(o.attn_residual.value());
    o.probe.ffn_residual_norm = o.ffn_residual ? mean_row_norm(o.ffn_residual->value()) : 0.0;
    o.probe.isotropy = isotropy(o.out.value());
}

}  // namespace

LayerOutput saf_layer(Var x, const LayerVars& p, const LayerOptions& opts) {
    LayerOutput o;
    o.attn_residual = attention(x, p.attention);
    const Var y = layer_norm(add(x, o.attn_residual), p.ln1);
    o.ffn_residual = ffn(y, p.ffn);
    o.out = layer_norm(add(y, *o.ffn_residual), p.ln2);
    fill_probe(o, x, opts);
    return o;
}

LayerOutput paf_layer(Var x, const LayerVars& p, const LayerOptions& opts) {
    LayerOutput o;
    Graph& g = *x.graph;
    if (opts.mode == ExecutionMode::sequential) {
        o.attn_residual = attention(x, p.attention);
        o.ffn_residual = ffn(x, p.ffn);
    } else {
        Graph attn_graph = g.branch();
        Graph ffn_graph = g.branch();
        const Var xa = attn_graph.import(x);
        const AttentionVars pa = import_into(attn_graph, p.attention);
        const Var xf = ffn_graph.import(x);
        const FfnVars pf = import_into(ffn_graph, p.ffn);

        auto run_attention = [xa, &pa] { return attention(xa, pa); };
        std::future<Var> pending = opts.pool != nullptr ? opts.pool->submit(run_attention)
                                                        : std::async(std::launch::async, run_attention);
        Var f_local;
        try {
            f_local = ffn(xf, pf);
        } catch (...) {
            pending.wait();
            throw;
        }
        const Var a_local = pending.get();

        const auto attn_map = g.merge(std::move(attn_graph));
        o.attn_residual = g.adopt(attn_map, a_local);
        const auto ffn_map = g.merge(std::move(ffn_graph));
        o.ffn_residual = g.adopt(ffn_map, f_local);
    }
    o.out = layer_norm(add(add(x, o.attn_residual), *o.ffn_residual), p.ln1);
    fill_probe(o, x, opts);
    return o;
}

LayerOutput no_ffn_layer(Var x, const LayerVars& p, const LayerOptions& opts) {
    LayerOutput o;
    o.attn_residual = attention(x, p.attention);
    o.out = layer_norm(layer_norm(add(x, o.attn_residual), p.ln1), p.ln2);
    fill_probe(o, x, opts);
    return o;
}

LayerOutput no_skip_no_ffn_layer(Var x, const LayerVars& p, const LayerOptions& opts) {
    LayerOutput o;
    o.attn_residual = attention(x, p.attention);
    o.out = layer_norm(layer_norm(o.attn_residual, p.ln1), p.ln2);
    fill_probe(o, x, opts);
    return o;
}

LayerOutput apply_layer(DesignVariant variant, Var x, const LayerVars& p, const LayerOptions& opts) {
    switch (variant) {
        case DesignVariant::saf:
            return saf_layer(x, p, opts);
        case DesignVariant::paf:
            return paf_layer(x, p, opts);
        case DesignVariant::no_ffn:
            return no_ffn_layer(x, p, opts);
        case DesignVariant::no_skip_no_ffn:
            return no_skip_no_ffn_layer(x, p, opts);
    }
    throw ContractError("apply_layer: unknown variant");
}

LayerResult saf_layer(const Tensor& x, const LayerParams& p) {
    Graph g(Graph::GradMode::disabled);
    LayerOutput o = saf_layer(g.constant_view(x), bind(g, p));
    return LayerResult{o.out.value(), o.probe};
}

LayerResult paf_layer(const Tensor& x, const LayerParams& p, ExecutionMode mode, WorkerPool* pool) {
    Graph g(Graph::GradMode::disabled);
    LayerOptions opts;
    opts.mode = mode;
    opts.pool = pool;
    LayerOutput o = paf_layer(g.constant_view(x), bind(g, p), opts);
    return LayerResult{o.out.value(), o.probe};
}

void check_tokens(const ModelConfig& config, std::span<const TokenId> tokens) {
    if (tokens.empty()) {
        throw InputError("empty token sequence");
    }
    if (tokens.size() > config.max_seq) {
        throw InputError("sequence length " + std::to_string(tokens.size()) + " exceeds max_seq " +
                         std::to_string(config.max_seq));
    }
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (tokens[i] >= config.vocab) {
            throw InputError("token id " + std::to_string(tokens[i]) + " at position " + std::to_string(i) +
                             " outside vocabulary of " + std::to_string(config.vocab));
        }
    }
}

GraphForward forward(const Model& m, const ModelVars& vars, std::span<const TokenId> tokens,
                     const ForwardOptions& opts) {
    check_tokens(m.config, tokens);
    std::vector<TokenId> positions(tokens.size());
    std::iota(positions.begin(), positions.end(), TokenId{0});

    GraphForward out;
    out.embedded = add(gather_rows(vars.token_embedding, tokens), gather_rows(vars.position_embedding, positions));
    Var x = out.embedded;
    for (std::size_t l = 0; l < vars.layers.size(); ++l) {
        LayerOptions lo;
        lo.layer_index = l;
        lo.probe = opts.probe;
        lo.mode = opts.mode;
        lo.pool = opts.pool;
        LayerOutput layer = apply_layer(m.config.variant, x, vars.layers[l], lo);
        if (opts.probe) {
            out.probes.push_back(layer.probe);
        }
        x = layer.out;
    }
    out.hidden = x;
    out.logits = add_row(matmul(x, vars.head_weight), vars.head_bias);
    return out;
}

ForwardResult forward(const Model& m, std::span<const TokenId> tokens, const ForwardOptions& opts) {
    Graph g(Graph::GradMode::disabled);
    const ModelVars vars = bind(g, m);
    ForwardOptions probed = opts;
    probed.probe = true;
    GraphForward f = forward(m, vars, tokens, probed);
    ForwardResult r;
    r.logits = f.logits.value();
    r.trace.model_id = m.id();
    r.trace.variant = m.config.variant;
    r.trace.probes = std::move(f.probes);
    r.trace.probe_batch = "single sequence of length " + std::to_string(tokens.size());
    return r;
}

Tensor embed(const Model& m, std::span<const TokenId> tokens) {
    check_tokens(m.config, tokens);
    Tensor out(tokens.size(), m.config.dim);
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        auto t = m.token_embedding.row(tokens[i]);
        auto p = m.position_embedding.row(i);
        auto dst = out.row(i);
        for (std::size_t c = 0; c < dst.size(); ++c) {
            dst[c] = t[c] + p[c];
        }
    }
    return out;
}

Tensor run_layers(const Model& m, const Tensor& x, ExecutionMode mode, WorkerPool* pool) {
    Graph g(Graph::GradMode::disabled);
    Var h = g.constant_view(x);
    for (std::size_t l = 0; l < m.layers.size(); ++l) {
        const LayerVars vars = bind(g, m.layers[l]);
        LayerOptions lo;
        lo.layer_index = l;
        lo.probe = false;
        lo.mode = mode;
        lo.pool = pool;
        h = apply_layer(m.config.variant, h, vars, lo).out;
    }
    return h.value();
}

}  // namespace paflab
