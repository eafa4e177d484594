#pragma once

// Independent reference implementations used as test oracles. They work on
// raw loops and share no code with the library beyond the Tensor container.

#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include "paflab/blocks.hpp"
#include "paflab/model.hpp"
#include "paflab/rng.hpp"
#include "paflab/tensor.hpp"

namespace paflab::testing {

inline Tensor random_tensor(Rng& rng, std::size_t rows, std::size_t cols, double lo = -1.0, double hi = 1.0) {
    Tensor t(rows, cols);
    for (std::size_t i = 0; i < t.size(); ++i) {
        t[i] = lo + (hi - lo) * rng.uniform();
    }
    return t;
}

inline Tensor naive_matmul(const Tensor& a, const Tensor& b) {
    Tensor c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < b.cols(); ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) {
                s += a(i, k) * b(k, j);
            }
            c(i, j) = s;
        }
    }
    return c;
}

inline double naive_gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))); }

inline Tensor naive_layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
    Tensor y(x.rows(), x.cols());
    const double d = static_cast<double>(x.cols());
    for (std::size_t r = 0; r < x.rows(); ++r) {
        double mean = 0.0;
        for (std::size_t c = 0; c < x.cols(); ++c) {
            mean += x(r, c);
        }
        mean /= d;
        double var = 0.0;
        for (std::size_t c = 0; c < x.cols(); ++c) {
            var += (x(r, c) - mean) * (x(r, c) - mean);
        }
        var /= d;
        for (std::size_t c = 0; c < x.cols(); ++c) {
            y(r, c) = (x(r, c) - mean) / std::sqrt(var + eps) * gain[c] + bias[c];
        }
    }
    return y;
}

inline Tensor naive_layer_norm(const Tensor& x, const LayerNormParams& p) {
    return naive_layer_norm(x, p.gain, p.bias, p.epsilon);
}

// Token by token, head by head: out_i = W_o^T concat_h(sum_j a_ij v_j) + b_o.
inline Tensor naive_attention(const Tensor& x, const AttentionParams& p) {
    const std::size_t n = x.rows();
    const std::size_t d = x.cols();
    const std::size_t dh = d / p.heads;
    const auto project = [&](const Tensor& w, const Tensor& b) {
        Tensor out(n, d);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t c = 0; c < d; ++c) {
                double s = b[c];
                for (std::size_t k = 0; k < d; ++k) {
                    s += x(i, k) * w(k, c);
                }
                out(i, c) = s;
            }
        }
        return out;
    };
    const Tensor q = project(p.w_q, p.b_q);
    const Tensor k = project(p.w_k, p.b_k);
    const Tensor v = project(p.w_v, p.b_v);
    Tensor heads(n, d);
    for (std::size_t h = 0; h < p.heads; ++h) {
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<double> score(n);
            double peak = -INFINITY;
            for (std::size_t j = 0; j < n; ++j) {
                double s = 0.0;
                for (std::size_t c = h * dh; c < (h + 1) * dh; ++c) {
                    s += q(i, c) * k(j, c);
                }
                score[j] = s / std::sqrt(static_cast<double>(dh));
                peak = std::max(peak, score[j]);
            }
            double total = 0.0;
            for (double& s : score) {
                s = std::exp(s - peak);
                total += s;
            }
            for (std::size_t c = h * dh; c < (h + 1) * dh; ++c) {
                double acc = 0.0;
                for (std::size_t j = 0; j < n; ++j) {
                    acc += score[j] / total * v(j, c);
                }
                heads(i, c) = acc;
            }
        }
    }
    Tensor out(n, d);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < d; ++c) {
            double s = p.b_o[c];
            for (std::size_t k2 = 0; k2 < d; ++k2) {
                s += heads(i, k2) * p.w_o(k2, c);
            }
            out(i, c) = s;
        }
    }
    return out;
}

inline Tensor naive_ffn(const Tensor& x, const FfnParams& p) {
    const std::size_t n = x.rows();
    const std::size_t f = p.w1.cols();
    const std::size_t d = p.w2.cols();
    Tensor out(n, d);
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> hidden(f);
        for (std::size_t j = 0; j < f; ++j) {
            double s = p.b1[j];
            for (std::size_t k = 0; k < x.cols(); ++k) {
                s += x(i, k) * p.w1(k, j);
            }
            hidden[j] = p.activation == Activation::gelu ? naive_gelu(s) : std::max(0.0, s);
        }
        for (std::size_t c = 0; c < d; ++c) {
            double s = p.b2[c];
            for (std::size_t j = 0; j < f; ++j) {
                s += hidden[j] * p.w2(j, c);
            }
            out(i, c) = s;
        }
    }
    return out;
}

inline Tensor naive_add(const Tensor& a, const Tensor& b) {
    Tensor c(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.size(); ++i) {
        c[i] = a[i] + b[i];
    }
    return c;
}

// Loop over all ordered pairs, diagonal included.
inline double naive_isotropy(const Tensor& e) {
    const std::size_t n = e.rows();
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double dot = 0.0, ni = 0.0, nj = 0.0;
            for (std::size_t c = 0; c < e.cols(); ++c) {
                dot += e(i, c) * e(j, c);
                ni += e(i, c) * e(i, c);
                nj += e(j, c) * e(j, c);
            }
            total += dot / (std::sqrt(ni) * std::sqrt(nj));
        }
    }
    return total / static_cast<double>(n * n);
}

inline double naive_mean_row_norm(const Tensor& a) {
    double s = 0.0;
    for (std::size_t r = 0; r < a.rows(); ++r) {
        double sq = 0.0;
        for (std::size_t c = 0; c < a.cols(); ++c) {
            sq += a(r, c) * a(r, c);
        }
        s += std::sqrt(sq);
    }
    return s / static_cast<double>(a.rows());
}

// Random parameters with non-trivial LN affine terms and biases.
inline LayerParams random_layer(Rng& rng, std::size_t d, std::size_t heads, std::size_t f,
                                Activation act = Activation::gelu, double scale = 0.4) {
    LayerParams p;
    p.attention.heads = heads;
    p.attention.w_q = random_tensor(rng, d, d, -scale, scale);
    p.attention.w_k = random_tensor(rng, d, d, -scale, scale);
    p.attention.w_v = random_tensor(rng, d, d, -scale, scale);
    p.attention.w_o = random_tensor(rng, d, d, -scale, scale);
    p.attention.b_q = random_tensor(rng, 1, d, -0.1, 0.1);
    p.attention.b_k = random_tensor(rng, 1, d, -0.1, 0.1);
    p.attention.b_v = random_tensor(rng, 1, d, -0.1, 0.1);
    p.attention.b_o = random_tensor(rng, 1, d, -0.1, 0.1);
    p.ffn.w1 = random_tensor(rng, d, f, -scale, scale);
    p.ffn.b1 = random_tensor(rng, 1, f, -0.1, 0.1);
    p.ffn.w2 = random_tensor(rng, f, d, -scale, scale);
    p.ffn.b2 = random_tensor(rng, 1, d, -0.1, 0.1);
    p.ffn.activation = act;
    p.ln1.gain = random_tensor(rng, 1, d, 0.5, 1.5);
    p.ln1.bias = random_tensor(rng, 1, d, -0.2, 0.2);
    p.ln2.gain = random_tensor(rng, 1, d, 0.5, 1.5);
    p.ln2.bias = random_tensor(rng, 1, d, -0.2, 0.2);
    return p;
}

// Replaces every parameter with a uniform draw so tests see non-default
// biases and layer-norm affines.
inline void randomize(Model& m, Rng& rng, double scale = 0.4) {
    for_each_parameter(m, [&](const std::string&, Tensor& t) { t = random_tensor(rng, t.rows(), t.cols(), -scale, scale); });
}

// Straight-line forward built from the oracles above.
inline Tensor oracle_layer(DesignVariant v, const Tensor& x, const LayerParams& p) {
    const Tensor a = naive_attention(x, p.attention);
    switch (v) {
        case DesignVariant::saf: {
            const Tensor y = naive_layer_norm(naive_add(x, a), p.ln1);
            return naive_layer_norm(naive_add(y, naive_ffn(y, p.ffn)), p.ln2);
        }
        case DesignVariant::paf:
            return naive_layer_norm(naive_add(naive_add(x, a), naive_ffn(x, p.ffn)), p.ln1);
        case DesignVariant::no_ffn:
            return naive_layer_norm(naive_layer_norm(naive_add(x, a), p.ln1), p.ln2);
        case DesignVariant::no_skip_no_ffn:
            return naive_layer_norm(naive_layer_norm(a, p.ln1), p.ln2);
    }
    return {};
}

inline Tensor oracle_forward(const Model& m, const std::vector<TokenId>& tokens) {
    const std::size_t d = m.config.dim;
    Tensor x(tokens.size(), d);
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        for (std::size_t c = 0; c < d; ++c) {
            x(i, c) = m.token_embedding(tokens[i], c) + m.position_embedding(i, c);
        }
    }
    for (const LayerParams& p : m.layers) {
        x = oracle_layer(m.config.variant, x, p);
    }
    Tensor logits = naive_matmul(x, m.head_weight);
    for (std::size_t i = 0; i < logits.rows(); ++i) {
        for (std::size_t c = 0; c < logits.cols(); ++c) {
            logits(i, c) += m.head_bias[c];
        }
    }
    return logits;
}

// Central difference of a scalar function of one tensor, entry by entry.
inline Tensor numeric_gradient(const std::function<double(const Tensor&)>& f, Tensor x, double h = 1e-5) {
    Tensor g(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double orig = x[i];
        x[i] = orig + h;
        const double plus = f(x);
        x[i] = orig - h;
        const double minus = f(x);
        x[i] = orig;
        g[i] = (plus - minus) / (2.0 * h);
    }
    return g;
}

inline double max_rel_error(const Tensor& a, const Tensor& b, double floor = 1e-8) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double denom = std::max({std::abs(a[i]), std::abs(b[i]), floor});
        worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
    }
    return worst;
}

}  // namespace paflab::testing
