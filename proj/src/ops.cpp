#include "paflab/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "paflab/errors.hpp"

namespace paflab {

namespace {

Graph& graph_of(Var a) {
    if (a.graph == nullptr) {
        throw ContractError("Var is not attached to a graph");
    }
    return *a.graph;
}

Graph& graph_of(Var a, Var b) {
    if (a.graph != b.graph) {
        throw ContractError("operands recorded on different graphs");
    }
    return graph_of(a);
}

std::uint64_t hash_mask(const Tensor& pre) {
    std::uint64_t h = 1469598103934665603ULL;
    std::uint64_t word = 0;
    for (std::size_t i = 0; i < pre.size(); ++i) {
        word = (word << 1) | (pre[i] > 0.0 ? 1u : 0u);
        if ((i & 63) == 63) {
            h = (h ^ word) * 1099511628211ULL;
            word = 0;
        }
    }
    return (h ^ word) * 1099511628211ULL;
}

}  // namespace

Var matmul(Var a, Var b) {
    Graph& g = graph_of(a, b);
    return g.record(matmul(a.value(), b.value()), {a, b}, [](const BackwardContext& ctx) {
        if (ctx.input_grads[0] != nullptr) {
            gemm_accumulate(ctx.output_grad, false, *ctx.inputs[1], true, *ctx.input_grads[0]);
        }
        if (ctx.input_grads[1] != nullptr) {
            gemm_accumulate(*ctx.inputs[0], true, ctx.output_grad, false, *ctx.input_grads[1]);
        }
    });
}

Var add(Var a, Var b) {
    Graph& g = graph_of(a, b);
    return g.record(add(a.value(), b.value()), {a, b}, [](const BackwardContext& ctx) {
        for (Tensor* grad : ctx.input_grads) {
            if (grad != nullptr) {
                add_in_place(*grad, ctx.output_grad);
            }
        }
    });
}

Var sub(Var a, Var b) {
    Graph& g = graph_of(a, b);
    return g.record(sub(a.value(), b.value()), {a, b}, [](const BackwardContext& ctx) {
        if (ctx.input_grads[0] != nullptr) {
            add_in_place(*ctx.input_grads[0], ctx.output_grad);
        }
        if (Tensor* gb = ctx.input_grads[1]; gb != nullptr) {
            for (std::size_t i = 0; i < gb->size(); ++i) {
                (*gb)[i] -= ctx.output_grad[i];
            }
        }
    });
}

Var scale(Var a, double factor) {
    Graph& g = graph_of(a);
    return g.record(scale(a.value(), factor), {a}, [factor](const BackwardContext& ctx) {
        Tensor& ga = *ctx.input_grads[0];
        for (std::size_t i = 0; i < ga.size(); ++i) {
            ga[i] += factor * ctx.output_grad[i];
        }
    });
}

Var elementwise_mul(Var a, Var b) {
    Graph& g = graph_of(a, b);
    return g.record(elementwise_mul(a.value(), b.value()), {a, b}, [](const BackwardContext& ctx) {
        for (std::size_t k = 0; k < 2; ++k) {
            Tensor* grad = ctx.input_grads[k];
            if (grad == nullptr) {
                continue;
            }
            const Tensor& other = *ctx.inputs[1 - k];
            for (std::size_t i = 0; i < grad->size(); ++i) {
                (*grad)[i] += ctx.output_grad[i] * other[i];
            }
        }
    });
}

Var transpose(Var a) {
    Graph& g = graph_of(a);
    return g.record(transpose(a.value()), {a}, [](const BackwardContext& ctx) {
        add_in_place(*ctx.input_grads[0], transpose(ctx.output_grad));
    });
}

Var add_row(Var a, Var row) {
    Graph& g = graph_of(a, row);
    return g.record(add_row(a.value(), row.value()), {a, row}, [](const BackwardContext& ctx) {
        if (ctx.input_grads[0] != nullptr) {
            add_in_place(*ctx.input_grads[0], ctx.output_grad);
        }
        if (Tensor* gr = ctx.input_grads[1]; gr != nullptr) {
            const Tensor& dy = ctx.output_grad;
            for (std::size_t r = 0; r < dy.rows(); ++r) {
                auto src = dy.row(r);
                for (std::size_t c = 0; c < dy.cols(); ++c) {
                    (*gr)[c] += src[c];
                }
            }
        }
    });
}

Var gelu(Var a) {
    Graph& g = graph_of(a);
    return g.record(gelu(a.value()), {a}, [](const BackwardContext& ctx) {
        const Tensor& x = *ctx.inputs[0];
        Tensor& gx = *ctx.input_grads[0];
        for (std::size_t i = 0; i < x.size(); ++i) {
            gx[i] += ctx.output_grad[i] * gelu_derivative(x[i]);
        }
    });
}

Var relu(Var a) {
    Graph& g = graph_of(a);
    g.note_activation_pattern(hash_mask(a.value()));
    return g.record(relu(a.value()), {a}, [](const BackwardContext& ctx) {
        const Tensor& x = *ctx.inputs[0];
        Tensor& gx = *ctx.input_grads[0];
        for (std::size_t i = 0; i < x.size(); ++i) {
            if (x[i] > 0.0) {
                gx[i] += ctx.output_grad[i];
            }
        }
    });
}

Var softmax_rows(Var a) {
    Graph& g = graph_of(a);
    return g.record(softmax_rows(a.value()), {a}, [](const BackwardContext& ctx) {
        const Tensor& p = ctx.output;
        const Tensor& dp = ctx.output_grad;
        Tensor& gx = *ctx.input_grads[0];
        for (std::size_t r = 0; r < p.rows(); ++r) {
            auto pr = p.row(r);
            auto dr = dp.row(r);
            double dot = 0.0;
            for (std::size_t c = 0; c < pr.size(); ++c) {
                dot += pr[c] * dr[c];
            }
            auto out = gx.row(r);
            for (std::size_t c = 0; c < pr.size(); ++c) {
                out[c] += pr[c] * (dr[c] - dot);
            }
        }
    });
}

Var row_mean(Var a) {
    Graph& g = graph_of(a);
    return g.record(row_mean(a.value()), {a}, [](const BackwardContext& ctx) {
        Tensor& gx = *ctx.input_grads[0];
        const double inv = 1.0 / static_cast<double>(gx.cols());
        for (std::size_t r = 0; r < gx.rows(); ++r) {
            const double d = ctx.output_grad[r] * inv;
            for (double& v : gx.row(r)) {
                v += d;
            }
        }
    });
}

Var row_var(Var a) {
    Graph& g = graph_of(a);
    Tensor mean = row_mean(a.value());
    return g.record(row_var(a.value()), {a}, [mean = std::move(mean)](const BackwardContext& ctx) {
        const Tensor& x = *ctx.inputs[0];
        Tensor& gx = *ctx.input_grads[0];
        const double k = 2.0 / static_cast<double>(x.cols());
        for (std::size_t r = 0; r < x.rows(); ++r) {
            const double d = ctx.output_grad[r] * k;
            auto src = x.row(r);
            auto dst = gx.row(r);
            for (std::size_t c = 0; c < src.size(); ++c) {
                dst[c] += d * (src[c] - mean[r]);
            }
        }
    });
}

Var concat_cols(std::span<const Var> parts) {
    if (parts.empty()) {
        throw ContractError("concat_cols: no operands");
    }
    Graph& g = graph_of(parts.front());
    std::vector<Tensor> values;
    values.reserve(parts.size());
    for (Var p : parts) {
        graph_of(parts.front(), p);
        values.push_back(p.value());
    }
    return g.record(concat_cols(values), parts, [](const BackwardContext& ctx) {
        std::size_t offset = 0;
        for (std::size_t k = 0; k < ctx.inputs.size(); ++k) {
            const std::size_t width = ctx.inputs[k]->cols();
            if (Tensor* grad = ctx.input_grads[k]; grad != nullptr) {
                add_in_place(*grad, split_cols(ctx.output_grad, offset, width));
            }
            offset += width;
        }
    });
}

Var split_cols(Var a, std::size_t first, std::size_t width) {
    Graph& g = graph_of(a);
    return g.record(split_cols(a.value(), first, width), {a}, [first, width](const BackwardContext& ctx) {
        Tensor& gx = *ctx.input_grads[0];
        for (std::size_t r = 0; r < gx.rows(); ++r) {
            auto src = ctx.output_grad.row(r);
            auto dst = gx.row(r).subspan(first, width);
            for (std::size_t c = 0; c < width; ++c) {
                dst[c] += src[c];
            }
        }
    });
}

Var sum(Var a) {
    Graph& g = graph_of(a);
    double s = 0.0;
    for (double v : a.value().values()) {
        s += v;
    }
    return g.record(Tensor::filled(1, 1, s), {a}, [](const BackwardContext& ctx) {
        const double d = ctx.output_grad[0];
        for (double& v : ctx.input_grads[0]->values()) {
            v += d;
        }
    });
}

Var layer_norm(Var x, Var gain, Var bias, double epsilon) {
    Graph& g = graph_of(x, gain);
    graph_of(x, bias);
    const Tensor& xv = x.value();
    const std::size_t n = xv.rows();
    const std::size_t d = xv.cols();
    if (gain.value().rows() != 1 || gain.value().cols() != d || !gain.value().same_shape(bias.value())) {
        throw DimensionError("layer_norm: affine parameters " + gain.value().shape() + "/" +
                             bias.value().shape() + " do not match input " + xv.shape());
    }
    const Tensor& gv = gain.value();
    const Tensor& bv = bias.value();

    Tensor normalized(n, d);
    Tensor rstd(n, 1);
    Tensor out(n, d);
    for (std::size_t r = 0; r < n; ++r) {
        auto src = xv.row(r);
        double mean = 0.0;
        for (double v : src) {
            mean += v;
        }
        mean /= static_cast<double>(d);
        double var = 0.0;
        for (double v : src) {
            var += (v - mean) * (v - mean);
        }
        var /= static_cast<double>(d);
        const double inv = 1.0 / std::sqrt(var + epsilon);
        rstd[r] = inv;
        auto xhat = normalized.row(r);
        auto dst = out.row(r);
        for (std::size_t c = 0; c < d; ++c) {
            xhat[c] = (src[c] - mean) * inv;
            dst[c] = xhat[c] * gv[c] + bv[c];
        }
    }

    return g.record(std::move(out), {x, gain, bias},
                    [normalized = std::move(normalized), rstd = std::move(rstd)](const BackwardContext& ctx) {
                        const Tensor& dy = ctx.output_grad;
                        const Tensor& gv = *ctx.inputs[1];
                        const std::size_t n = dy.rows();
                        const std::size_t d = dy.cols();
                        if (Tensor* gg = ctx.input_grads[1]; gg != nullptr) {
                            for (std::size_t r = 0; r < n; ++r) {
                                for (std::size_t c = 0; c < d; ++c) {
                                    (*gg)[c] += dy(r, c) * normalized(r, c);
                                }
                            }
                        }
                        if (Tensor* gb = ctx.input_grads[2]; gb != nullptr) {
                            for (std::size_t r = 0; r < n; ++r) {
                                for (std::size_t c = 0; c < d; ++c) {
                                    (*gb)[c] += dy(r, c);
                                }
                            }
                        }
                        if (Tensor* gx = ctx.input_grads[0]; gx != nullptr) {
                            std::vector<double> dxhat(d);
                            for (std::size_t r = 0; r < n; ++r) {
                                double mean_dxhat = 0.0;
                                double mean_dxhat_xhat = 0.0;
                                for (std::size_t c = 0; c < d; ++c) {
                                    dxhat[c] = dy(r, c) * gv[c];
                                    mean_dxhat += dxhat[c];
                                    mean_dxhat_xhat += dxhat[c] * normalized(r, c);
                                }
                                mean_dxhat /= static_cast<double>(d);
                                mean_dxhat_xhat /= static_cast<double>(d);
                                auto dst = gx->row(r);
                                for (std::size_t c = 0; c < d; ++c) {
                                    dst[c] += rstd[r] * (dxhat[c] - mean_dxhat - normalized(r, c) * mean_dxhat_xhat);
                                }
                            }
                        }
                    });
}

Var gather_rows(Var table, std::span<const TokenId> ids) {
    Graph& g = graph_of(table);
    const Tensor& tv = table.value();
    Tensor out(ids.size(), tv.cols());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] >= tv.rows()) {
            throw InputError("gather_rows: id " + std::to_string(ids[i]) + " outside table of " +
                             std::to_string(tv.rows()) + " rows");
        }
        auto src = tv.row(ids[i]);
        std::copy(src.begin(), src.end(), out.row(i).begin());
    }
    std::vector<TokenId> rows(ids.begin(), ids.end());
    return g.record(std::move(out), {table}, [rows = std::move(rows)](const BackwardContext& ctx) {
        Tensor& gt = *ctx.input_grads[0];
        for (std::size_t i = 0; i < rows.size(); ++i) {
            auto src = ctx.output_grad.row(i);
            auto dst = gt.row(rows[i]);
            for (std::size_t c = 0; c < src.size(); ++c) {
                dst[c] += src[c];
            }
        }
    });
}

Var cross_entropy(Var logits, std::span<const std::size_t> targets) {
    Graph& g = graph_of(logits);
    const Tensor& z = logits.value();
    if (z.rows() != targets.size()) {
        throw DimensionError("cross_entropy: " + std::to_string(targets.size()) + " targets for logits " +
                             z.shape());
    }
    if (z.rows() == 0) {
        throw InputError("cross_entropy: no targets");
    }
    for (std::size_t t : targets) {
        if (t >= z.cols()) {
            throw InputError("cross_entropy: target " + std::to_string(t) + " outside " +
                             std::to_string(z.cols()) + " classes");
        }
    }
    Tensor probs = softmax_rows(z);
    double total = 0.0;
    for (std::size_t r = 0; r < z.rows(); ++r) {
        auto row = z.row(r);
        const double peak = *std::max_element(row.begin(), row.end());
        double acc = 0.0;
        for (double v : row) {
            acc += std::exp(v - peak);
        }
        total += peak + std::log(acc) - row[targets[r]];
    }
    const double m = static_cast<double>(z.rows());
    std::vector<std::size_t> tgt(targets.begin(), targets.end());
    return g.record(Tensor::filled(1, 1, total / m), {logits},
                    [probs = std::move(probs), tgt = std::move(tgt), m](const BackwardContext& ctx) {
                        Tensor& gz = *ctx.input_grads[0];
                        const double d = ctx.output_grad[0] / m;
                        for (std::size_t r = 0; r < probs.rows(); ++r) {
                            auto p = probs.row(r);
                            auto dst = gz.row(r);
                            for (std::size_t c = 0; c < p.size(); ++c) {
                                dst[c] += d * (p[c] - (c == tgt[r] ? 1.0 : 0.0));
                            }
                        }
                    });
}

}  // namespace paflab
