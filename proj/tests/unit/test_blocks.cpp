#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "paflab/blocks.hpp"
#include "paflab/errors.hpp"
#include "paflab/model.hpp"
#include "support.hpp"

namespace paflab {
namespace {

using testing::random_tensor;

LayerNormParams identity_ln(std::size_t d, double eps = kLayerNormEpsilon) {
    LayerNormParams p = LayerNormParams::identity(d);
    p.epsilon = eps;
    return p;
}

TEST(LayerNorm, ConstantRowIsNearZero) {
    const Tensor y = layer_norm(Tensor::filled(1, 6, 3.5), identity_ln(6));
    for (double v : y.values()) {
        EXPECT_LE(std::abs(v), 1e-3);
    }
}

TEST(LayerNorm, StandardizedRowIsFixedInTheLimit) {
    const Tensor y = layer_norm(Tensor{{1, -1}}, identity_ln(2, 1e-300));
    EXPECT_NEAR(y[0], 1.0, 1e-12);
    EXPECT_NEAR(y[1], -1.0, 1e-12);
}

// The first pass leaves row variance v / (v + eps), so the second pass
// rescales by about 1 + eps (1 - 1/v) / 2: exact only as eps -> 0.
TEST(LayerNorm, IdempotentInTheEpsilonLimit) {
    Rng rng(31);
    for (int trial = 0; trial < 10; ++trial) {
        const Tensor x = random_tensor(rng, 4, 8, -5, 5);
        const Tensor once = layer_norm(x, identity_ln(8, 1e-300));
        EXPECT_LE(max_abs_diff(layer_norm(once, identity_ln(8, 1e-300)), once), 1e-12);
    }
}

TEST(LayerNorm, SecondPassDriftIsEpsilonSized) {
    Rng rng(31);
    for (int trial = 0; trial < 10; ++trial) {
        const Tensor x = random_tensor(rng, 4, 8, -5, 5);
        const Tensor once = layer_norm(x, identity_ln(8));
        const Tensor twice = layer_norm(once, identity_ln(8));
        for (std::size_t r = 0; r < x.rows(); ++r) {
            double mean = 0.0;
            double var = 0.0;
            for (std::size_t c = 0; c < 8; ++c) {
                mean += x(r, c) / 8.0;
            }
            for (std::size_t c = 0; c < 8; ++c) {
                var += (x(r, c) - mean) * (x(r, c) - mean) / 8.0;
            }
            const double factor = 1.0 / std::sqrt(var / (var + kLayerNormEpsilon) + kLayerNormEpsilon);
            for (std::size_t c = 0; c < 8; ++c) {
                EXPECT_NEAR(twice(r, c), once(r, c) * factor, 1e-12);
            }
            EXPECT_GT(std::abs(factor - 1.0), 1e-7);
        }
    }
}

TEST(LayerNorm, OutputRowsAreStandardized) {
    Rng rng(32);
    const Tensor y = layer_norm(random_tensor(rng, 6, 16, -10, 10), identity_ln(16));
    const Tensor mean = row_mean(y);
    const Tensor var = row_var(y);
    for (std::size_t r = 0; r < y.rows(); ++r) {
        EXPECT_LT(std::abs(mean[r]), 1e-9);
        EXPECT_NEAR(var[r], 1.0, 1e-6);
    }
}

TEST(LayerNorm, MatchesLoopOracleWithAffine) {
    Rng rng(33);
    const Tensor x = random_tensor(rng, 5, 7);
    LayerNormParams p;
    p.gain = random_tensor(rng, 1, 7, 0.5, 2);
    p.bias = random_tensor(rng, 1, 7);
    EXPECT_LE(max_abs_diff(layer_norm(x, p), testing::naive_layer_norm(x, p)), 1e-12);
}

AttentionParams random_attention(Rng& rng, std::size_t d, std::size_t h) {
    return testing::random_layer(rng, d, h, 2 * d).attention;
}

TEST(Attention, SingleTokenAttendsToItself) {
    Rng rng(34);
    const AttentionParams p = random_attention(rng, 4, 2);
    const Tensor x = random_tensor(rng, 1, 4);
    const Tensor v = add_row(matmul(x, p.w_v), p.b_v);
    const Tensor expected = add_row(matmul(v, p.w_o), p.b_o);
    EXPECT_LE(max_abs_diff(attention(x, p), expected), 1e-12);
}

TEST(Attention, ZeroQueryGivesUniformWeights) {
    Rng rng(35);
    AttentionParams p = random_attention(rng, 6, 3);
    p.w_q = Tensor::zeros(6, 6);
    p.b_q = Tensor::zeros(1, 6);
    const Tensor x = random_tensor(rng, 5, 6);
    const Tensor v = add_row(matmul(x, p.w_v), p.b_v);
    const Tensor mean_v = transpose(row_mean(transpose(v)));
    const Tensor row = add_row(matmul(mean_v, p.w_o), p.b_o);
    const Tensor out = attention(x, p);
    for (std::size_t i = 0; i < out.rows(); ++i) {
        for (std::size_t c = 0; c < out.cols(); ++c) {
            EXPECT_NEAR(out(i, c), row(0, c), 1e-12);
        }
    }
}

TEST(Attention, MatchesSingleLoopReference) {
    Rng rng(36);
    const AttentionParams p = random_attention(rng, 4, 2);
    const Tensor x = random_tensor(rng, 3, 4);
    EXPECT_LE(max_abs_diff(attention(x, p), testing::naive_attention(x, p)), 1e-10);
}

TEST(Attention, MatchesReferenceAcrossShapes) {
    Rng rng(37);
    for (auto [n, d, h] : {std::tuple<std::size_t, std::size_t, std::size_t>{1, 2, 1}, {7, 8, 4}, {5, 12, 3}}) {
        const AttentionParams p = random_attention(rng, d, h);
        const Tensor x = random_tensor(rng, n, d, -2, 2);
        EXPECT_LE(max_abs_diff(attention(x, p), testing::naive_attention(x, p)), 1e-10);
    }
}

TEST(Attention, KeyBiasDoesNotChangeOutput) {
    Rng rng(38);
    AttentionParams p = random_attention(rng, 4, 2);
    const Tensor x = random_tensor(rng, 3, 4);
    const Tensor before = testing::naive_attention(x, p);
    p.b_k = random_tensor(rng, 1, 4, -5, 5);
    EXPECT_LE(max_abs_diff(testing::naive_attention(x, p), before), 1e-12);
}

TEST(Attention, PermutationEquivariant) {
    Rng rng(39);
    const AttentionParams p = random_attention(rng, 8, 2);
    for (int trial = 0; trial < 10; ++trial) {
        const Tensor x = random_tensor(rng, 6, 8);
        std::vector<std::size_t> perm(6);
        std::iota(perm.begin(), perm.end(), 0);
        for (std::size_t i = perm.size(); i-- > 1;) {
            std::swap(perm[i], perm[rng.below(i + 1)]);
        }
        Tensor px(6, 8);
        for (std::size_t i = 0; i < 6; ++i) {
            std::copy(x.row(perm[i]).begin(), x.row(perm[i]).end(), px.row(i).begin());
        }
        const Tensor out = attention(x, p);
        const Tensor pout = attention(px, p);
        for (std::size_t i = 0; i < 6; ++i) {
            for (std::size_t c = 0; c < 8; ++c) {
                EXPECT_NEAR(pout(i, c), out(perm[i], c), 1e-12);
            }
        }
    }
}

TEST(Attention, IndivisibleHeadsRejectedAtConstruction) {
    ModelConfig c;
    c.dim = 10;
    c.heads = 3;
    EXPECT_THROW(Model::initialize(c), ConfigError);
    Rng rng(40);
    AttentionParams p = random_attention(rng, 6, 2);
    p.heads = 4;
    EXPECT_THROW(p.validate(), ConfigError);
}

TEST(Ffn, ZeroParametersGiveZero) {
    FfnParams p{Tensor(4, 8), Tensor(1, 8), Tensor(8, 4), Tensor(1, 4), Activation::gelu};
    Rng rng(41);
    EXPECT_EQ(ffn(random_tensor(rng, 3, 4), p), Tensor::zeros(3, 4));
}

TEST(Ffn, DeadReluRowsEqualOutputBias) {
    Rng rng(42);
    FfnParams p = testing::random_layer(rng, 4, 1, 6, Activation::relu).ffn;
    p.w1 = Tensor::zeros(4, 6);
    p.b1 = Tensor::filled(1, 6, -0.5);
    const Tensor out = ffn(random_tensor(rng, 3, 4), p);
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t c = 0; c < 4; ++c) {
            EXPECT_EQ(out(i, c), p.b2[c]);
        }
    }
}

TEST(Ffn, MatchesLoopOracle) {
    Rng rng(43);
    for (Activation act : {Activation::gelu, Activation::relu}) {
        const FfnParams p = testing::random_layer(rng, 5, 1, 9, act).ffn;
        const Tensor x = random_tensor(rng, 4, 5, -2, 2);
        EXPECT_LE(max_abs_diff(ffn(x, p), testing::naive_ffn(x, p)), 1e-10);
    }
}

TEST(Activation, ParseRoundTrip) {
    EXPECT_EQ(parse_activation(to_string(Activation::gelu)), Activation::gelu);
    EXPECT_EQ(parse_activation(to_string(Activation::relu)), Activation::relu);
    EXPECT_THROW(parse_activation("tanh"), ConfigError);
}

}  // namespace
}  // namespace paflab
