#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "paflab/graph.hpp"

namespace paflab {

using TokenId = std::uint32_t;

// Differentiable operations. Each evaluates eagerly and records its backward
// rule on the operands' graph. Operands must live on the same graph.

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var scale(Var a, double factor);
Var elementwise_mul(Var a, Var b);
Var transpose(Var a);
/// Broadcast-adds a 1 x cols row vector to every row.
Var add_row(Var a, Var row);
Var gelu(Var a);
Var relu(Var a);
Var softmax_rows(Var a);
Var row_mean(Var a);
Var row_var(Var a);
Var concat_cols(std::span<const Var> parts);
Var split_cols(Var a, std::size_t first, std::size_t width);
/// 1x1 sum of all elements.
Var sum(Var a);

/// Row-wise standardization with affine gain/bias (1 x cols each).
Var layer_norm(Var x, Var gain, Var bias, double epsilon);
/// Rows of `table` selected by `ids`.
Var gather_rows(Var table, std::span<const TokenId> ids);
/// 1x1 mean over rows of -log softmax(logits)[target].
Var cross_entropy(Var logits, std::span<const std::size_t> targets);

}  // namespace paflab
