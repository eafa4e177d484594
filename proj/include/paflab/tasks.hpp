#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "paflab/graph.hpp"
#include "paflab/model.hpp"
#include "paflab/ops.hpp"
#include "paflab/rng.hpp"

namespace paflab {

enum class TaskKind { copy_classify, majority_token, char_lm };

/// How classification tasks read a single prediction off the n x vocab logits.
enum class Pooling { first_token, mean };

std::string_view to_string(TaskKind k);
TaskKind parse_task_kind(std::string_view name);
std::string_view to_string(Pooling p);
Pooling parse_pooling(std::string_view name);

/// Synthetic sequence task. Labels follow from the tokens:
///   copy-classify  -> class = first token
///   majority-token -> class = the unique most frequent token
///   char-lm        -> targets are the next tokens (n - 1 of them) of a fixed
///                     seeded Markov chain
struct ToyTask {
    TaskKind kind = TaskKind::copy_classify;
    std::size_t vocab = 16;
    std::size_t seq_len = 32;
    std::uint64_t seed = 0;
    Pooling pooling = Pooling::first_token;

    void validate() const;
    /// Throws ConfigError when the model cannot consume this task.
    void check_compatible(const ModelConfig& config) const;
    bool is_classification() const { return kind != TaskKind::char_lm; }
};

struct Example {
    std::vector<TokenId> tokens;
    std::vector<std::size_t> targets;
};

/// Deterministic label rule; the generator and evaluation both go through it.
std::vector<std::size_t> label_sequence(const ToyTask& task, std::span<const TokenId> tokens);

Example generate_example(const ToyTask& task, Rng& rng);
/// `count` examples from the named stream of the task seed.
std::vector<Example> generate_examples(const ToyTask& task, std::size_t count, std::uint64_t stream);

/// Stream ids reserved for the held-out evaluation set and probe batches.
inline constexpr std::uint64_t kEvalStream = 0xE7A1;

/// Rows of the logits that carry predictions: one pooled row for
/// classification, rows 0..n-2 for char-lm.
Var prediction_logits(const ToyTask& task, Var logits);
/// Mean cross-entropy of one example.
Var example_loss(const ToyTask& task, Var logits, const Example& example);
/// Mean of example losses over a batch, recorded on `g` against `vars`.
Var batch_loss(const ToyTask& task, const Model& m, const ModelVars& vars, std::span<const Example> batch,
               ExecutionMode mode = ExecutionMode::sequential, WorkerPool* pool = nullptr);

/// Argmax predictions (one per target).
std::vector<std::size_t> predict(const ToyTask& task, const Model& m, std::span<const TokenId> tokens);
/// Fraction of correct targets across the examples.
double accuracy(const ToyTask& task, const Model& m, std::span<const Example> examples);

}  // namespace paflab
