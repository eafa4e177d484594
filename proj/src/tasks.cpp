#include "paflab/tasks.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "paflab/errors.hpp"

namespace paflab {

std::string_view to_string(TaskKind k) {
    switch (k) {
        case TaskKind::copy_classify:
            return "copy-classify";
        case TaskKind::majority_token:
            return "majority-token";
        case TaskKind::char_lm:
            return "char-lm";
    }
    return "?";
}

TaskKind parse_task_kind(std::string_view name) {
    for (TaskKind k : {TaskKind::copy_classify, TaskKind::majority_token, TaskKind::char_lm}) {
        if (name == to_string(k)) {
            return k;
        }
    }
    throw ConfigError("unknown task kind '" + std::string(name) +
                      "' (expected copy-classify, majority-token or char-lm)");
}

std::string_view to_string(Pooling p) { return p == Pooling::mean ? "mean" : "first"; }

Pooling parse_pooling(std::string_view name) {
    if (name == "mean") {
        return Pooling::mean;
    }
    if (name == "first") {
        return Pooling::first_token;
    }
    throw ConfigError("unknown pooling '" + std::string(name) + "' (expected mean or first)");
}

void ToyTask::validate() const {
    if (vocab < 2) {
        throw ConfigError("task.vocab must be >= 2");
    }
    if (seq_len < 2) {
        throw ConfigError("task.seq_len must be >= 2");
    }
    if (kind == TaskKind::majority_token && seq_len < 4) {
        throw ConfigError("majority-token needs task.seq_len >= 4");
    }
}

void ToyTask::check_compatible(const ModelConfig& config) const {
    validate();
    if (vocab > config.vocab) {
        throw ConfigError("task.vocab (" + std::to_string(vocab) + ") exceeds model.vocab (" +
                          std::to_string(config.vocab) + ")");
    }
    if (seq_len > config.max_seq) {
        throw ConfigError("task.seq_len (" + std::to_string(seq_len) + ") exceeds model.max_seq (" +
                          std::to_string(config.max_seq) + ")");
    }
}

namespace {

/// Successor distribution of the char-lm chain: each token has one preferred
/// successor drawn with probability 3/4, otherwise uniform.
std::vector<TokenId> preferred_successors(const ToyTask& task) {
    Rng rng = Rng(task.seed).fork(0xC4A2);
    std::vector<TokenId> next(task.vocab);
    for (auto& t : next) {
        t = static_cast<TokenId>(rng.below(task.vocab));
    }
    return next;
}

std::size_t modal_token(const ToyTask& task, std::span<const TokenId> tokens, bool& unique) {
    std::vector<std::size_t> counts(task.vocab, 0);
    for (TokenId t : tokens) {
        ++counts.at(t);
    }
    const auto top = std::max_element(counts.begin(), counts.end());
    unique = std::count(counts.begin(), counts.end(), *top) == 1;
    return static_cast<std::size_t>(top - counts.begin());
}

}  // namespace

std::vector<std::size_t> label_sequence(const ToyTask& task, std::span<const TokenId> tokens) {
    if (tokens.empty()) {
        throw InputError("label_sequence: empty sequence");
    }
    switch (task.kind) {
        case TaskKind::copy_classify:
            return {tokens.front()};
        case TaskKind::majority_token: {
            bool unique = false;
            const std::size_t mode = modal_token(task, tokens, unique);
            if (!unique) {
                throw InputError("majority-token: sequence has no unique modal token");
            }
            return {mode};
        }
        case TaskKind::char_lm:
            return std::vector<std::size_t>(tokens.begin() + 1, tokens.end());
    }
    throw ContractError("label_sequence: unknown task kind");
}

Example generate_example(const ToyTask& task, Rng& rng) {
    Example ex;
    ex.tokens.resize(task.seq_len);
    switch (task.kind) {
        case TaskKind::copy_classify:
            for (auto& t : ex.tokens) {
                t = static_cast<TokenId>(rng.below(task.vocab));
            }
            break;
        case TaskKind::majority_token: {
            // Plant the modal token in a quarter to a half of the positions
            // and fill the rest from the other tokens; redraw on ties.
            bool unique = false;
            do {
                const auto mode = static_cast<TokenId>(rng.below(task.vocab));
                const std::size_t quarter = task.seq_len / 4;
                const std::size_t planted = quarter + rng.below(quarter + 1);
                for (auto& t : ex.tokens) {
                    auto other = static_cast<TokenId>(rng.below(task.vocab - 1));
                    t = other >= mode ? other + 1 : other;
                }
                std::vector<std::size_t> positions(task.seq_len);
                std::iota(positions.begin(), positions.end(), std::size_t{0});
                for (std::size_t k = 0; k < planted; ++k) {
                    std::swap(positions[k], positions[k + rng.below(task.seq_len - k)]);
                    ex.tokens[positions[k]] = mode;
                }
                modal_token(task, ex.tokens, unique);
            } while (!unique);
            break;
        }
        case TaskKind::char_lm: {
            const auto next = preferred_successors(task);
            ex.tokens[0] = static_cast<TokenId>(rng.below(task.vocab));
            for (std::size_t i = 1; i < task.seq_len; ++i) {
                ex.tokens[i] = rng.uniform() < 0.75 ? next[ex.tokens[i - 1]]
                                                    : static_cast<TokenId>(rng.below(task.vocab));
            }
            break;
        }
    }
    ex.targets = label_sequence(task, ex.tokens);
    return ex;
}

std::vector<Example> generate_examples(const ToyTask& task, std::size_t count, std::uint64_t stream) {
    task.validate();
    Rng rng = Rng(task.seed).fork(stream);
    std::vector<Example> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        out.push_back(generate_example(task, rng));
    }
    return out;
}

Var prediction_logits(const ToyTask& task, Var logits) {
    const std::size_t n = logits.rows();
    if (task.kind == TaskKind::char_lm) {
        std::vector<TokenId> rows(n - 1);
        std::iota(rows.begin(), rows.end(), TokenId{0});
        return gather_rows(logits, rows);
    }
    if (task.pooling == Pooling::first_token) {
        const TokenId first[] = {0};
        return gather_rows(logits, first);
    }
    // Mean over positions, as a 1 x vocab row.
    return transpose(row_mean(transpose(logits)));
}

Var example_loss(const ToyTask& task, Var logits, const Example& example) {
    return cross_entropy(prediction_logits(task, logits), example.targets);
}

Var batch_loss(const ToyTask& task, const Model& m, const ModelVars& vars, std::span<const Example> batch,
               ExecutionMode mode, WorkerPool* pool) {
    if (batch.empty()) {
        throw InputError("batch_loss: empty batch");
    }
    ForwardOptions opts;
    opts.mode = mode;
    opts.pool = pool;
    Var total;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const GraphForward f = forward(m, vars, batch[i].tokens, opts);
        const Var loss = example_loss(task, f.logits, batch[i]);
        total = i == 0 ? loss : add(total, loss);
    }
    return batch.size() == 1 ? total : scale(total, 1.0 / static_cast<double>(batch.size()));
}

std::vector<std::size_t> predict(const ToyTask& task, const Model& m, std::span<const TokenId> tokens) {
    Graph g(Graph::GradMode::disabled);
    const ModelVars vars = bind(g, m);
    const GraphForward f = forward(m, vars, tokens);
    const Tensor& z = prediction_logits(task, f.logits).value();
    std::vector<std::size_t> out(z.rows());
    for (std::size_t r = 0; r < z.rows(); ++r) {
        auto row = z.row(r);
        out[r] = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
    }
    return out;
}

double accuracy(const ToyTask& task, const Model& m, std::span<const Example> examples) {
    std::size_t correct = 0;
    std::size_t total = 0;
    for (const auto& ex : examples) {
        const auto pred = predict(task, m, ex.tokens);
        for (std::size_t i = 0; i < pred.size(); ++i) {
            correct += pred[i] == ex.targets[i] ? 1 : 0;
        }
        total += pred.size();
    }
    return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
}

}  // namespace paflab
