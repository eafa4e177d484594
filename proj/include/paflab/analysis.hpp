#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "paflab/model.hpp"
#include "paflab/probe.hpp"
#include "paflab/tasks.hpp"

namespace paflab {

inline constexpr std::size_t kProbeSequences = 32;
inline constexpr std::size_t kProbeSeqLen = 32;

/// Fixed, seeded set of input sequences shared by every probed model.
struct ProbeBatch {
    std::vector<std::vector<TokenId>> sequences;
    std::string descriptor;
};

/// `count` sequences from the task distribution, drawn from `seed` alone so
/// the batch does not depend on the task's own seed stream.
ProbeBatch make_probe_batch(const ToyTask& task, std::size_t count, std::uint64_t seed);

/// Forward with probes on every sequence; per-layer fields are computed per
/// sequence and then averaged over the batch in sequence order.
ProbeTrace probe_model(const Model& m, const ProbeBatch& batch, ExecutionMode mode = ExecutionMode::sequential);

/// Untrained models built from `base` that differ only in their variant,
/// probed on the same batch.
std::map<DesignVariant, ProbeTrace> degeneration_experiment(const ModelConfig& base, const ProbeBatch& batch,
                                                            std::span<const DesignVariant> variants);

/// Probes already-built models (e.g. trained checkpoints). All models must
/// share depth, dim, heads and ffn_dim.
std::map<DesignVariant, ProbeTrace> degeneration_experiment(std::span<const Model> models, const ProbeBatch& batch);

}  // namespace paflab
