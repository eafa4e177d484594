#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "paflab/config.hpp"
#include "paflab/probe.hpp"
#include "paflab/training.hpp"

namespace paflab {

/// One pass of the pipeline at a single seed.
struct CompareRun {
    std::uint64_t seed = 0;
    TrainResult saf;
    /// Transplanted from `saf.model`, then fine-tuned.
    TrainResult paf;
    TrainResult no_ffn;
    ProbeTrace saf_trace;
    ProbeTrace paf_trace;
    ProbeTrace no_ffn_trace;
};

struct Criterion {
    std::string id;
    std::string description;
    double value = 0.0;
    double threshold = 0.0;
    bool passed = false;
};

struct CompareResult {
    std::vector<CompareRun> runs;
    /// SAF, PAF, NoFFN traces averaged layer by layer over the runs.
    std::vector<ProbeTrace> traces;
    double saf_accuracy = 0.0;
    double paf_accuracy = 0.0;
    double no_ffn_accuracy = 0.0;
    /// |saf_accuracy - paf_accuracy|, both averaged over runs.
    double parity_delta = 0.0;
    std::vector<Criterion> criteria;

    bool passed() const;
};

/// Per-seed task/train/model seeds follow derive_seeds(seed).
ExperimentConfig config_for_seed(const ExperimentConfig& cfg, std::uint64_t seed);

CompareRun run_compare_seed(const ExperimentConfig& cfg, std::uint64_t seed,
                            ExecutionMode mode = ExecutionMode::sequential, WorkerPool* pool = nullptr,
                            const std::function<void(std::string_view)>& log = {});

/// Runs every seed in cfg.compare.seeds and evaluates the criteria:
///   isotropy_ordering: mean final isotropy of NoFFN exceeds SAF and PAF by
///                      at least isotropy_margin
///   residual_ratio_max: every layer ratio of every SAF/PAF run < max bound
///   residual_ratio_mean: every SAF/PAF run's layer-mean ratio < mean bound
///   accuracy_parity:   parity_delta <= parity_bound
CompareResult run_compare(const ExperimentConfig& cfg, ExecutionMode mode = ExecutionMode::sequential,
                          WorkerPool* pool = nullptr, const std::function<void(std::string_view)>& log = {});

CompareResult evaluate_compare(const ExperimentConfig& cfg, std::vector<CompareRun> runs);

}  // namespace paflab
