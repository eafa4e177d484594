#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "paflab/bench.hpp"
#include "paflab/model.hpp"
#include "paflab/tasks.hpp"
#include "paflab/training.hpp"

namespace paflab {

struct ProbeSettings {
    std::size_t sequences = 32;
    std::uint64_t seed = 1234;
};

/// Train SAF, transplant to PAF and fine-tune, train NoFFN, probe all three.
struct CompareSettings {
    /// One pipeline run per seed; metrics are averaged over runs.
    std::vector<std::uint64_t> seeds{0};
    double finetune_fraction = 0.25;
    double isotropy_margin = 0.05;
    double parity_bound = 0.03;
    double max_ratio_bound = 1.0;
    double mean_ratio_bound = 0.5;

    /// Fine-tuning budget: round(finetune_fraction * steps), at least 1.
    std::size_t finetune_steps(std::size_t steps) const;
};

struct GradCheckSettings {
    GradCheckOptions options;
    std::size_t batch_size = 2;
    /// Every variant is checked with every activation; the model section
    /// supplies the remaining shape.
    std::vector<DesignVariant> variants{DesignVariant::saf, DesignVariant::paf};
    std::vector<Activation> activations{Activation::gelu, Activation::relu};
    double max_rel_error = 1e-4;
};

struct ExperimentConfig {
    std::uint64_t seed = 0;
    ModelConfig model;
    ToyTask task;
    TrainConfig train;
    ProbeSettings probe;
    BenchConfig bench;
    CompareSettings compare;
    GradCheckSettings grad_check;

    void validate() const;
};

/// Per-section seeds derived from one root seed.
struct DerivedSeeds {
    std::uint64_t model;
    std::uint64_t task;
    std::uint64_t train;
    std::uint64_t bench;
    std::uint64_t grad_check;
};
DerivedSeeds derive_seeds(std::uint64_t root);

/// Sets every section seed (and compare.seeds) from `root`; explicit section
/// seeds are replaced.
void apply_root_seed(ExperimentConfig& cfg, std::uint64_t root);

/// Parses JSON text. Unknown keys and type mismatches raise ConfigError
/// prefixed with "<source>:<line>:". Missing keys keep their defaults;
/// section seeds missing from the text derive from the top-level "seed".
ExperimentConfig parse_config(std::string_view text, std::string_view source = "<config>");
/// Missing or unreadable files raise ConfigError naming the path.
ExperimentConfig load_config(const std::filesystem::path& path);

/// Reference experiment: 8 layers, d=64, 4 heads, d_ff=256, copy-classify,
/// 2000 Adam steps, seeds 1..5.
ExperimentConfig reference_config();

}  // namespace paflab
