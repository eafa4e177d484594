#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "paflab/blocks.hpp"

namespace paflab {

enum class BenchMode { saf, paf_seq, paf_par };

std::string_view to_string(BenchMode m);
BenchMode parse_bench_mode(std::string_view name);
/// Comma-separated list, e.g. "saf,paf-seq,paf-par".
std::vector<BenchMode> parse_bench_modes(std::string_view list);

inline constexpr std::size_t kMinBenchRepeats = 30;
inline constexpr std::size_t kBenchWarmups = 5;

struct BenchConfig {
    std::size_t depth = 4;
    std::size_t dim = 512;
    std::size_t heads = 8;
    std::size_t ffn_dim = 2048;
    std::size_t seq_len = 256;
    Activation activation = Activation::gelu;
    std::size_t threads = 4;
    std::size_t repeats = 100;
    std::uint64_t seed = 0;
    std::vector<BenchMode> modes{BenchMode::saf, BenchMode::paf_seq, BenchMode::paf_par};

    void validate() const;
};

struct TimingStats {
    double median_ns = 0.0;
    double p10_ns = 0.0;
    double p90_ns = 0.0;
};

/// Linear-interpolated quantile (q in [0, 1]) of the samples.
double quantile(std::span<const std::int64_t> samples, double q);
TimingStats summarize(std::span<const std::int64_t> samples);

struct ModeTiming {
    BenchMode mode = BenchMode::saf;
    /// Wall-clock nanoseconds of each timed forward, warmups excluded.
    std::vector<std::int64_t> samples_ns;
    TimingStats stats;
};

struct BenchResult {
    BenchConfig config;
    std::vector<ModeTiming> timings;
    /// Set when both paf-seq and paf-par ran.
    std::optional<bool> paf_outputs_identical;
    std::vector<std::string> warnings;

    const ModeTiming* find(BenchMode mode) const;
};

/// Times the layer stack (embedding and head excluded) on one seeded input.
/// SAF and PAF share parameters through transplant.
BenchResult run_bench(const BenchConfig& cfg);

}  // namespace paflab
