#include "paflab/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <memory>

#include "paflab/errors.hpp"
#include "paflab/model.hpp"
#include "paflab/rng.hpp"
#include "paflab/worker_pool.hpp"

namespace paflab {

std::string_view to_string(BenchMode m) {
    switch (m) {
        case BenchMode::saf:
            return "saf";
        case BenchMode::paf_seq:
            return "paf-seq";
        case BenchMode::paf_par:
            return "paf-par";
    }
    return "?";
}

BenchMode parse_bench_mode(std::string_view name) {
    for (BenchMode m : {BenchMode::saf, BenchMode::paf_seq, BenchMode::paf_par}) {
        if (to_string(m) == name) {
            return m;
        }
    }
    throw ConfigError("unknown bench mode '" + std::string(name) + "' (expected saf, paf-seq or paf-par)");
}

std::vector<BenchMode> parse_bench_modes(std::string_view list) {
    std::vector<BenchMode> out;
    while (!list.empty()) {
        const std::size_t comma = list.find(',');
        const std::string_view item = list.substr(0, comma);
        const BenchMode m = parse_bench_mode(item);
        if (std::find(out.begin(), out.end(), m) == out.end()) {
            out.push_back(m);
        }
        if (comma == std::string_view::npos) {
            break;
        }
        list.remove_prefix(comma + 1);
    }
    if (out.empty()) {
        throw ConfigError("bench: empty mode list");
    }
    return out;
}

void BenchConfig::validate() const {
    if (repeats < kMinBenchRepeats) {
        throw ConfigError("bench.repeats must be >= " + std::to_string(kMinBenchRepeats) + " (got " +
                          std::to_string(repeats) + ")");
    }
    if (threads < 1) {
        throw ConfigError("bench.threads must be >= 1");
    }
    if (modes.empty()) {
        throw ConfigError("bench.modes must not be empty");
    }
    ModelConfig mc;
    mc.depth = depth;
    mc.dim = dim;
    mc.heads = heads;
    mc.ffn_dim = ffn_dim;
    mc.max_seq = seq_len;
    mc.validate();
}

double quantile(std::span<const std::int64_t> samples, double q) {
    if (samples.empty()) {
        throw ContractError("quantile: no samples");
    }
    std::vector<std::int64_t> sorted(samples.begin(), samples.end());
    std::sort(sorted.begin(), sorted.end());
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return static_cast<double>(sorted[lo]) +
           frac * (static_cast<double>(sorted[hi]) - static_cast<double>(sorted[lo]));
}

TimingStats summarize(std::span<const std::int64_t> samples) {
    return TimingStats{quantile(samples, 0.5), quantile(samples, 0.1), quantile(samples, 0.9)};
}

const ModeTiming* BenchResult::find(BenchMode mode) const {
    for (const ModeTiming& t : timings) {
        if (t.mode == mode) {
            return &t;
        }
    }
    return nullptr;
}

BenchResult run_bench(const BenchConfig& cfg) {
    cfg.validate();
    BenchResult result;
    result.config = cfg;

    const bool wants_par = std::find(cfg.modes.begin(), cfg.modes.end(), BenchMode::paf_par) != cfg.modes.end();
    if (wants_par && cfg.threads < 2) {
        result.warnings.push_back("paf-par with fewer than 2 threads: attention and FFN cannot overlap");
    }

    ModelConfig mc;
    mc.depth = cfg.depth;
    mc.dim = cfg.dim;
    mc.heads = cfg.heads;
    mc.ffn_dim = cfg.ffn_dim;
    mc.max_seq = cfg.seq_len;
    mc.activation = cfg.activation;
    mc.variant = DesignVariant::saf;
    mc.seed = cfg.seed;
    const Model saf = Model::initialize(mc);
    const Model paf = transplant_saf_to_paf(saf);

    Rng rng = Rng(cfg.seed).fork(0xBE7C);
    const Tensor input = gaussian_init(rng, cfg.seq_len, cfg.dim, 1.0);

    // The calling thread runs the FFN, so threads - 1 workers suffice.
    std::unique_ptr<WorkerPool> pool;
    if (wants_par) {
        pool = std::make_unique<WorkerPool>(std::max<std::size_t>(1, cfg.threads - 1));
    }

    std::optional<Tensor> seq_out;
    std::optional<Tensor> par_out;
    for (BenchMode mode : cfg.modes) {
        const Model& model = mode == BenchMode::saf ? saf : paf;
        const ExecutionMode exec = mode == BenchMode::paf_par ? ExecutionMode::concurrent : ExecutionMode::sequential;
        WorkerPool* p = mode == BenchMode::paf_par ? pool.get() : nullptr;

        Tensor out;
        for (std::size_t i = 0; i < kBenchWarmups; ++i) {
            out = run_layers(model, input, exec, p);
        }
        ModeTiming timing;
        timing.mode = mode;
        timing.samples_ns.reserve(cfg.repeats);
        for (std::size_t i = 0; i < cfg.repeats; ++i) {
            const auto start = std::chrono::steady_clock::now();
            out = run_layers(model, input, exec, p);
            const auto stop = std::chrono::steady_clock::now();
            timing.samples_ns.push_back(std::chrono::duration_cast<std::chrono::nanoseconds>(stop - start).count());
        }
        timing.stats = summarize(timing.samples_ns);
        result.timings.push_back(std::move(timing));
        if (mode == BenchMode::paf_seq) {
            seq_out = std::move(out);
        } else if (mode == BenchMode::paf_par) {
            par_out = std::move(out);
        }
    }
    if (seq_out && par_out) {
        result.paf_outputs_identical = bitwise_equal(*seq_out, *par_out);
    }
    return result;
}

}  // namespace paflab
