#include "paflab/analysis.hpp"

#include <string>

#include "paflab/errors.hpp"

namespace paflab {

ProbeBatch make_probe_batch(const ToyTask& task, std::size_t count, std::uint64_t seed) {
    task.validate();
    ProbeBatch batch;
    Rng rng = Rng(seed).fork(0x960BE);
    batch.sequences.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        batch.sequences.push_back(generate_example(task, rng).tokens);
    }
    batch.descriptor = std::to_string(count) + " x " + std::to_string(task.seq_len) + " " +
                       std::string(to_string(task.kind)) + " vocab=" + std::to_string(task.vocab) +
                       " seed=" + std::to_string(seed) + " isotropy=per-sequence-mean";
    return batch;
}

ProbeTrace probe_model(const Model& m, const ProbeBatch& batch, ExecutionMode mode) {
    if (batch.sequences.empty()) {
        throw InputError("probe batch is empty");
    }
    std::vector<std::vector<LayerProbe>> per_sequence;
    per_sequence.reserve(batch.sequences.size());
    ForwardOptions opts;
    opts.mode = mode;
    for (const auto& seq : batch.sequences) {
        per_sequence.push_back(forward(m, seq, opts).trace.probes);
    }
    ProbeTrace trace;
    trace.model_id = m.id();
    trace.variant = m.config.variant;
    trace.probes = average_probes(per_sequence);
    trace.probe_batch = batch.descriptor;
    return trace;
}

std::map<DesignVariant, ProbeTrace> degeneration_experiment(const ModelConfig& base, const ProbeBatch& batch,
                                                            std::span<const DesignVariant> variants) {
    if (batch.sequences.empty()) {
        throw InputError("degeneration_experiment: empty probe batch");
    }
    std::map<DesignVariant, ProbeTrace> out;
    for (DesignVariant v : variants) {
        ModelConfig cfg = base;
        cfg.variant = v;
        out[v] = probe_model(Model::initialize(cfg), batch);
    }
    return out;
}

std::map<DesignVariant, ProbeTrace> degeneration_experiment(std::span<const Model> models, const ProbeBatch& batch) {
    if (batch.sequences.empty()) {
        throw InputError("degeneration_experiment: empty probe batch");
    }
    std::map<DesignVariant, ProbeTrace> out;
    for (const Model& m : models) {
        const ModelConfig& a = models.front().config;
        const ModelConfig& b = m.config;
        if (a.depth != b.depth || a.dim != b.dim || a.heads != b.heads || a.ffn_dim != b.ffn_dim) {
            throw ContractError("degeneration_experiment: models differ in more than their variant");
        }
        out[m.config.variant] = probe_model(m, batch);
    }
    return out;
}

}  // namespace paflab
