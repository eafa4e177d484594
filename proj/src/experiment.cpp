#include "paflab/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <span>

#include "paflab/analysis.hpp"
#include "paflab/errors.hpp"

namespace paflab {

bool CompareResult::passed() const {
    return std::all_of(criteria.begin(), criteria.end(), [](const Criterion& c) { return c.passed; });
}

ExperimentConfig config_for_seed(const ExperimentConfig& cfg, std::uint64_t seed) {
    ExperimentConfig out = cfg;
    const DerivedSeeds s = derive_seeds(seed);
    out.seed = seed;
    out.model.seed = s.model;
    out.task.seed = s.task;
    out.train.seed = s.train;
    return out;
}

CompareRun run_compare_seed(const ExperimentConfig& base, std::uint64_t seed, ExecutionMode mode, WorkerPool* pool,
                            const std::function<void(std::string_view)>& log) {
    const ExperimentConfig cfg = config_for_seed(base, seed);
    const auto note = [&](const std::string& msg) {
        if (log) {
            log(msg);
        }
    };
    const ProbeBatch batch = make_probe_batch(cfg.task, cfg.probe.sequences, cfg.probe.seed);

    CompareRun run;
    run.seed = seed;

    ModelConfig saf_config = cfg.model;
    saf_config.variant = DesignVariant::saf;
    note("seed " + std::to_string(seed) + ": training SAF for " + std::to_string(cfg.train.steps) + " steps");
    run.saf = train(Model::initialize(saf_config), cfg.task, cfg.train, mode, pool);

    TrainConfig finetune = cfg.train;
    finetune.steps = cfg.compare.finetune_steps(cfg.train.steps);
    finetune.seed = mix_seed(cfg.train.seed, 3);
    finetune.eval_interval = std::min(finetune.eval_interval, finetune.steps);
    note("seed " + std::to_string(seed) + ": fine-tuning transplanted PAF for " + std::to_string(finetune.steps) +
         " steps");
    run.paf = train(transplant_saf_to_paf(run.saf.model), cfg.task, finetune, mode, pool);

    ModelConfig no_ffn_config = cfg.model;
    no_ffn_config.variant = DesignVariant::no_ffn;
    note("seed " + std::to_string(seed) + ": training NoFFN for " + std::to_string(cfg.train.steps) + " steps");
    run.no_ffn = train(Model::initialize(no_ffn_config), cfg.task, cfg.train, mode, pool);

    run.saf_trace = probe_model(run.saf.model, batch, mode);
    run.paf_trace = probe_model(run.paf.model, batch, mode);
    run.no_ffn_trace = probe_model(run.no_ffn.model, batch, mode);
    return run;
}

namespace {

ProbeTrace average_traces(std::span<const ProbeTrace* const> traces) {
    std::vector<std::vector<LayerProbe>> layers;
    for (const ProbeTrace* t : traces) {
        layers.push_back(t->probes);
    }
    ProbeTrace out;
    out.model_id = traces.front()->model_id;
    out.variant = traces.front()->variant;
    out.probe_batch = traces.front()->probe_batch;
    if (traces.size() > 1) {
        out.model_id += "-mean" + std::to_string(traces.size());
    }
    out.probes = average_probes(layers);
    return out;
}

double mean_of(std::span<const double> xs) {
    double s = 0.0;
    for (double x : xs) {
        s += x;
    }
    return s / static_cast<double>(xs.size());
}

}  // namespace

CompareResult evaluate_compare(const ExperimentConfig& cfg, std::vector<CompareRun> runs) {
    if (runs.empty()) {
        throw ContractError("evaluate_compare: no runs");
    }
    CompareResult result;
    result.runs = std::move(runs);

    std::vector<const ProbeTrace*> saf, paf, no_ffn;
    std::vector<double> saf_acc, paf_acc, no_ffn_acc, saf_iso, paf_iso, no_ffn_iso;
    double worst_max_ratio = 0.0;
    double worst_mean_ratio = 0.0;
    for (const CompareRun& r : result.runs) {
        saf.push_back(&r.saf_trace);
        paf.push_back(&r.paf_trace);
        no_ffn.push_back(&r.no_ffn_trace);
        saf_acc.push_back(r.saf.final_accuracy);
        paf_acc.push_back(r.paf.final_accuracy);
        no_ffn_acc.push_back(r.no_ffn.final_accuracy);
        saf_iso.push_back(r.saf_trace.final_isotropy());
        paf_iso.push_back(r.paf_trace.final_isotropy());
        no_ffn_iso.push_back(r.no_ffn_trace.final_isotropy());
        for (const ProbeTrace* t : {&r.saf_trace, &r.paf_trace}) {
            worst_max_ratio = std::max(worst_max_ratio, t->max_residual_ratio());
            worst_mean_ratio = std::max(worst_mean_ratio, t->mean_residual_ratio());
        }
    }
    result.traces = {average_traces(saf), average_traces(paf), average_traces(no_ffn)};
    result.saf_accuracy = mean_of(saf_acc);
    result.paf_accuracy = mean_of(paf_acc);
    result.no_ffn_accuracy = mean_of(no_ffn_acc);
    result.parity_delta = std::abs(result.saf_accuracy - result.paf_accuracy);

    const double iso_gap = std::min(mean_of(no_ffn_iso) - mean_of(saf_iso), mean_of(no_ffn_iso) - mean_of(paf_iso));
    const CompareSettings& c = cfg.compare;
    result.criteria.push_back(
        {"isotropy_ordering",
         "mean final-layer isotropy of NoFFN exceeds both SAF and PAF by at least the margin (value: smaller gap)",
         iso_gap, c.isotropy_margin, iso_gap >= c.isotropy_margin});
    result.criteria.push_back({"residual_ratio_max",
                               "largest per-layer attention residual ratio over SAF and PAF runs stays below bound",
                               worst_max_ratio, c.max_ratio_bound, worst_max_ratio < c.max_ratio_bound});
    result.criteria.push_back({"residual_ratio_mean",
                               "largest layer-mean attention residual ratio over SAF and PAF runs stays below bound",
                               worst_mean_ratio, c.mean_ratio_bound, worst_mean_ratio < c.mean_ratio_bound});
    result.criteria.push_back({"accuracy_parity", "|SAF accuracy - PAF accuracy|, each averaged over seeds",
                               result.parity_delta, c.parity_bound, result.parity_delta <= c.parity_bound});
    return result;
}

CompareResult run_compare(const ExperimentConfig& cfg, ExecutionMode mode, WorkerPool* pool,
                          const std::function<void(std::string_view)>& log) {
    cfg.validate();
    std::vector<CompareRun> runs;
    for (std::uint64_t seed : cfg.compare.seeds) {
        runs.push_back(run_compare_seed(cfg, seed, mode, pool, log));
    }
    return evaluate_compare(cfg, std::move(runs));
}

}  // namespace paflab
