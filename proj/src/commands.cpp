#include "paflab/commands.hpp"

#include <cstdio>
#include <memory>
#include <ostream>
#include <sstream>

#include "paflab/analysis.hpp"
#include "paflab/bench.hpp"
#include "paflab/checkpoint.hpp"
#include "paflab/config.hpp"
#include "paflab/errors.hpp"
#include "paflab/experiment.hpp"
#include "paflab/report.hpp"
#include "paflab/worker_pool.hpp"

namespace paflab {

std::filesystem::path sidecar_path(const std::filesystem::path& path, std::string_view suffix) {
    std::filesystem::path p = path;
    p.replace_extension();
    p += std::string(suffix);
    return p;
}

namespace {

ExperimentConfig resolve_config(const CommandOptions& opts, bool required) {
    ExperimentConfig cfg;
    if (opts.config) {
        cfg = load_config(*opts.config);
    } else if (required) {
        throw ConfigError("--config PATH is required");
    } else {
        apply_root_seed(cfg, 0);
    }
    if (opts.seed) {
        apply_root_seed(cfg, *opts.seed);
    }
    return cfg;
}

// Concurrent PAF execution only when more than one thread was asked for.
struct Execution {
    ExecutionMode mode = ExecutionMode::sequential;
    std::unique_ptr<WorkerPool> pool;
};

Execution make_execution(const CommandOptions& opts) {
    Execution e;
    const std::size_t threads = opts.threads.value_or(1);
    if (threads > 1) {
        e.mode = ExecutionMode::concurrent;
        e.pool = std::make_unique<WorkerPool>(threads - 1);
    }
    return e;
}

std::string fixed(double v, int digits = 4) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

const std::filesystem::path& require_out(const CommandOptions& opts) {
    if (!opts.out) {
        throw ConfigError("--out PATH is required");
    }
    return *opts.out;
}

}  // namespace

int cmd_train(const CommandOptions& opts, std::ostream& out, std::ostream& err) {
    const ExperimentConfig cfg = resolve_config(opts, true);
    const std::filesystem::path& ckpt = require_out(opts);
    Execution exec = make_execution(opts);

    err << "train: " << to_string(cfg.model.variant) << " on " << to_string(cfg.task.kind) << ", "
        << cfg.train.steps << " steps\n";
    const TrainResult result = train(Model::initialize(cfg.model), cfg.task, cfg.train, exec.mode, exec.pool.get());
    const ProbeBatch batch = make_probe_batch(cfg.task, cfg.probe.sequences, cfg.probe.seed);
    const ProbeTrace trace = probe_model(result.model, batch, exec.mode);

    save_checkpoint(result.model, ckpt);
    write_text_file(sidecar_path(ckpt, ".curves.csv"), curves_csv(result));

    JsonValue report = report_header("train", config_json(cfg));
    report["checkpoint"] = {{"path", ckpt.string()},
                            {"model_id", result.model.id()},
                            {"parameter_count", parameter_count(result.model)}};
    report["training"] = JsonValue::array({training_json(to_string(cfg.model.variant), result)});
    report["traces"] = JsonValue::array({trace_json(trace)});
    report["summary"] = {{"final_loss", result.loss_curve.back()}, {"final_accuracy", result.final_accuracy}};
    write_report(sidecar_path(ckpt, ".report.json"), report);

    out << "model " << result.model.id() << " final_loss " << fixed(result.loss_curve.back(), 6)
        << " eval_accuracy " << fixed(result.final_accuracy) << "\n";
    out << "checkpoint " << ckpt.string() << "\n";
    return kExitOk;
}

int cmd_probe(const CommandOptions& opts, std::ostream& out, std::ostream& err) {
    if (!opts.checkpoint) {
        throw ConfigError("a checkpoint path is required");
    }
    const Model model = load_checkpoint(*opts.checkpoint);
    ExperimentConfig cfg;
    if (opts.config) {
        cfg = load_config(*opts.config);
    } else {
        cfg.model = model.config;
        cfg.task.vocab = model.config.vocab;
        cfg.task.seq_len = std::min(kProbeSeqLen, model.config.max_seq);
    }
    cfg.task.check_compatible(model.config);
    if (opts.seed) {
        cfg.probe.seed = *opts.seed;
    }
    Execution exec = make_execution(opts);

    err << "probe: " << model.id() << " with probe seed " << cfg.probe.seed << "\n";
    const ProbeBatch batch = make_probe_batch(cfg.task, cfg.probe.sequences, cfg.probe.seed);
    const ProbeTrace trace = probe_model(model, batch, exec.mode);
    const std::string csv = trace_csv(std::span<const ProbeTrace>(&trace, 1));

    JsonValue config = config_json(cfg);
    config["model"] = model_config_json(model.config);
    config["checkpoint"] = opts.checkpoint->string();
    JsonValue report = report_header("probe", config);
    report["traces"] = JsonValue::array({trace_json(trace)});
    report["summary"] = {{"final_isotropy", trace.final_isotropy()},
                         {"mean_residual_ratio", trace.mean_residual_ratio()},
                         {"max_residual_ratio", trace.max_residual_ratio()}};

    if (opts.out) {
        write_text_file(*opts.out, csv);
        write_report(sidecar_path(*opts.out, ".report.json"), report);
        out << "final_isotropy " << fixed(trace.final_isotropy()) << " mean_residual_ratio "
            << fixed(trace.mean_residual_ratio()) << "\n";
    } else {
        out << csv;
    }
    return kExitOk;
}

int cmd_bench(const CommandOptions& opts, std::ostream& out, std::ostream& err) {
    ExperimentConfig cfg = resolve_config(opts, false);
    BenchConfig& bench = cfg.bench;
    if (opts.threads) {
        bench.threads = *opts.threads;
    }
    if (opts.repeats) {
        bench.repeats = *opts.repeats;
    }
    if (opts.modes) {
        bench.modes = parse_bench_modes(*opts.modes);
    }
    bench.validate();

    err << "bench: L=" << bench.depth << " d=" << bench.dim << " d_ff=" << bench.ffn_dim << " n=" << bench.seq_len
        << " threads=" << bench.threads << " repeats=" << bench.repeats << "\n";
    const BenchResult result = run_bench(bench);
    for (const std::string& w : result.warnings) {
        err << "warning: " << w << "\n";
    }

    JsonValue report = report_header("bench", config_json(cfg));
    JsonValue timing = JsonValue::array();
    for (const ModeTiming& t : result.timings) {
        timing.push_back(timing_json(t));
        out << to_string(t.mode) << " median_ms " << fixed(t.stats.median_ns / 1e6, 3) << " p10_ms "
            << fixed(t.stats.p10_ns / 1e6, 3) << " p90_ms " << fixed(t.stats.p90_ns / 1e6, 3) << "\n";
    }
    report["timing"] = timing;
    JsonValue summary = JsonValue::object();
    summary["warnings"] = result.warnings;
    if (result.paf_outputs_identical) {
        summary["paf_outputs_identical"] = *result.paf_outputs_identical;
        out << "paf-par output identical to paf-seq: " << (*result.paf_outputs_identical ? "yes" : "NO") << "\n";
    }
    const ModeTiming* seq = result.find(BenchMode::paf_seq);
    const ModeTiming* par = result.find(BenchMode::paf_par);
    if (seq && par) {
        const double ratio = par->stats.median_ns / seq->stats.median_ns;
        summary["par_over_seq_median"] = ratio;
        out << "paf-par / paf-seq median " << fixed(ratio, 3) << "\n";
    }
    report["summary"] = summary;
    if (opts.out) {
        write_report(*opts.out, report);
    }
    if (result.paf_outputs_identical && !*result.paf_outputs_identical) {
        err << "bench: paf-par output differs from paf-seq\n";
        return kExitAcceptance;
    }
    return kExitOk;
}

int cmd_compare(const CommandOptions& opts, std::ostream& out, std::ostream& err) {
    const ExperimentConfig cfg = resolve_config(opts, true);
    Execution exec = make_execution(opts);
    const CompareResult result =
        run_compare(cfg, exec.mode, exec.pool.get(), [&](std::string_view msg) { err << "compare: " << msg << "\n"; });

    JsonValue report = report_header("compare", config_json(cfg));
    JsonValue traces = JsonValue::array();
    for (const ProbeTrace& t : result.traces) {
        traces.push_back(trace_json(t));
    }
    report["traces"] = traces;
    JsonValue training = JsonValue::array();
    JsonValue runs = JsonValue::array();
    for (const CompareRun& r : result.runs) {
        const std::string s = std::to_string(r.seed);
        training.push_back(training_json("SAF seed " + s, r.saf));
        training.push_back(training_json("PAF seed " + s, r.paf));
        training.push_back(training_json("NoFFN seed " + s, r.no_ffn));
        runs.push_back({{"seed", r.seed},
                        {"saf_accuracy", r.saf.final_accuracy},
                        {"paf_accuracy", r.paf.final_accuracy},
                        {"no_ffn_accuracy", r.no_ffn.final_accuracy},
                        {"traces", {trace_json(r.saf_trace), trace_json(r.paf_trace), trace_json(r.no_ffn_trace)}}});
    }
    report["training"] = training;
    report["runs"] = runs;
    JsonValue criteria = JsonValue::array();
    for (const Criterion& c : result.criteria) {
        criteria.push_back(criterion_json(c));
        out << (c.passed ? "PASS " : "FAIL ") << c.id << " value " << fixed(c.value) << " threshold "
            << fixed(c.threshold) << "\n";
    }
    report["criteria"] = criteria;
    report["summary"] = {{"saf_accuracy", result.saf_accuracy},
                         {"paf_accuracy", result.paf_accuracy},
                         {"no_ffn_accuracy", result.no_ffn_accuracy},
                         {"parity_delta", result.parity_delta},
                         {"passed", result.passed()}};
    if (opts.out) {
        write_report(*opts.out, report);
        write_text_file(sidecar_path(*opts.out, ".trace.csv"), trace_csv(result.traces));
    }
    out << "parity_delta " << fixed(result.parity_delta) << "\n";
    return result.passed() ? kExitOk : kExitAcceptance;
}

int cmd_grad_check(const CommandOptions& opts, std::ostream& out, std::ostream& err) {
    const ExperimentConfig cfg = resolve_config(opts, true);
    const GradCheckSettings& gc = cfg.grad_check;
    const std::vector<Example> batch = generate_examples(cfg.task, gc.batch_size, 0x6C7B);

    JsonValue report = report_header("grad-check", config_json(cfg));
    JsonValue checks = JsonValue::array();
    JsonValue criteria = JsonValue::array();
    bool all_passed = true;
    for (DesignVariant v : gc.variants) {
        for (Activation a : gc.activations) {
            ModelConfig mc = cfg.model;
            mc.variant = v;
            mc.activation = a;
            const Model m = Model::initialize(mc);
            err << "grad-check: " << m.id() << "\n";
            const GradCheckReport r = grad_check(m, cfg.task, batch, gc.options);
            const std::string label = std::string(to_string(v)) + "-" + std::string(to_string(a));
            checks.push_back(grad_check_json(label, r));
            const bool ok = r.max_rel_error < gc.max_rel_error;
            all_passed = all_passed && ok;
            criteria.push_back(criterion_json({"grad_check " + label,
                                               "max relative error of analytic vs central-difference gradients",
                                               r.max_rel_error, gc.max_rel_error, ok}));
            out << (ok ? "PASS " : "FAIL ") << label << " max_rel_error " << r.max_rel_error << " ("
                << r.worst_tensor << ", " << r.total_checked << " checked, " << r.total_skipped
                << " kink samples replaced)\n";
        }
    }
    report["grad_check"] = checks;
    report["criteria"] = criteria;
    report["summary"] = {{"passed", all_passed}};
    if (opts.out) {
        write_report(*opts.out, report);
    }
    return all_passed ? kExitOk : kExitAcceptance;
}

int run_command(std::string_view name, const CommandOptions& opts, std::ostream& out, std::ostream& err) {
    try {
        if (name == "train") {
            return cmd_train(opts, out, err);
        }
        if (name == "probe") {
            return cmd_probe(opts, out, err);
        }
        if (name == "bench") {
            return cmd_bench(opts, out, err);
        }
        if (name == "compare") {
            return cmd_compare(opts, out, err);
        }
        if (name == "grad-check") {
            return cmd_grad_check(opts, out, err);
        }
        err << "error: unknown command '" << name << "'\n";
        return kExitConfig;
    } catch (const CorruptCheckpointError& e) {
        err << "error: corrupt checkpoint: " << e.what() << "\n";
        return kExitCorrupt;
    } catch (const IoError& e) {
        err << "error: " << e.what() << "\n";
        return kExitIo;
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const InputError& e) {
        err << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const DimensionError& e) {
        err << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        err << "error: " << name << ": " << e.what() << "\n";
        return kExitFailure;
    }
}

}  // namespace paflab
