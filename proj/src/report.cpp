#include "paflab/report.hpp"

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>

#include "paflab/errors.hpp"

#ifndef PAFLAB_BUILD_ID
#define PAFLAB_BUILD_ID "unknown"
#endif

namespace paflab {

std::string build_id() { return PAFLAB_BUILD_ID; }

std::string created_at() {
    std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH")) {
        char* end = nullptr;
        const long long v = std::strtoll(epoch, &end, 10);
        if (end != epoch && *end == '\0') {
            t = static_cast<std::time_t>(v);
        }
    }
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

JsonValue model_config_json(const ModelConfig& c) {
    return JsonValue{{"depth", c.depth},
                     {"dim", c.dim},
                     {"heads", c.heads},
                     {"ffn_dim", c.ffn_dim},
                     {"vocab", c.vocab},
                     {"max_seq", c.max_seq},
                     {"variant", to_string(c.variant)},
                     {"activation", to_string(c.activation)},
                     {"init_std", c.init_std},
                     {"seed", c.seed}};
}

JsonValue config_json(const ExperimentConfig& c) {
    JsonValue modes = JsonValue::array();
    for (BenchMode m : c.bench.modes) {
        modes.push_back(to_string(m));
    }
    JsonValue variants = JsonValue::array();
    for (DesignVariant v : c.grad_check.variants) {
        variants.push_back(to_string(v));
    }
    JsonValue activations = JsonValue::array();
    for (Activation a : c.grad_check.activations) {
        activations.push_back(to_string(a));
    }
    return JsonValue{
        {"seed", c.seed},
        {"model", model_config_json(c.model)},
        {"task",
         {{"kind", to_string(c.task.kind)},
          {"vocab", c.task.vocab},
          {"seq_len", c.task.seq_len},
          {"pooling", to_string(c.task.pooling)},
          {"seed", c.task.seed}}},
        {"train",
         {{"steps", c.train.steps},
          {"batch_size", c.train.batch_size},
          {"learning_rate", c.train.learning_rate},
          {"optimizer", to_string(c.train.optimizer)},
          {"beta1", c.train.beta1},
          {"beta2", c.train.beta2},
          {"epsilon", c.train.epsilon},
          {"eval_interval", c.train.eval_interval},
          {"eval_size", c.train.eval_size},
          {"seed", c.train.seed}}},
        {"probe", {{"sequences", c.probe.sequences}, {"seed", c.probe.seed}}},
        {"bench",
         {{"depth", c.bench.depth},
          {"dim", c.bench.dim},
          {"heads", c.bench.heads},
          {"ffn_dim", c.bench.ffn_dim},
          {"seq_len", c.bench.seq_len},
          {"activation", to_string(c.bench.activation)},
          {"threads", c.bench.threads},
          {"repeats", c.bench.repeats},
          {"modes", modes},
          {"seed", c.bench.seed}}},
        {"compare",
         {{"seeds", c.compare.seeds},
          {"finetune_fraction", c.compare.finetune_fraction},
          {"isotropy_margin", c.compare.isotropy_margin},
          {"parity_bound", c.compare.parity_bound},
          {"max_ratio_bound", c.compare.max_ratio_bound},
          {"mean_ratio_bound", c.compare.mean_ratio_bound}}},
        {"grad_check",
         {{"samples_per_tensor", c.grad_check.options.samples_per_tensor},
          {"step", c.grad_check.options.step},
          {"denominator_floor", c.grad_check.options.denominator_floor},
          {"batch_size", c.grad_check.batch_size},
          {"max_rel_error", c.grad_check.max_rel_error},
          {"variants", variants},
          {"activations", activations},
          {"seed", c.grad_check.options.seed}}}};
}

JsonValue trace_json(const ProbeTrace& t) {
    JsonValue layers = JsonValue::array();
    for (const LayerProbe& p : t.probes) {
        layers.push_back({{"layer", p.layer_index},
                          {"isotropy", p.isotropy},
                          {"input_norm", p.input_norm},
                          {"attn_residual_norm", p.attn_residual_norm},
                          {"ffn_residual_norm", p.ffn_residual_norm},
                          {"ratio", residual_ratio(p)}});
    }
    return JsonValue{{"model_id", t.model_id},
                     {"variant", to_string(t.variant)},
                     {"probe_batch", t.probe_batch},
                     {"final_isotropy", t.final_isotropy()},
                     {"mean_residual_ratio", t.mean_residual_ratio()},
                     {"max_residual_ratio", t.max_residual_ratio()},
                     {"layers", layers}};
}

JsonValue training_json(std::string_view label, const TrainResult& r) {
    JsonValue eval = JsonValue::array();
    for (const EvalPoint& e : r.eval_curve) {
        eval.push_back({{"step", e.step}, {"accuracy", e.accuracy}});
    }
    return JsonValue{{"label", label},
                     {"model_id", r.model.id()},
                     {"steps", r.loss_curve.size()},
                     {"final_accuracy", r.final_accuracy},
                     {"loss", r.loss_curve},
                     {"eval", eval}};
}

JsonValue timing_json(const ModeTiming& t) {
    return JsonValue{{"mode", to_string(t.mode)},
                     {"samples_ns", t.samples_ns},
                     {"median_ns", t.stats.median_ns},
                     {"p10_ns", t.stats.p10_ns},
                     {"p90_ns", t.stats.p90_ns}};
}

JsonValue criterion_json(const Criterion& c) {
    return JsonValue{{"id", c.id},
                     {"description", c.description},
                     {"value", c.value},
                     {"threshold", c.threshold},
                     {"passed", c.passed}};
}

JsonValue grad_check_json(std::string_view label, const GradCheckReport& r) {
    JsonValue tensors = JsonValue::array();
    for (const TensorGradCheck& t : r.tensors) {
        tensors.push_back({{"name", t.name},
                           {"checked", t.checked},
                           {"skipped_kinks", t.skipped_kinks},
                           {"max_rel_error", t.max_rel_error},
                           {"max_abs_error", t.max_abs_error},
                           {"max_abs_gradient", t.max_abs_gradient},
                           {"worst_analytic", t.worst_analytic},
                           {"worst_finite_difference", t.worst_finite_difference}});
    }
    return JsonValue{{"label", label},
                     {"max_rel_error", r.max_rel_error},
                     {"max_abs_error", r.max_abs_error},
                     {"worst_tensor", r.worst_tensor},
                     {"total_checked", r.total_checked},
                     {"total_skipped", r.total_skipped},
                     {"tensors", tensors}};
}

JsonValue report_header(std::string_view command, const JsonValue& config) {
    return JsonValue{{"schema_version", kReportSchemaVersion},
                     {"command", command},
                     {"build_id", build_id()},
                     {"created_at", created_at()},
                     {"config", config}};
}

void write_text_file(const std::filesystem::path& path, std::string_view content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot open '" + path.string() + "' for writing");
    }
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) {
        throw IoError("failed writing '" + path.string() + "'");
    }
}

void write_report(const std::filesystem::path& path, const JsonValue& report) {
    write_text_file(path, report.dump(2) + "\n");
}

}  // namespace paflab
