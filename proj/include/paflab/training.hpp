#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "paflab/model.hpp"
#include "paflab/tasks.hpp"

namespace paflab {

enum class OptimizerKind { sgd, adam };

std::string_view to_string(OptimizerKind k);
OptimizerKind parse_optimizer(std::string_view name);

struct TrainConfig {
    std::size_t steps = 2000;
    std::size_t batch_size = 8;
    double learning_rate = 3e-4;
    OptimizerKind optimizer = OptimizerKind::adam;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::size_t eval_interval = 100;
    std::size_t eval_size = 256;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Parameter update rule over tensors in for_each_parameter order.
class Optimizer {
  public:
    explicit Optimizer(const TrainConfig& cfg) : cfg_(cfg) {}

    void step(std::span<Tensor* const> params, std::span<const Tensor> grads);
    std::size_t steps_taken() const { return t_; }

  private:
    TrainConfig cfg_;
    std::size_t t_ = 0;
    std::vector<Tensor> first_moment_;
    std::vector<Tensor> second_moment_;
};

struct EvalPoint {
    std::size_t step = 0;
    double accuracy = 0.0;
};

struct TrainResult {
    Model model;
    /// loss_curve[i] is the batch loss at step i + 1, before that step's update.
    std::vector<double> loss_curve;
    std::vector<EvalPoint> eval_curve;
    double final_accuracy = 0.0;
};

/// Held-out evaluation examples for a task (fixed stream of the task seed).
std::vector<Example> evaluation_set(const ToyTask& task, std::size_t count);

/// Analytic gradients of the mean batch loss, in for_each_parameter order.
struct LossAndGradients {
    double loss = 0.0;
    std::vector<Tensor> gradients;
};
LossAndGradients loss_and_gradients(const Model& m, const ToyTask& task, std::span<const Example> batch,
                                    ExecutionMode mode = ExecutionMode::sequential, WorkerPool* pool = nullptr);

/// Deterministic given model, task and cfg seeds. Evaluates every
/// eval_interval steps and after the last step.
/// `mode` and `pool` only change where PAF blocks run, never the result.
TrainResult train(Model model, const ToyTask& task, const TrainConfig& cfg,
                  ExecutionMode mode = ExecutionMode::sequential, WorkerPool* pool = nullptr);

/// "step,loss,eval_accuracy", eval_accuracy empty off-interval.
void write_curves_csv(std::ostream& out, const TrainResult& result);
std::string curves_csv(const TrainResult& result);

struct GradCheckOptions {
    std::size_t samples_per_tensor = 200;
    double step = 1e-5;
    double denominator_floor = 1e-8;
    std::uint64_t seed = 0;
    ExecutionMode mode = ExecutionMode::sequential;
};

struct TensorGradCheck {
    std::string name;
    std::size_t checked = 0;
    /// Samples whose +/- step crossed a relu kink and were replaced.
    std::size_t skipped_kinks = 0;
    double max_rel_error = 0.0;
    double max_abs_error = 0.0;
    double max_abs_gradient = 0.0;
    /// Analytic and finite-difference values at the worst sample.
    double worst_analytic = 0.0;
    double worst_finite_difference = 0.0;
};

struct GradCheckReport {
    double max_rel_error = 0.0;
    double max_abs_error = 0.0;
    std::string worst_tensor;
    std::size_t total_checked = 0;
    std::size_t total_skipped = 0;
    std::vector<TensorGradCheck> tensors;
};

/// Compares analytic gradients of the mean batch loss with central
/// differences, relative error |a - fd| / max(|a|, |fd|, floor).
GradCheckReport grad_check(const Model& m, const ToyTask& task, std::span<const Example> batch,
                           const GradCheckOptions& opts = {});

}  // namespace paflab
