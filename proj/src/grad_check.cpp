#include <algorithm>
#include <cmath>
#include <numeric>

#include "paflab/errors.hpp"
#include "paflab/training.hpp"

namespace paflab {

namespace {

struct Evaluation {
    double loss = 0.0;
    std::uint64_t pattern = 0;
};

Evaluation evaluate_loss(const Model& m, const ToyTask& task, std::span<const Example> batch, ExecutionMode mode) {
    Graph g(Graph::GradMode::disabled);
    const ModelVars vars = bind(g, m);
    const Var loss = batch_loss(task, m, vars, batch, mode);
    return Evaluation{loss.value()[0], g.activation_pattern()};
}

}  // namespace

GradCheckReport grad_check(const Model& m, const ToyTask& task, std::span<const Example> batch,
                           const GradCheckOptions& opts) {
    if (!(opts.step > 0.0)) {
        throw ContractError("grad_check: step must be positive");
    }
    const LossAndGradients analytic = loss_and_gradients(m, task, batch, opts.mode);
    const std::uint64_t base_pattern = evaluate_loss(m, task, batch, opts.mode).pattern;

    Model work = m;
    const std::vector<Tensor*> params = parameter_list(work);
    const std::vector<std::string> names = parameter_names(m);
    Rng rng = Rng(opts.seed).fork(0x6C4E);

    GradCheckReport report;
    for (std::size_t ti = 0; ti < params.size(); ++ti) {
        Tensor& tensor = *params[ti];
        const Tensor& grad = analytic.gradients[ti];
        TensorGradCheck tc;
        tc.name = names[ti];

        std::vector<std::size_t> order(tensor.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        for (std::size_t i = order.size(); i-- > 1;) {
            std::swap(order[i], order[rng.below(i + 1)]);
        }

        for (std::size_t idx : order) {
            if (tc.checked >= opts.samples_per_tensor) {
                break;
            }
            const double original = tensor[idx];
            tensor[idx] = original + opts.step;
            const Evaluation plus = evaluate_loss(work, task, batch, opts.mode);
            tensor[idx] = original - opts.step;
            const Evaluation minus = evaluate_loss(work, task, batch, opts.mode);
            tensor[idx] = original;
            if (plus.pattern != base_pattern || minus.pattern != base_pattern) {
                ++tc.skipped_kinks;
                continue;
            }
            const double fd = (plus.loss - minus.loss) / (2.0 * opts.step);
            const double a = grad[idx];
            const double denom = std::max({std::abs(a), std::abs(fd), opts.denominator_floor});
            const double rel = std::abs(a - fd) / denom;
            tc.max_abs_error = std::max(tc.max_abs_error, std::abs(a - fd));
            if (rel >= tc.max_rel_error) {
                tc.max_rel_error = rel;
                tc.worst_analytic = a;
                tc.worst_finite_difference = fd;
            }
            tc.max_abs_gradient = std::max(tc.max_abs_gradient, std::abs(a));
            ++tc.checked;
        }
        report.total_checked += tc.checked;
        report.total_skipped += tc.skipped_kinks;
        report.max_abs_error = std::max(report.max_abs_error, tc.max_abs_error);
        if (tc.max_rel_error >= report.max_rel_error) {
            report.max_rel_error = tc.max_rel_error;
            report.worst_tensor = tc.name;
        }
        report.tensors.push_back(std::move(tc));
    }
    return report;
}

}  // namespace paflab
