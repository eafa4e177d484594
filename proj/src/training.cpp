#include "paflab/training.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>
#include <string>

#include "paflab/errors.hpp"

namespace paflab {

std::string_view to_string(OptimizerKind k) { return k == OptimizerKind::adam ? "adam" : "sgd"; }

OptimizerKind parse_optimizer(std::string_view name) {
    if (name == "adam") {
        return OptimizerKind::adam;
    }
    if (name == "sgd") {
        return OptimizerKind::sgd;
    }
    throw ConfigError("unknown optimizer '" + std::string(name) + "' (expected sgd or adam)");
}

void TrainConfig::validate() const {
    if (steps < 1) {
        throw ConfigError("train.steps must be >= 1");
    }
    if (batch_size < 1) {
        throw ConfigError("train.batch_size must be >= 1");
    }
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
        throw ConfigError("train.learning_rate must be finite and >= 0");
    }
    if (eval_interval < 1) {
        throw ConfigError("train.eval_interval must be >= 1");
    }
    if (eval_size < 1) {
        throw ConfigError("train.eval_size must be >= 1");
    }
    if (optimizer == OptimizerKind::adam) {
        if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0) || !(epsilon > 0.0)) {
            throw ConfigError("train: adam needs 0 <= beta1, beta2 < 1 and epsilon > 0");
        }
    }
}

void Optimizer::step(std::span<Tensor* const> params, std::span<const Tensor> grads) {
    if (params.size() != grads.size()) {
        throw ContractError("Optimizer::step: parameter/gradient count mismatch");
    }
    ++t_;
    if (cfg_.optimizer == OptimizerKind::sgd) {
        for (std::size_t i = 0; i < params.size(); ++i) {
            Tensor& p = *params[i];
            const Tensor& g = grads[i];
            for (std::size_t k = 0; k < p.size(); ++k) {
                p[k] -= cfg_.learning_rate * g[k];
            }
        }
        return;
    }
    if (first_moment_.empty()) {
        for (const Tensor* p : params) {
            first_moment_.emplace_back(p->rows(), p->cols());
            second_moment_.emplace_back(p->rows(), p->cols());
        }
    }
    const double b1 = cfg_.beta1;
    const double b2 = cfg_.beta2;
    const double correction1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double correction2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor& p = *params[i];
        const Tensor& g = grads[i];
        Tensor& m = first_moment_[i];
        Tensor& v = second_moment_[i];
        for (std::size_t k = 0; k < p.size(); ++k) {
            m[k] = b1 * m[k] + (1.0 - b1) * g[k];
            v[k] = b2 * v[k] + (1.0 - b2) * g[k] * g[k];
            const double m_hat = m[k] / correction1;
            const double v_hat = v[k] / correction2;
            p[k] -= cfg_.learning_rate * m_hat / (std::sqrt(v_hat) + cfg_.epsilon);
        }
    }
}

std::vector<Example> evaluation_set(const ToyTask& task, std::size_t count) {
    return generate_examples(task, count, kEvalStream);
}

LossAndGradients loss_and_gradients(const Model& m, const ToyTask& task, std::span<const Example> batch,
                                    ExecutionMode mode, WorkerPool* pool) {
    Graph g;
    const ModelVars vars = bind(g, m);
    const Var loss = batch_loss(task, m, vars, batch, mode, pool);
    g.backward(loss);
    LossAndGradients out;
    out.loss = loss.value()[0];
    for (Var p : vars.parameters()) {
        out.gradients.push_back(g.gradient(p));
    }
    return out;
}

TrainResult train(Model model, const ToyTask& task, const TrainConfig& cfg, ExecutionMode mode,
                  WorkerPool* pool) {
    cfg.validate();
    task.check_compatible(model.config);
    model.validate();

    const std::vector<Example> held_out = evaluation_set(task, cfg.eval_size);
    Rng data = Rng(cfg.seed).fork(0xDA7A);
    Optimizer optimizer(cfg);

    TrainResult result;
    result.loss_curve.reserve(cfg.steps);
    std::vector<Example> batch(cfg.batch_size);
    for (std::size_t step = 1; step <= cfg.steps; ++step) {
        for (auto& ex : batch) {
            ex = generate_example(task, data);
        }
        LossAndGradients lg = loss_and_gradients(model, task, batch, mode, pool);
        if (!std::isfinite(lg.loss)) {
            throw Error("training diverged at step " + std::to_string(step));
        }
        result.loss_curve.push_back(lg.loss);
        optimizer.step(parameter_list(model), lg.gradients);
        if (step % cfg.eval_interval == 0 || step == cfg.steps) {
            result.eval_curve.push_back(EvalPoint{step, accuracy(task, model, held_out)});
        }
    }
    result.final_accuracy = result.eval_curve.empty() ? accuracy(task, model, held_out)
                                                      : result.eval_curve.back().accuracy;
    result.model = std::move(model);
    return result;
}

void write_curves_csv(std::ostream& out, const TrainResult& result) {
    out << "step,loss,eval_accuracy\n";
    std::size_t next_eval = 0;
    char buf[40];
    for (std::size_t i = 0; i < result.loss_curve.size(); ++i) {
        const std::size_t step = i + 1;
        std::snprintf(buf, sizeof buf, "%.17g", result.loss_curve[i]);
        out << step << ',' << buf << ',';
        if (next_eval < result.eval_curve.size() && result.eval_curve[next_eval].step == step) {
            std::snprintf(buf, sizeof buf, "%.17g", result.eval_curve[next_eval].accuracy);
            out << buf;
            ++next_eval;
        }
        out << '\n';
    }
}

std::string curves_csv(const TrainResult& result) {
    std::ostringstream os;
    write_curves_csv(os, result);
    return os.str();
}

}  // namespace paflab
