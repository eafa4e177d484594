#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "paflab/tensor.hpp"

namespace paflab {

class Graph;

/// Handle to a node recorded on a Graph.
struct Var {
    Graph* graph = nullptr;
    std::size_t index = 0;

    const Tensor& value() const;
    std::size_t rows() const { return value().rows(); }
    std::size_t cols() const { return value().cols(); }
};

/// What a node's backward function sees. Gradients are accumulated (+=) into
/// `input_grads`; entries are null for inputs that do not require a gradient.
struct BackwardContext {
    const Tensor& output;
    const Tensor& output_grad;
    std::span<const Tensor* const> inputs;
    std::span<Tensor* const> input_grads;
};

using BackwardFn = std::function<void(const BackwardContext&)>;

/// Tape of primitive operations for reverse-mode differentiation.
///
/// Nodes are appended in evaluation order, so index order is a topological
/// order. Values are shared immutably, which makes importing a node into a
/// branch graph free. A branch is recorded independently (possibly on another
/// thread) and later spliced back with merge(); imported leaves resolve to the
/// outer nodes they came from, so the merged tape is identical to one recorded
/// sequentially.
class Graph {
  public:
    enum class GradMode { enabled, disabled };

    explicit Graph(GradMode mode = GradMode::enabled) : grad_enabled_(mode == GradMode::enabled) {}
    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;
    Graph(Graph&&) = default;
    Graph& operator=(Graph&&) = default;

    Var constant(Tensor value);
    Var parameter(Tensor value);
    /// Leaves that alias `value` without copying; it must outlive the graph.
    Var constant_view(const Tensor& value);
    Var parameter_view(const Tensor& value);

    /// Appends an operation result. `backward` is dropped when no input
    /// requires a gradient or gradients are disabled.
    Var record(Tensor value, std::span<const Var> inputs, BackwardFn backward);
    Var record(Tensor value, std::initializer_list<Var> inputs, BackwardFn backward) {
        return record(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()), std::move(backward));
    }

    const Tensor& value(Var v) const;
    bool requires_grad(Var v) const;
    /// Gradient of the last backward() loss; zeros when no gradient reached v.
    Tensor gradient(Var v) const;
    std::size_t size() const { return nodes_.size(); }
    bool grad_enabled() const { return grad_enabled_; }

    /// Reverse accumulation from a 1x1 loss. Previous gradients are cleared.
    void backward(Var loss);

    /// Empty graph whose import() calls refer to nodes of this graph.
    Graph branch() const;
    /// Leaf mirroring `outer` (a node of the parent graph). Branches only.
    Var import(Var outer);
    /// Appends the branch's non-import nodes and returns, for every branch
    /// index, the corresponding index in this graph.
    std::vector<std::size_t> merge(Graph&& branch);
    Var adopt(const std::vector<std::size_t>& mapping, Var branch_var) {
        return Var{this, mapping.at(branch_var.index)};
    }

    /// Fingerprint of every piecewise-linear branch taken so far (relu masks).
    /// Finite differences are only meaningful when it does not change.
    std::uint64_t activation_pattern() const { return activation_pattern_; }
    void note_activation_pattern(std::uint64_t h);

  private:
    struct Node {
        std::shared_ptr<const Tensor> value;
        Tensor grad;
        std::vector<std::size_t> inputs;
        BackwardFn backward;
        bool requires_grad = false;
        std::optional<std::size_t> imported_from;
    };

    Var push(Node node);
    void check_owned(Var v) const;

    std::vector<Node> nodes_;
    const Graph* parent_ = nullptr;
    bool grad_enabled_ = true;
    std::uint64_t activation_pattern_ = 0;
};

inline const Tensor& Var::value() const { return graph->value(*this); }

}  // namespace paflab
