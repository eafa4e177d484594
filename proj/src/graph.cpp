#include "paflab/graph.hpp"

#include <string>

#include "paflab/errors.hpp"

namespace paflab {

Var Graph::push(Node node) {
    nodes_.push_back(std::move(node));
    return Var{this, nodes_.size() - 1};
}

void Graph::check_owned(Var v) const {
    if (v.graph != this || v.index >= nodes_.size()) {
        throw ContractError("Var does not belong to this graph");
    }
}

Var Graph::constant(Tensor value) {
    Node node;
    node.value = std::make_shared<const Tensor>(std::move(value));
    return push(std::move(node));
}

Var Graph::parameter(Tensor value) {
    Node node;
    node.value = std::make_shared<const Tensor>(std::move(value));
    node.requires_grad = grad_enabled_;
    return push(std::move(node));
}

Var Graph::record(Tensor value, std::span<const Var> inputs, BackwardFn backward) {
    Node node;
    node.value = std::make_shared<const Tensor>(std::move(value));
    bool any = false;
    for (Var in : inputs) {
        check_owned(in);
        any = any || nodes_[in.index].requires_grad;
    }
    if (grad_enabled_ && any) {
        node.requires_grad = true;
        node.inputs.reserve(inputs.size());
        for (Var in : inputs) {
            node.inputs.push_back(in.index);
        }
        node.backward = std::move(backward);
    }
    return push(std::move(node));
}

Var Graph::constant_view(const Tensor& value) {
    Node node;
    node.value = std::shared_ptr<const Tensor>(std::shared_ptr<const Tensor>(), &value);
    return push(std::move(node));
}

Var Graph::parameter_view(const Tensor& value) {
    Node node;
    node.value = std::shared_ptr<const Tensor>(std::shared_ptr<const Tensor>(), &value);
    node.requires_grad = grad_enabled_;
    return push(std::move(node));
}

const Tensor& Graph::value(Var v) const {
    check_owned(v);
    return *nodes_[v.index].value;
}

bool Graph::requires_grad(Var v) const {
    check_owned(v);
    return nodes_[v.index].requires_grad;
}

Tensor Graph::gradient(Var v) const {
    check_owned(v);
    const Node& n = nodes_[v.index];
    if (n.grad.empty()) {
        return Tensor(n.value->rows(), n.value->cols());
    }
    return n.grad;
}

void Graph::backward(Var loss) {
    check_owned(loss);
    const Tensor& lv = value(loss);
    if (lv.rows() != 1 || lv.cols() != 1) {
        throw ContractError("backward: loss must be 1x1, got " + lv.shape());
    }
    for (Node& n : nodes_) {
        n.grad = Tensor();
    }
    nodes_[loss.index].grad = Tensor::filled(1, 1, 1.0);

    std::vector<const Tensor*> in_values;
    std::vector<Tensor*> in_grads;
    for (std::size_t i = loss.index + 1; i-- > 0;) {
        Node& node = nodes_[i];
        if (!node.backward || node.grad.empty()) {
            continue;
        }
        in_values.clear();
        in_grads.clear();
        for (std::size_t in : node.inputs) {
            Node& src = nodes_[in];
            in_values.push_back(src.value.get());
            if (src.requires_grad) {
                if (src.grad.empty()) {
                    src.grad = Tensor(src.value->rows(), src.value->cols());
                }
                in_grads.push_back(&src.grad);
            } else {
                in_grads.push_back(nullptr);
            }
        }
        node.backward(BackwardContext{*node.value, node.grad, in_values, in_grads});
    }
}

Graph Graph::branch() const {
    Graph g(grad_enabled_ ? GradMode::enabled : GradMode::disabled);
    g.parent_ = this;
    return g;
}

Var Graph::import(Var outer) {
    if (parent_ == nullptr || outer.graph != parent_) {
        throw ContractError("import: Var is not from this branch's parent graph");
    }
    const Node& src = parent_->nodes_.at(outer.index);
    Node node;
    node.value = src.value;
    node.requires_grad = src.requires_grad;
    node.imported_from = outer.index;
    return push(std::move(node));
}

std::vector<std::size_t> Graph::merge(Graph&& branch) {
    if (branch.parent_ != this) {
        throw ContractError("merge: graph is not a branch of this graph");
    }
    std::vector<std::size_t> mapping(branch.nodes_.size());
    for (std::size_t i = 0; i < branch.nodes_.size(); ++i) {
        Node& node = branch.nodes_[i];
        if (node.imported_from) {
            mapping[i] = *node.imported_from;
            continue;
        }
        for (std::size_t& in : node.inputs) {
            in = mapping[in];
        }
        node.grad = Tensor();
        nodes_.push_back(std::move(node));
        mapping[i] = nodes_.size() - 1;
    }
    activation_pattern_ ^= branch.activation_pattern_ * 0x9e3779b97f4a7c15ULL;
    branch.nodes_.clear();
    return mapping;
}

void Graph::note_activation_pattern(std::uint64_t h) {
    activation_pattern_ = (activation_pattern_ * 1099511628211ULL) ^ h;
}

}  // namespace paflab
