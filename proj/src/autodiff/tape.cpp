#include "longdr/autodiff/tape.hpp"

#include "longdr/common/errors.hpp"

namespace longdr::ad {

const Tensor& Var::value() const { return tape->value(id); }

const Tensor& Gradients::of(Var v) const {
    auto it = grads_.find(v.id);
    if (it == grads_.end()) {
        throw ContractError("no gradient recorded for node " + std::to_string(v.id));
    }
    return it->second;
}

Var Tape::leaf(Tensor value) {
    if (!value.all_finite()) throw DomainError("non-finite value in leaf tensor");
    const bool rg = value.requires_grad();
    nodes_.push_back(Node{"leaf", std::move(value), {}, rg, true, {}});
    return Var{this, nodes_.size() - 1};
}

Var Tape::constant(Tensor value) {
    value.set_requires_grad(false);
    return leaf(std::move(value));
}

bool Tape::any_requires_grad(const std::vector<std::size_t>& ids) const {
    for (auto id : ids) {
        if (nodes_[id].requires_grad) return true;
    }
    return false;
}

Var Tape::record(const char* op, Tensor value, std::vector<std::size_t> inputs,
                 BackwardFn backward) {
    if (!value.all_finite()) {
        throw DomainError(std::string("non-finite value produced by ") + op);
    }
    const bool rg = any_requires_grad(inputs);
    value.set_requires_grad(rg);
    nodes_.push_back(Node{op, std::move(value), std::move(inputs), rg, false,
                          rg ? std::move(backward) : BackwardFn{}});
    return Var{this, nodes_.size() - 1};
}

Tensor& Tape::accumulate(std::size_t id) {
    auto& slot = grads_[id];
    if (!slot) slot.emplace(nodes_[id].value.shape());
    return *slot;
}

Gradients Tape::backward(Var loss) {
    if (loss.tape != this) throw ContractError("loss belongs to a different tape");
    if (value(loss.id).size() != 1) {
        throw ContractError("backward needs a scalar loss, got shape " +
                            shape_string(value(loss.id).shape()));
    }
    grads_.assign(nodes_.size(), std::nullopt);
    grads_[loss.id].emplace(value(loss.id).shape(), 1.0);

    for (std::size_t i = loss.id + 1; i-- > 0;) {
        Node& node = nodes_[i];
        if (!node.requires_grad || !grads_[i] || node.is_leaf) continue;
        // The closure may grow grads_ entries of inputs but never of i itself.
        const Tensor g = std::move(*grads_[i]);
        grads_[i].reset();
        node.backward(*this, g);
    }

    Gradients out;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        const Node& node = nodes_[i];
        if (!node.is_leaf || !node.requires_grad) continue;
        if (grads_[i]) {
            out.set(i, std::move(*grads_[i]));
        } else {
            out.set(i, Tensor(node.value.shape()));
        }
    }
    grads_.clear();
    return out;
}

} // namespace longdr::ad
