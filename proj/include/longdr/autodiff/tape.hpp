#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "longdr/autodiff/tensor.hpp"

namespace longdr::ad {

class Tape;

// Handle to a value recorded on a tape.
struct Var {
    Tape* tape = nullptr;
    std::size_t id = 0;

    const Tensor& value() const;
    const Shape& shape() const { return value().shape(); }
};

class Gradients {
public:
    void set(std::size_t id, Tensor grad) { grads_.insert_or_assign(id, std::move(grad)); }
    bool contains(Var v) const { return grads_.count(v.id) != 0; }
    // Gradient of a leaf; throws ContractError when the leaf did not require grad.
    const Tensor& of(Var v) const;

private:
    std::unordered_map<std::size_t, Tensor> grads_;
};

// Define-by-run record of primitive operations. Nodes are appended in
// execution order, so every node's inputs precede it and a reverse sweep is
// a valid topological traversal. A tape is confined to one thread at a time.
class Tape {
public:
    // Propagates grad_out (the gradient w.r.t. this node's value) into the
    // inputs via Tape::accumulate.
    using BackwardFn = std::function<void(Tape&, const Tensor& grad_out)>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    // Leaf whose requires_grad flag is taken from the tensor.
    Var leaf(Tensor value);
    Var constant(Tensor value);

    // Records an op result. The backward closure is dropped when none of the
    // inputs requires grad. Throws DomainError if the value is not finite.
    Var record(const char* op, Tensor value, std::vector<std::size_t> inputs, BackwardFn backward);

    const Tensor& value(std::size_t id) const { return nodes_[id].value; }
    bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
    bool any_requires_grad(const std::vector<std::size_t>& ids) const;
    std::size_t size() const { return nodes_.size(); }

    // Gradient buffer of an input during backward, zero-initialised on first use.
    // Only valid inside a BackwardFn.
    Tensor& accumulate(std::size_t id);

    // Reverse sweep from a one-element loss. Returns d loss / d leaf for every
    // leaf that requires grad (zeros for leaves the loss does not reach).
    // Fan-out contributions are summed.
    Gradients backward(Var loss);

private:
    struct Node {
        const char* op;
        Tensor value;
        std::vector<std::size_t> inputs;
        bool requires_grad = false;
        bool is_leaf = false;
        BackwardFn backward;
    };

    std::vector<Node> nodes_;
    std::vector<std::optional<Tensor>> grads_;
};

} // namespace longdr::ad
