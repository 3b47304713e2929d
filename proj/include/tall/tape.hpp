#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <map>
#include <string>
#include <vector>

#include "tall/error.hpp"
#include "tall/tensor.hpp"

namespace tall {

/// The closed set of primitives a tape can record.
enum class OpKind : std::uint8_t {
    leaf,
    matmul,
    add,
    sub,
    mul,
    scale,
    add_row,
    mul_row,
    softmax,
    layernorm,
    gelu,
    relu,
    reshape,
    permute,
    window_partition,
    window_unpartition,
    cyclic_shift,
    gather,
    gather_rows,
    segment_mean,
    sum,
    mean,
    log_clamped,
};

inline const char* to_string(OpKind op) {
    switch (op) {
        case OpKind::leaf: return "leaf";
        case OpKind::matmul: return "matmul";
        case OpKind::add: return "add";
        case OpKind::sub: return "sub";
        case OpKind::mul: return "mul";
        case OpKind::scale: return "scale";
        case OpKind::add_row: return "add_row";
        case OpKind::mul_row: return "mul_row";
        case OpKind::softmax: return "softmax";
        case OpKind::layernorm: return "layernorm";
        case OpKind::gelu: return "gelu";
        case OpKind::relu: return "relu";
        case OpKind::reshape: return "reshape";
        case OpKind::permute: return "permute";
        case OpKind::window_partition: return "window_partition";
        case OpKind::window_unpartition: return "window_unpartition";
        case OpKind::cyclic_shift: return "cyclic_shift";
        case OpKind::gather: return "gather";
        case OpKind::gather_rows: return "gather_rows";
        case OpKind::segment_mean: return "segment_mean";
        case OpKind::sum: return "sum";
        case OpKind::mean: return "mean";
        case OpKind::log_clamped: return "log_clamped";
    }
    return "?";
}

template <Scalar T>
class Tape;

/// Handle to a value recorded on a tape.
template <Scalar T>
struct Var {
    Tape<T>* tape = nullptr;
    std::size_t id = 0;

    const Tensor<T>& value() const { return tape->value(id); }
    const Shape& shape() const { return tape->value(id).shape(); }
};

/// Records forward values in execution order; backward walks them in reverse.
/// A tape is confined to one thread.
template <Scalar T>
class Tape {
public:
    struct Node;
    using BackwardFn = std::function<void(Tape&, const Node&)>;

    struct Node {
        OpKind op = OpKind::leaf;
        Tensor<T> value;
        std::vector<std::size_t> inputs;
        bool requires_grad = false;
        BackwardFn backward;
        std::string name;
        mutable std::vector<T> grad;
    };

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;
    Tape(Tape&&) = default;
    Tape& operator=(Tape&&) = default;

    Var<T> leaf(Tensor<T> value, bool requires_grad = false, std::string name = {}) {
        Node n;
        n.value = std::move(value);
        n.requires_grad = requires_grad;
        n.name = std::move(name);
        nodes_.push_back(std::move(n));
        return {this, nodes_.size() - 1};
    }

    Var<T> constant(Tensor<T> value) { return leaf(std::move(value), false); }

    /// Named trainable leaf; its gradient is reported by param_grads().
    Var<T> param(const std::string& name, Tensor<T> value) {
        if (params_.count(name)) throw UsageError("parameter bound twice: " + name);
        auto v = leaf(std::move(value), true, name);
        params_[name] = v.id;
        return v;
    }

    Var<T> push(OpKind op, Tensor<T> value, std::initializer_list<Var<T>> inputs, BackwardFn fn) {
        Node n;
        n.op = op;
        n.value = std::move(value);
        for (const auto& v : inputs) {
            if (v.tape != this) throw UsageError(std::string(to_string(op)) + ": input from another tape");
            n.inputs.push_back(v.id);
            n.requires_grad = n.requires_grad || nodes_[v.id].requires_grad;
        }
        if (n.requires_grad) n.backward = std::move(fn);
        nodes_.push_back(std::move(n));
        return {this, nodes_.size() - 1};
    }

    const Tensor<T>& value(std::size_t id) const { return nodes_.at(id).value; }
    const Node& node(std::size_t id) const { return nodes_.at(id); }
    std::size_t size() const noexcept { return nodes_.size(); }
    bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }

    /// Gradient accumulator for a node, zero-initialised on first touch.
    T* grad_buffer(std::size_t id) const {
        auto& g = nodes_[id].grad;
        if (g.empty()) g.assign(nodes_[id].value.size(), T{0});
        return g.data();
    }

    void backward(Var<T> out, const Tensor<T>& seed) {
        if (nodes_.empty() || out.tape != this || out.id >= nodes_.size())
            throw UsageError("backward before forward: output is not recorded on this tape");
        if (seed.shape() != nodes_[out.id].value.shape())
            throw ShapeError("backward seed", seed.shape(), nodes_[out.id].value.shape());
        for (auto& n : nodes_) n.grad.clear();
        nodes_[out.id].grad.assign(seed.data().begin(), seed.data().end());
        for (std::size_t i = out.id + 1; i-- > 0;) {
            const Node& n = nodes_[i];
            if (n.grad.empty() || !n.requires_grad || !n.backward) continue;
            n.backward(*this, n);
        }
        has_backward_ = true;
    }

    /// Scalar output, seed 1.
    void backward(Var<T> out) {
        if (nodes_.empty() || out.tape != this)
            throw UsageError("backward before forward: output is not recorded on this tape");
        backward(out, Tensor<T>(nodes_.at(out.id).value.shape(), T{1}));
    }

    /// Gradient of a node after backward; zeros if the output does not depend on it.
    Tensor<T> grad(Var<T> v) const {
        if (!has_backward_) throw UsageError("grad requested before backward");
        const Node& n = nodes_.at(v.id);
        if (n.grad.empty()) return Tensor<T>(n.value.shape());
        return Tensor<T>(n.value.shape(), n.grad);
    }

    std::map<std::string, Tensor<T>> param_grads() const {
        std::map<std::string, Tensor<T>> out;
        for (const auto& [name, id] : params_) out.emplace(name, grad(Var<T>{const_cast<Tape*>(this), id}));
        return out;
    }

    const std::map<std::string, std::size_t>& params() const noexcept { return params_; }

private:
    std::vector<Node> nodes_;
    std::map<std::string, std::size_t> params_;
    bool has_backward_ = false;
};

}  // namespace tall
