#pragma once

// Dense float64 tensors with a reverse-mode gradient tape.
//
// A Tensor is a cheap handle onto a shared graph node. Operations that see at
// least one input with requires_grad record their inputs and a backward rule on
// the result, so the tape is the DAG reachable from the loss.

#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

namespace snn {

using Shape = std::vector<std::size_t>;

struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct DomainError : std::domain_error {
    using std::domain_error::domain_error;
};

inline std::size_t numel(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

inline std::string to_string(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ", ";
        os << shape[i];
    }
    os << ']';
    return os.str();
}

struct Node;
using NodePtr = std::shared_ptr<Node>;

struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;  // empty until backward reaches the node
    bool requires_grad = false;
    bool is_leaf = true;
    const char* op = "leaf";
    std::vector<NodePtr> inputs;
    // Reads this node's grad and accumulates into inputs[i]->grad.
    std::function<void(Node&)> backward_fn;

    Node() = default;
    Node(const Node&) = delete;
    Node& operator=(const Node&) = delete;

    // Long BPTT chains would otherwise recurse once per node on destruction.
    ~Node() {
        std::vector<NodePtr> pending = std::move(inputs);
        while (!pending.empty()) {
            NodePtr n = std::move(pending.back());
            pending.pop_back();
            if (n && n.use_count() == 1) {
                for (auto& in : n->inputs) pending.push_back(std::move(in));
                n->inputs.clear();
            }
        }
    }

    void ensure_grad() {
        if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
    }
};

namespace detail {
inline bool& grad_enabled_flag() {
    thread_local bool enabled = true;
    return enabled;
}
}  // namespace detail

inline bool grad_enabled() { return detail::grad_enabled_flag(); }

/// RAII guard that disables tape recording on the current thread.
class NoGradGuard {
public:
    NoGradGuard() : previous_(detail::grad_enabled_flag()) { detail::grad_enabled_flag() = false; }
    ~NoGradGuard() { detail::grad_enabled_flag() = previous_; }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

class Tensor {
public:
    Tensor() = default;

    Tensor(Shape shape, std::vector<double> values, bool requires_grad = false)
        : node_(std::make_shared<Node>()) {
        if (numel(shape) != values.size()) {
            throw ShapeError("tensor: shape " + to_string(shape) + " holds " +
                             std::to_string(numel(shape)) + " values, got " +
                             std::to_string(values.size()));
        }
        node_->shape = std::move(shape);
        node_->value = std::move(values);
        node_->requires_grad = requires_grad;
    }

    static Tensor zeros(Shape shape, bool requires_grad = false) {
        const auto n = numel(shape);
        return Tensor(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
    }
    static Tensor full(Shape shape, double v, bool requires_grad = false) {
        const auto n = numel(shape);
        return Tensor(std::move(shape), std::vector<double>(n, v), requires_grad);
    }
    static Tensor scalar(double v, bool requires_grad = false) {
        return Tensor(Shape{}, {v}, requires_grad);
    }

    bool defined() const { return static_cast<bool>(node_); }
    const Shape& shape() const { return node_->shape; }
    std::size_t dim(std::size_t axis) const { return node_->shape.at(axis); }
    std::size_t rank() const { return node_->shape.size(); }
    std::size_t size() const { return node_->value.size(); }

    std::span<const double> values() const { return node_->value; }
    // Mutable access is meant for leaves (parameter updates, test perturbations).
    std::span<double> mutable_values() { return node_->value; }
    double item() const {
        if (size() != 1) throw ShapeError("item: tensor of shape " + to_string(shape()) + " is not a scalar");
        return node_->value[0];
    }
    double operator[](std::size_t i) const { return node_->value[i]; }

    bool requires_grad() const { return node_->requires_grad; }
    Tensor& set_requires_grad(bool on) {
        node_->requires_grad = on;
        return *this;
    }
    bool is_leaf() const { return node_->is_leaf; }
    const char* op() const { return node_->op; }

    bool has_grad() const { return !node_->grad.empty(); }
    std::span<const double> grad() const { return node_->grad; }
    void zero_grad() { node_->grad.clear(); }

    /// Fresh leaf sharing no tape history with this tensor.
    Tensor detach() const { return Tensor(shape(), node_->value, false); }

    const NodePtr& node() const { return node_; }
    static Tensor from_node(NodePtr n) {
        Tensor t;
        t.node_ = std::move(n);
        return t;
    }

    void backward() const;

private:
    NodePtr node_;
};

/// Builds an op result; attaches inputs and the backward rule only when some
/// input requires grad and recording is enabled.
inline Tensor make_result(const char* op, Shape shape, std::vector<double> value,
                          std::vector<Tensor> inputs, std::function<void(Node&)> backward_fn) {
    Tensor out(std::move(shape), std::move(value));
    bool needs = false;
    if (grad_enabled()) {
        for (const auto& t : inputs) needs = needs || t.requires_grad();
    }
    auto& node = *out.node();
    node.op = op;
    node.is_leaf = false;
    if (needs) {
        node.requires_grad = true;
        node.inputs.reserve(inputs.size());
        for (auto& t : inputs) node.inputs.push_back(t.node());
        node.backward_fn = std::move(backward_fn);
    }
    return out;
}

/// Reverse-topological sweep from a scalar loss. Leaf grads accumulate across
/// calls; interior grads are rebuilt on every call.
inline void Tensor::backward() const {
    if (size() != 1) throw ShapeError("backward: loss must be scalar, got shape " + to_string(shape()));
    if (!requires_grad()) throw std::logic_error("backward: loss does not depend on any tensor requiring grad");

    // Iterative post-order DFS over nodes that require grad.
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, std::size_t>> stack;
    seen.insert(node_.get());
    stack.emplace_back(node_.get(), 0);
    while (!stack.empty()) {
        auto& [n, next] = stack.back();
        if (next < n->inputs.size()) {
            Node* child = n->inputs[next++].get();
            if (child->requires_grad && seen.insert(child).second) stack.emplace_back(child, 0);
        } else {
            order.push_back(n);
            stack.pop_back();
        }
    }

    for (Node* n : order) {
        if (!n->is_leaf) n->grad.assign(n->value.size(), 0.0);
        else n->ensure_grad();
    }
    node_->grad[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backward_fn) n->backward_fn(*n);
    }
}

}  // namespace snn
