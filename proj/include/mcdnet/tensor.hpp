#pragma once

// Reverse-mode autodiff tensor. A Tensor is a cheap handle onto a shared
// graph node; operators in ops/*.hpp produce new nodes and record how to
// push gradients back to their inputs.

#include <algorithm>
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

namespace mcdnet {

using Shape = std::vector<std::size_t>;

inline std::size_t numel(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

inline std::string to_string(const Shape& shape) {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << ')';
    return os.str();
}

struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct GraphError : std::logic_error {
    using std::logic_error::logic_error;
};

struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {
inline thread_local bool grad_enabled_flag = true;
inline thread_local bool checked_mode_flag = true;
}  // namespace detail

/// Disables graph recording for the current thread while alive.
class NoGradGuard {
public:
    NoGradGuard() : previous_(detail::grad_enabled_flag) { detail::grad_enabled_flag = false; }
    ~NoGradGuard() { detail::grad_enabled_flag = previous_; }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

inline bool grad_enabled() { return detail::grad_enabled_flag; }

/// In checked mode every operator output is scanned for NaN/Inf.
inline void set_checked_mode(bool on) { detail::checked_mode_flag = on; }
inline bool checked_mode() { return detail::checked_mode_flag; }

template <typename T>
struct Node {
    Shape shape;
    std::vector<T> data;
    std::vector<T> grad;
    bool requires_grad = false;
    bool consumed = false;
    const char* op = "leaf";
    std::vector<std::shared_ptr<Node>> inputs;
    std::function<void(Node&)> backward;

    std::vector<T>& ensure_grad() {
        if (grad.empty()) grad.assign(data.size(), T{0});
        return grad;
    }
};

template <typename T>
class Tensor {
public:
    using value_type = T;

    Tensor() = default;
    explicit Tensor(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}

    static Tensor from(Shape shape, std::vector<T> data, bool requires_grad = false) {
        if (mcdnet::numel(shape) != data.size())
            throw ShapeError("tensor data size " + std::to_string(data.size()) +
                             " does not match shape " + to_string(shape));
        for (auto d : shape)
            if (d == 0) throw ShapeError("tensor dimensions must be positive: " + to_string(shape));
        auto node = std::make_shared<Node<T>>();
        node->shape = std::move(shape);
        node->data = std::move(data);
        node->requires_grad = requires_grad;
        return Tensor(std::move(node));
    }

    static Tensor full(Shape shape, T value, bool requires_grad = false) {
        const auto n = mcdnet::numel(shape);
        return from(std::move(shape), std::vector<T>(n, value), requires_grad);
    }

    static Tensor zeros(Shape shape, bool requires_grad = false) {
        return full(std::move(shape), T{0}, requires_grad);
    }

    static Tensor scalar(T value, bool requires_grad = false) { return from({1}, {value}, requires_grad); }

    bool defined() const { return static_cast<bool>(node_); }
    Node<T>* node() const { return node_.get(); }
    const std::shared_ptr<Node<T>>& shared_node() const { return node_; }

    const Shape& shape() const { return node_->shape; }
    std::size_t rank() const { return node_->shape.size(); }
    std::size_t dim(std::size_t i) const { return node_->shape.at(i); }
    std::size_t numel() const { return node_->data.size(); }

    std::span<const T> data() const { return node_->data; }
    // Direct mutation is reserved for initializers and optimizer steps.
    std::span<T> mutable_data() { return node_->data; }
    T operator[](std::size_t i) const { return node_->data[i]; }

    T item() const {
        if (numel() != 1) throw ShapeError("item() on non-scalar tensor " + to_string(shape()));
        return node_->data[0];
    }

    bool requires_grad() const { return node_->requires_grad; }
    void set_requires_grad(bool on) { node_->requires_grad = on; }

    bool has_grad() const { return !node_->grad.empty(); }
    std::span<const T> grad() const { return node_->grad; }
    std::span<T> mutable_grad() { return node_->ensure_grad(); }
    void zero_grad() { node_->grad.clear(); }

    const char* op() const { return node_->op; }

    /// Copy of the values with no graph history.
    Tensor detach() const { return from(shape(), node_->data, false); }

    template <typename U>
    Tensor<U> cast() const {
        std::vector<U> out(node_->data.begin(), node_->data.end());
        return Tensor<U>::from(shape(), std::move(out), requires_grad());
    }

    /// Reverse sweep from a scalar. Without retain_graph the recorded graph is
    /// released and a second call throws.
    void backward(bool retain_graph = false) {
        if (numel() != 1) throw GraphError("backward() requires a scalar, got " + to_string(shape()));
        if (node_->consumed)
            throw GraphError("graph already consumed; pass retain_graph=true to backpropagate twice");
        if (!node_->requires_grad) throw GraphError("backward() on a tensor that does not require grad");

        std::vector<Node<T>*> order;
        std::unordered_set<Node<T>*> seen;
        std::vector<std::pair<Node<T>*, std::size_t>> stack{{node_.get(), 0}};
        seen.insert(node_.get());
        while (!stack.empty()) {
            auto& [n, next] = stack.back();
            if (next < n->inputs.size()) {
                Node<T>* child = n->inputs[next++].get();
                if (child->requires_grad && seen.insert(child).second) stack.emplace_back(child, 0);
            } else {
                order.push_back(n);
                stack.pop_back();
            }
        }

        // interior gradients belong to a single sweep; only leaves accumulate
        for (Node<T>* n : order)
            if (n->backward) n->grad.clear();
        node_->ensure_grad()[0] += T{1};
        for (auto it = order.rbegin(); it != order.rend(); ++it) {
            Node<T>* n = *it;
            if (n->backward && !n->grad.empty()) n->backward(*n);
        }
        if (!retain_graph) {
            for (Node<T>* n : order) {
                if (!n->backward) continue;
                n->backward = nullptr;
                n->inputs.clear();
                n->consumed = true;
            }
        }
    }

private:
    std::shared_ptr<Node<T>> node_;
};

namespace detail {

template <typename T>
void check_finite(const std::vector<T>& values, const char* op) {
    if (!mcdnet::checked_mode()) return;
    for (const T v : values)
        if (!std::isfinite(v)) throw NumericError(std::string("non-finite value produced by ") + op);
}

/// Wraps an operator output; attaches the backward rule when any input
/// participates in differentiation and recording is on.
template <typename T>
Tensor<T> make_result(Shape shape, std::vector<T> data, const char* op,
                      std::vector<Tensor<T>> inputs, std::function<void(Node<T>&)> backward) {
    check_finite(data, op);
    auto node = std::make_shared<Node<T>>();
    node->shape = std::move(shape);
    node->data = std::move(data);
    node->op = op;
    bool any = false;
    for (const auto& in : inputs) any = any || in.requires_grad();
    if (any && mcdnet::grad_enabled()) {
        node->requires_grad = true;
        node->inputs.reserve(inputs.size());
        for (const auto& in : inputs) node->inputs.push_back(in.shared_node());
        node->backward = std::move(backward);
    }
    return Tensor<T>(std::move(node));
}

template <typename T>
bool wants_grad(const Node<T>& self, std::size_t i) {
    return self.inputs[i]->requires_grad;
}

}  // namespace detail

}  // namespace mcdnet
