#pragma once
// Reverse-mode differentiable N x C x H x W tensors.
//
// A Tensor is a cheap handle onto a shared TensorNode. Operations that see at
// least one input with requires_grad (and grad mode enabled) record their
// parents plus a closure computing the vector-Jacobian product; backward()
// replays that record in reverse topological order and then drops it.

#include <algorithm>
#include <array>
#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

namespace hinas {

struct Shape {
    int n = 1;
    int c = 1;
    int h = 1;
    int w = 1;

    [[nodiscard]] std::size_t numel() const {
        return static_cast<std::size_t>(n) * c * h * w;
    }
    [[nodiscard]] std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
    [[nodiscard]] std::string str() const {
        return "(" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) +
               "," + std::to_string(w) + ")";
    }
    friend bool operator==(const Shape&, const Shape&) = default;
};

class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Bookkeeping of live tensor storage on the current thread. Used as the
// memory proxy when comparing shared vs. unshared supernet forwards.
struct ActivationStats {
    long long live_tensors = 0;
    long long live_elements = 0;

    static ActivationStats& current() {
        thread_local ActivationStats stats;
        return stats;
    }
};

// Grad mode is per thread; NoGradGuard disables graph recording in a scope.
inline bool& grad_mode_flag() {
    thread_local bool enabled = true;
    return enabled;
}
inline bool grad_enabled() { return grad_mode_flag(); }

class NoGradGuard {
public:
    NoGradGuard() : previous_(grad_mode_flag()) { grad_mode_flag() = false; }
    ~NoGradGuard() { grad_mode_flag() = previous_; }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

template <typename T>
struct TensorNode {
    Shape shape;
    std::vector<T> data;
    std::vector<T> grad;  // empty until first accumulation
    bool requires_grad = false;
    std::vector<std::shared_ptr<TensorNode>> parents;
    std::function<void(TensorNode&)> backward_fn;

    explicit TensorNode(Shape s) : shape(s), data(s.numel(), T(0)) {
        auto& st = ActivationStats::current();
        ++st.live_tensors;
        st.live_elements += static_cast<long long>(data.size());
    }
    TensorNode(Shape s, std::vector<T> values) : shape(s), data(std::move(values)) {
        if (data.size() != s.numel()) {
            throw ShapeError("tensor data length " + std::to_string(data.size()) +
                             " does not match shape " + s.str());
        }
        auto& st = ActivationStats::current();
        ++st.live_tensors;
        st.live_elements += static_cast<long long>(data.size());
    }
    ~TensorNode() {
        auto& st = ActivationStats::current();
        --st.live_tensors;
        st.live_elements -= static_cast<long long>(data.size());
    }
    TensorNode(const TensorNode&) = delete;
    TensorNode& operator=(const TensorNode&) = delete;

    std::vector<T>& ensure_grad() {
        if (grad.empty()) grad.assign(data.size(), T(0));
        return grad;
    }
};

template <typename T>
class Tensor {
public:
    using value_type = T;
    using Node = TensorNode<T>;

    Tensor() = default;
    explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

    static Tensor zeros(Shape s, bool requires_grad = false) {
        Tensor t(std::make_shared<Node>(s));
        t.node_->requires_grad = requires_grad;
        return t;
    }
    static Tensor full(Shape s, T value, bool requires_grad = false) {
        Tensor t = zeros(s, requires_grad);
        std::fill(t.node_->data.begin(), t.node_->data.end(), value);
        return t;
    }
    static Tensor from(Shape s, std::vector<T> values, bool requires_grad = false) {
        Tensor t(std::make_shared<Node>(s, std::move(values)));
        t.node_->requires_grad = requires_grad;
        return t;
    }
    static Tensor vector(std::vector<T> values, bool requires_grad = false) {
        const int n = static_cast<int>(values.size());
        return from(Shape{1, n, 1, 1}, std::move(values), requires_grad);
    }
    static Tensor scalar(T value, bool requires_grad = false) {
        return from(Shape{1, 1, 1, 1}, {value}, requires_grad);
    }

    [[nodiscard]] bool defined() const { return static_cast<bool>(node_); }
    [[nodiscard]] const Shape& shape() const { return node_->shape; }
    [[nodiscard]] std::size_t numel() const { return node_->data.size(); }
    [[nodiscard]] std::span<T> data() { return node_->data; }
    [[nodiscard]] std::span<const T> data() const { return node_->data; }
    [[nodiscard]] std::vector<T>& values() { return node_->data; }
    [[nodiscard]] const std::vector<T>& values() const { return node_->data; }

    [[nodiscard]] bool has_grad() const { return !node_->grad.empty(); }
    [[nodiscard]] std::span<const T> grad() const { return node_->grad; }
    [[nodiscard]] std::span<T> grad_mut() { return node_->ensure_grad(); }
    void zero_grad() {
        if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), T(0));
    }

    [[nodiscard]] bool requires_grad() const { return node_->requires_grad; }
    void set_requires_grad(bool v) { node_->requires_grad = v; }

    [[nodiscard]] T item() const {
        if (numel() != 1) throw ShapeError("item() on non-scalar tensor " + shape().str());
        return node_->data[0];
    }
    [[nodiscard]] T at(int n, int c, int h, int w) const {
        const Shape& s = shape();
        return node_->data[((static_cast<std::size_t>(n) * s.c + c) * s.h + h) * s.w + w];
    }
    T& at(int n, int c, int h, int w) {
        const Shape& s = shape();
        return node_->data[((static_cast<std::size_t>(n) * s.c + c) * s.h + h) * s.w + w];
    }

    // Copy of the values with no graph history.
    [[nodiscard]] Tensor detach() const { return from(shape(), node_->data, false); }
    [[nodiscard]] Tensor clone() const { return detach(); }

    [[nodiscard]] Node* node() const { return node_.get(); }
    [[nodiscard]] const std::shared_ptr<Node>& node_ptr() const { return node_; }
    [[nodiscard]] bool same_storage(const Tensor& other) const { return node_ == other.node_; }

private:
    std::shared_ptr<Node> node_;
};

// A named trainable tensor. Names encode module position, e.g.
// "layer1.level2.cell.node0.edge1.conv3.weight".
template <typename T>
struct Parameter {
    std::string name;
    Tensor<T> tensor;
};

namespace detail {

template <typename T>
bool any_requires_grad(std::initializer_list<const Tensor<T>*> inputs) {
    for (const Tensor<T>* t : inputs) {
        if (t != nullptr && t->defined() && t->requires_grad()) return true;
    }
    return false;
}

// Wraps freshly computed output values into a tensor and, when recording,
// attaches the parents and VJP closure.
template <typename T, typename Fn>
Tensor<T> make_result(Shape shape, std::vector<T> values,
                      const std::vector<const Tensor<T>*>& inputs, Fn&& vjp) {
    Tensor<T> out = Tensor<T>::from(shape, std::move(values));
    if (!grad_enabled()) return out;
    bool record = false;
    for (const Tensor<T>* t : inputs) {
        if (t != nullptr && t->defined() && t->requires_grad()) record = true;
    }
    if (!record) return out;
    auto* node = out.node();
    node->requires_grad = true;
    for (const Tensor<T>* t : inputs) {
        if (t != nullptr && t->defined()) node->parents.push_back(t->node_ptr());
    }
    node->backward_fn = std::forward<Fn>(vjp);
    return out;
}

// Accumulate into a parent's gradient if it participates in differentiation.
template <typename T>
inline T* grad_target(const Tensor<T>& t) {
    if (!t.defined() || !t.requires_grad()) return nullptr;
    return t.node()->ensure_grad().data();
}

}  // namespace detail

// Reverse-mode sweep from a scalar loss. Gradients accumulate (sum semantics);
// the recorded graph is released afterwards.
template <typename T>
void backward(const Tensor<T>& loss) {
    if (loss.numel() != 1) {
        throw ShapeError("backward() requires a scalar loss, got shape " + loss.shape().str());
    }
    using Node = TensorNode<T>;
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    // Iterative post-order DFS gives a topological order (parents first).
    std::vector<std::pair<Node*, std::size_t>> stack;
    stack.emplace_back(loss.node(), 0);
    visited.insert(loss.node());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node* parent = node->parents[next++].get();
            if (parent->requires_grad && visited.insert(parent).second) {
                stack.emplace_back(parent, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    loss.node()->ensure_grad()[0] += T(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* node = *it;
        if (node->backward_fn) {
            node->ensure_grad();
            node->backward_fn(*node);
        }
    }
    for (Node* node : order) {
        node->backward_fn = nullptr;
        node->parents.clear();
    }
}

}  // namespace hinas
