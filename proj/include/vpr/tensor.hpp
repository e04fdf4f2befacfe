#pragma once

#include <algorithm>
#include <functional>
#include <memory>
#include <unordered_set>
#include <utility>
#include <vector>

#include "vpr/common.hpp"
#include "vpr/rng.hpp"

namespace vpr {

namespace detail {

template <typename T>
struct Node {
    Shape shape;
    std::vector<T> value;
    std::vector<T> grad;  // allocated lazily, same length as value
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    // Reads this->grad and accumulates into parents' grads. Owned by the
    // node, so captured raw pointers stay valid while the node lives.
    std::function<void()> backward;

    void ensure_grad() {
        if (grad.size() != value.size()) grad.assign(value.size(), T(0));
    }
};

}  // namespace detail

// Shared handle to a value in the recorded operation graph. The graph is
// rebuilt on every forward pass; backward() walks it once in reverse
// topological order. Non-finite results are rejected at op construction.
template <typename T>
class Tensor {
public:
    using Node = detail::Node<T>;

    Tensor() = default;
    explicit Tensor(std::shared_ptr<Node> n) : node_(std::move(n)) {}

    static Tensor zeros(Shape shape, bool requires_grad = false) {
        return filled(std::move(shape), T(0), requires_grad);
    }

    static Tensor filled(Shape shape, T v, bool requires_grad = false) {
        auto n = std::make_shared<Node>();
        n->value.assign(static_cast<std::size_t>(numel(shape)), v);
        n->shape = std::move(shape);
        n->requires_grad = requires_grad;
        return Tensor(std::move(n));
    }

    static Tensor from_data(Shape shape, std::vector<T> data,
                            bool requires_grad = false) {
        if (numel(shape) != static_cast<index_t>(data.size())) {
            throw dimension_error("tensor: data length " +
                                  std::to_string(data.size()) +
                                  " does not match shape " + shape_str(shape));
        }
        auto n = std::make_shared<Node>();
        n->shape = std::move(shape);
        n->value = std::move(data);
        n->requires_grad = requires_grad;
        return Tensor(std::move(n));
    }

    static Tensor randn(Shape shape, RngState& rng, double stddev = 1.0,
                        bool requires_grad = false) {
        auto n = std::make_shared<Node>();
        n->value.resize(static_cast<std::size_t>(numel(shape)));
        for (auto& v : n->value) v = static_cast<T>(rng.normal(0.0, stddev));
        n->shape = std::move(shape);
        n->requires_grad = requires_grad;
        return Tensor(std::move(n));
    }

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    index_t size() const { return static_cast<index_t>(node_->value.size()); }
    index_t dim(int i) const {
        int nd = static_cast<int>(node_->shape.size());
        return node_->shape[static_cast<std::size_t>(i < 0 ? nd + i : i)];
    }
    int ndim() const { return static_cast<int>(node_->shape.size()); }

    std::vector<T>& data() { return node_->value; }
    const std::vector<T>& data() const { return node_->value; }
    std::vector<T>& grad() {
        node_->ensure_grad();
        return node_->grad;
    }
    const std::vector<T>& grad_view() const { return node_->grad; }
    bool requires_grad() const { return node_->requires_grad; }
    void set_requires_grad(bool b) { node_->requires_grad = b; }

    T item() const {
        if (node_->value.size() != 1) {
            throw dimension_error("item(): tensor has " +
                                  std::to_string(node_->value.size()) +
                                  " elements, expected 1");
        }
        return node_->value[0];
    }

    std::shared_ptr<Node> node() const { return node_; }
    Node* raw() const { return node_.get(); }

    void zero_grad() {
        node_->grad.assign(node_->value.size(), T(0));
    }

    // Reverse-mode sweep from a scalar root.
    void backward() {
        if (node_->value.size() != 1) {
            throw dimension_error("backward(): root must be a scalar, got " +
                                  shape_str(node_->shape));
        }
        std::vector<Node*> order;
        std::unordered_set<Node*> seen;
        topo(node_.get(), seen, order);
        node_->ensure_grad();
        node_->grad[0] = T(1);
        for (auto it = order.rbegin(); it != order.rend(); ++it) {
            Node* n = *it;
            if (n->backward && n->requires_grad) n->backward();
        }
    }

private:
    static void topo(Node* n, std::unordered_set<Node*>& seen,
                     std::vector<Node*>& order) {
        // Iterative DFS; graphs can be deep at full model scale.
        std::vector<std::pair<Node*, std::size_t>> stack;
        if (seen.insert(n).second) stack.emplace_back(n, 0);
        while (!stack.empty()) {
            auto& [cur, next_child] = stack.back();
            if (next_child < cur->parents.size()) {
                Node* p = cur->parents[next_child++].get();
                if (seen.insert(p).second) stack.emplace_back(p, 0);
            } else {
                order.push_back(cur);
                stack.pop_back();
            }
        }
    }

    std::shared_ptr<Node> node_;
};

namespace detail {

// Shared glue for op construction.
template <typename T>
std::shared_ptr<Node<T>> make_result(Shape shape,
                                     std::vector<T> value,
                                     std::vector<std::shared_ptr<Node<T>>> parents,
                                     const char* op_name) {
    check_finite(value, op_name);
    auto n = std::make_shared<Node<T>>();
    n->shape = std::move(shape);
    n->value = std::move(value);
    n->parents = std::move(parents);
    for (const auto& p : n->parents) {
        if (p->requires_grad) {
            n->requires_grad = true;
            break;
        }
    }
    return n;
}

}  // namespace detail

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

}  // namespace vpr
