#pragma once

#include <functional>
#include <memory>
#include <unordered_set>
#include <utility>
#include <vector>

#include "pastiche/core/tensor.hpp"

namespace pastiche::ad {

// Reverse-mode automatic differentiation over Tensors. Graphs are built
// dynamically: every op allocates a Node holding the result value plus a
// closure that routes the incoming gradient to the node's parents. Leaf
// nodes (parameters) persist across steps; interior nodes are freed when
// the last Var handle to them goes away.
struct Node {
    Tensor value;
    Tensor grad; // allocated lazily, same shape as value
    bool requires_grad = false;
    bool is_leaf = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backprop; // reads this->grad, accumulates into parents

    Tensor& ensure_grad() {
        if (grad.numel() != value.numel()) grad = Tensor::zeros(value.shape());
        return grad;
    }

    void zero_grad() {
        if (grad.numel()) std::fill(grad.vec().begin(), grad.vec().end(), 0.0);
    }
};

using Var = std::shared_ptr<Node>;

inline thread_local bool g_grad_mode = true;

// Scoped switch that disables graph construction (inference paths).
struct NoGradGuard {
    bool prev;
    NoGradGuard() : prev(g_grad_mode) { g_grad_mode = false; }
    ~NoGradGuard() { g_grad_mode = prev; }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;
};

inline Var leaf(Tensor value, bool requires_grad = true) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->requires_grad = requires_grad;
    n->is_leaf = true;
    return n;
}

inline Var constant(Tensor value) { return leaf(std::move(value), false); }

// Result node factory. Drops parents/closure when gradients cannot flow so
// inference graphs carry no history.
inline Var make_result(Tensor value, std::vector<Var> parents,
                       std::function<void(Node&)> backprop) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    bool needs = false;
    if (g_grad_mode)
        for (const auto& p : parents)
            if (p->requires_grad) { needs = true; break; }
    if (needs) {
        n->requires_grad = true;
        n->parents = std::move(parents);
        n->backprop = std::move(backprop);
    }
    return n;
}

// New node sharing the value but cut off from the graph.
inline Var detach(const Var& v) {
    auto n = std::make_shared<Node>();
    n->value = v->value;
    return n;
}

inline double scalar(const Var& v) {
    if (v->value.numel() != 1) throw ShapeError("expected scalar node");
    return v->value.at(0);
}

// Reverse sweep from a scalar root. Gradients accumulate into every
// reachable node with requires_grad set; call zero_grad on leaves between
// steps.
inline void backward(const Var& root) {
    if (root->value.numel() != 1) throw ShapeError("backward requires a scalar root");
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, size_t>> stack;
    stack.emplace_back(root.get(), 0);
    seen.insert(root.get());
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        if (idx < node->parents.size()) {
            Node* p = node->parents[idx++].get();
            if (p->requires_grad && !seen.count(p)) {
                seen.insert(p);
                stack.emplace_back(p, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    root->ensure_grad().at(0) = 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backprop && n->grad.numel()) n->backprop(*n);
    }
}

} // namespace pastiche::ad
