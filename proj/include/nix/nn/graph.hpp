#pragma once

#include <functional>
#include <memory>
#include <unordered_set>
#include <vector>

#include "nix/common.hpp"
#include "nix/tensor.hpp"

namespace nix::nn {

struct Node;
using NodeRef = std::shared_ptr<Node>;

/// One value in the computation graph. Ops allocate fresh nodes per forward
/// pass; parameters are long-lived leaves whose gradients accumulate across
/// backward calls until the optimizer clears them.
struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    std::vector<NodeRef> parents;
    std::function<void(Node&)> backward_fn;

    void ensure_grad() {
        if (grad.size() != value.size()) grad = Tensor(value.shape());
    }
};

inline NodeRef make_leaf(Tensor value, bool requires_grad = false) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->requires_grad = requires_grad;
    if (requires_grad) n->ensure_grad();
    return n;
}

inline NodeRef make_op(Tensor value, std::vector<NodeRef> parents,
                       std::function<void(Node&)> backward_fn) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->parents = std::move(parents);
    for (const auto& p : n->parents)
        if (p->requires_grad) n->requires_grad = true;
    if (n->requires_grad) n->backward_fn = std::move(backward_fn);
    return n;
}

/// Reverse-mode sweep from a scalar loss node.
inline void backward(const NodeRef& loss) {
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    // Iterative post-order DFS; graphs are deep enough that recursion is unsafe.
    std::vector<std::pair<Node*, std::size_t>> stack{{loss.get(), 0}};
    seen.insert(loss.get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node* p = node->parents[next++].get();
            if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    for (Node* n : order) n->ensure_grad();
    loss->grad.fill(real(0));
    loss->grad[0] = real(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it)
        if ((*it)->backward_fn) (*it)->backward_fn(**it);
}

}  // namespace nix::nn
