#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <unordered_set>
#include <vector>

#include "rfml/common.hpp"
#include "rfml/rng.hpp"

namespace rfml::nn {

template <class T>
struct Tensor;
template <class T>
using Ptr = std::shared_ptr<Tensor<T>>;

// Reverse-mode autodiff node. Leaves are parameters or data; interior nodes
// carry a closure that routes the output gradient to the parents. The graph
// is built eagerly by the op functions and torn down when the root releases
// its parent chain.
template <class T>
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<T> v;
    std::vector<T> g;  // allocated on first accumulation
    bool requires_grad = false;
    bool frozen = false;
    std::vector<Ptr<T>> parents;
    std::function<void(Tensor&)> backprop;

    std::size_t size() const { return v.size(); }
    std::size_t rank() const { return shape.size(); }
    std::size_t dim(std::size_t i) const { return shape.at(i); }

    void ensure_grad() {
        if (g.size() != v.size()) g.assign(v.size(), T(0));
    }
    void zero_grad() { g.assign(v.size(), T(0)); }

    T& at(std::size_t r, std::size_t c) { return v[r * shape.back() + c]; }
    const T& at(std::size_t r, std::size_t c) const { return v[r * shape.back() + c]; }
};

inline std::size_t numel(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

// Gradient recording switch (thread-local). Ops skip graph construction while
// disabled, which keeps pure-inference paths allocation-light.
inline bool& grad_mode() {
    thread_local bool enabled = true;
    return enabled;
}

struct NoGradGuard {
    bool prev;
    NoGradGuard() : prev(grad_mode()) { grad_mode() = false; }
    ~NoGradGuard() { grad_mode() = prev; }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;
};

template <class T>
Ptr<T> make_tensor(std::vector<std::size_t> shape, T fill = T(0)) {
    auto t = std::make_shared<Tensor<T>>();
    t->v.assign(numel(shape), fill);
    t->shape = std::move(shape);
    return t;
}

template <class T>
Ptr<T> make_tensor(std::vector<std::size_t> shape, std::vector<T> values) {
    if (numel(shape) != values.size()) throw ShapeMismatch("make_tensor: values do not fit shape");
    auto t = std::make_shared<Tensor<T>>();
    t->shape = std::move(shape);
    t->v = std::move(values);
    return t;
}

// Trainable leaf with N(0, stddev) init from its own derived stream.
template <class T>
Ptr<T> make_param(std::vector<std::size_t> shape, Rng& rng, double stddev) {
    auto t = make_tensor<T>(std::move(shape));
    for (auto& x : t->v) x = static_cast<T>(rng.normal() * stddev);
    t->requires_grad = true;
    return t;
}

template <class T>
Ptr<T> make_param_const(std::vector<std::size_t> shape, T fill) {
    auto t = make_tensor<T>(std::move(shape), fill);
    t->requires_grad = true;
    return t;
}

template <class T>
void freeze(const Ptr<T>& t) {
    t->frozen = true;
    t->requires_grad = false;  // gradient accumulation is skipped entirely
}

// Shared constructor for op outputs. Graph edges are recorded only when grad
// mode is on and some parent participates in differentiation.
template <class T>
Ptr<T> make_op(std::vector<std::size_t> shape, std::vector<Ptr<T>> parents,
               std::function<void(Tensor<T>&)> bp) {
    auto out = make_tensor<T>(std::move(shape));
    if (grad_mode()) {
        for (const auto& p : parents) {
            if (p && p->requires_grad) {
                out->requires_grad = true;
                break;
            }
        }
        if (out->requires_grad) {
            out->parents = std::move(parents);
            out->backprop = std::move(bp);
        }
    }
    return out;
}

// Runs reverse-mode accumulation from a scalar root.
template <class T>
void backward(const Ptr<T>& root) {
    if (root->size() != 1) throw InvalidArgument("backward: root must be scalar");
    if (!root->requires_grad) return;

    std::vector<Tensor<T>*> order;
    std::unordered_set<Tensor<T>*> seen;
    std::vector<std::pair<Tensor<T>*, std::size_t>> stack;
    stack.emplace_back(root.get(), 0);
    seen.insert(root.get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Tensor<T>* p = node->parents[next++].get();
            if (p && p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    // Pre-size every participating gradient so closures can accumulate into
    // parents without touching unallocated storage. Leaf grads persist across
    // calls (accumulation semantics); callers zero them between steps.
    for (Tensor<T>* node : order) node->ensure_grad();
    root->g[0] = T(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Tensor<T>* node = *it;
        if (node->backprop) node->backprop(*node);
    }
}

}  // namespace rfml::nn
