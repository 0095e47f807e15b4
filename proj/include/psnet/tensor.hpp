#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

namespace psnet {

// Dense rank-<=4 tensor that doubles as a node of the reverse-mode
// differentiation graph. Each operation that produces a tensor records its
// inputs and a closure computing input gradients from the output gradient;
// Tensor::backward replays those closures in reverse topological order.
//
// The graph is recorded only while GradMode is enabled and only along chains
// that reach a tensor with requires_grad set. backward() consumes the graph.
//
// Scalar type is a template parameter: the model trains in float and the
// finite-difference checks rerun the same graph in double.

template <class S>
struct TensorT;

template <class S>
using TensorPtrT = std::shared_ptr<TensorT<S>>;

struct GradMode {
    static bool& flag() {
        thread_local bool enabled = true;
        return enabled;
    }
    static bool enabled() { return flag(); }
};

// Disables graph recording for the lifetime of the guard (evaluation paths).
struct NoGradGuard {
    bool prev;
    NoGradGuard() : prev(GradMode::flag()) { GradMode::flag() = false; }
    ~NoGradGuard() { GradMode::flag() = prev; }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;
};

inline std::int64_t shape_numel(const std::vector<std::int64_t>& shape) {
    std::int64_t n = 1;
    for (std::int64_t d : shape) {
        n *= d;
    }
    return n;
}

inline std::string shape_str(const std::vector<std::int64_t>& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        s += (i ? "," : "") + std::to_string(shape[i]);
    }
    return s + "]";
}

template <class S>
struct TensorT : std::enable_shared_from_this<TensorT<S>> {
    std::vector<std::int64_t> shape;
    std::vector<S> data;
    bool requires_grad = false;
    std::vector<S> grad;  // allocated on first accumulation

    // Recorded producing operation; empty for leaves.
    std::vector<TensorPtrT<S>> parents;
    std::function<void()> backward_fn;

    static void check_shape(const std::vector<std::int64_t>& shape) {
        if (shape.empty() || shape.size() > 4) {
            throw std::invalid_argument("tensor rank must be 1..4, got " + std::to_string(shape.size()));
        }
        for (std::int64_t dim : shape) {
            if (dim <= 0) {
                throw std::invalid_argument("tensor dimensions must be positive, got " + shape_str(shape));
            }
        }
    }

    TensorT(std::vector<std::int64_t> s, std::vector<S> d, bool req)
        : shape(std::move(s)), data(std::move(d)), requires_grad(req) {
        check_shape(shape);
        if (static_cast<std::int64_t>(data.size()) != shape_numel(shape)) {
            throw std::invalid_argument("data size does not match shape " + shape_str(shape));
        }
    }

    TensorT(const TensorT&) = delete;
    TensorT& operator=(const TensorT&) = delete;

    std::int64_t numel() const { return static_cast<std::int64_t>(data.size()); }

    static TensorPtrT<S> create(std::vector<std::int64_t> shape, std::vector<S> data, bool requires_grad = false) {
        return std::make_shared<TensorT<S>>(std::move(shape), std::move(data), requires_grad);
    }

    static TensorPtrT<S> zeros(std::vector<std::int64_t> shape, bool requires_grad = false) {
        check_shape(shape);
        std::vector<S> d(static_cast<std::size_t>(shape_numel(shape)), S(0));
        return create(std::move(shape), std::move(d), requires_grad);
    }

    static TensorPtrT<S> full(std::vector<std::int64_t> shape, S value, bool requires_grad = false) {
        check_shape(shape);
        std::vector<S> d(static_cast<std::size_t>(shape_numel(shape)), value);
        return create(std::move(shape), std::move(d), requires_grad);
    }

    static TensorPtrT<S> scalar(S value, bool requires_grad = false) {
        return create({1}, std::vector<S>{value}, requires_grad);
    }

    S item() const {
        if (numel() != 1) {
            throw std::runtime_error("item() requires a single-element tensor");
        }
        return data[0];
    }

    void ensure_grad() {
        if (grad.size() != data.size()) {
            grad.assign(data.size(), S(0));
        }
    }

    void zero_grad() {
        if (!grad.empty()) {
            std::fill(grad.begin(), grad.end(), S(0));
        }
    }

    void accumulate_grad(const std::vector<S>& g) {
        if (g.size() != data.size()) {
            throw std::runtime_error("gradient size mismatch");
        }
        ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) {
            grad[i] += g[i];
        }
    }

    // Reverse-mode sweep from a scalar. Every tensor reachable through the
    // recorded operations receives d(this)/d(tensor) in its grad buffer,
    // added on top of whatever was there (so callers zero_grad between
    // steps). The recorded graph is released afterwards.
    void backward() {
        if (numel() != 1) {
            throw std::runtime_error("backward() requires a scalar loss, got shape " + shape_str(shape));
        }
        if (!requires_grad) {
            throw std::runtime_error("backward() on a tensor that does not require gradients");
        }

        // Iterative post-order topological sort over parents.
        std::vector<TensorT*> topo;
        std::unordered_set<TensorT*> visited;
        std::vector<std::pair<TensorT*, std::size_t>> stack;
        stack.emplace_back(this, 0);
        visited.insert(this);
        while (!stack.empty()) {
            auto& [node, next] = stack.back();
            if (next < node->parents.size()) {
                TensorT* p = node->parents[next].get();
                ++next;
                if (p && visited.insert(p).second) {
                    stack.emplace_back(p, 0);
                }
            } else {
                topo.push_back(node);
                stack.pop_back();
            }
        }

        ensure_grad();
        grad[0] += S(1);
        for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
            if ((*it)->backward_fn) {
                (*it)->backward_fn();
            }
        }
        // Consume the tape: drop closures and graph edges.
        for (TensorT* node : topo) {
            node->backward_fn = nullptr;
            node->parents.clear();
        }
    }
};

using Tensor = TensorT<float>;
using TensorPtr = TensorPtrT<float>;

// Marks `out` as produced from `inputs` with the given backward closure.
// Recording is skipped when gradients are globally disabled or no input
// requires them; in that case `out` stays a plain leaf.
template <class S, class F>
void record_op(const TensorPtrT<S>& out, std::vector<TensorPtrT<S>> inputs, F&& backward) {
    if (!GradMode::enabled()) {
        return;
    }
    bool any = false;
    for (const auto& t : inputs) {
        if (t && t->requires_grad) {
            any = true;
            break;
        }
    }
    if (!any) {
        return;
    }
    out->requires_grad = true;
    out->parents = std::move(inputs);
    out->backward_fn = std::forward<F>(backward);
}

}  // namespace psnet
