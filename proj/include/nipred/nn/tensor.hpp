#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "nipred/core/error.hpp"

namespace nipred::nn {

using Shape = std::vector<std::size_t>;

inline std::size_t numel(const Shape& s) {
    return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_str(const Shape& s) {
    std::string out = "(";
    for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "," : "") + std::to_string(s[i]);
    return out + ")";
}

/// Graph node. `grad` is allocated iff the node is tracked.
struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> inputs;
    std::function<void(Node&)> backward;
};

namespace detail {
inline bool& grad_enabled_flag() {
    thread_local bool enabled = true;
    return enabled;
}
}  // namespace detail

inline bool grad_enabled() { return detail::grad_enabled_flag(); }

/// Disables graph recording on this thread for its lifetime.
class NoGradGuard {
public:
    NoGradGuard() : prev_(detail::grad_enabled_flag()) { detail::grad_enabled_flag() = false; }
    ~NoGradGuard() { detail::grad_enabled_flag() = prev_; }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool prev_;
};

/// Dense float64 array with reverse-mode autodiff. Copies share the node.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

    static Tensor zeros(Shape shape, bool requires_grad = false) {
        auto n = std::make_shared<Node>();
        n->value.assign(numel(shape), 0.0);
        n->shape = std::move(shape);
        n->requires_grad = requires_grad;
        if (requires_grad) n->grad.assign(n->value.size(), 0.0);
        return Tensor(n);
    }

    static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false) {
        require(numel(shape) == values.size(), ErrorCode::ShapeMismatch,
                "data length " + std::to_string(values.size()) + " vs shape " + shape_str(shape));
        auto n = std::make_shared<Node>();
        n->shape = std::move(shape);
        n->value = std::move(values);
        n->requires_grad = requires_grad;
        if (requires_grad) n->grad.assign(n->value.size(), 0.0);
        return Tensor(n);
    }

    static Tensor scalar(double v, bool requires_grad = false) { return from({1}, {v}, requires_grad); }

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    std::size_t size() const { return node_->value.size(); }
    std::size_t rows() const {
        const auto& s = shape();
        return s.size() >= 2 ? s[0] : 1;
    }
    std::size_t cols() const {
        const auto& s = shape();
        return s.empty() ? 1 : s.back();
    }

    std::span<double> value() { return node_->value; }
    std::span<const double> value() const { return node_->value; }
    std::span<double> grad() { return node_->grad; }
    std::span<const double> grad() const { return node_->grad; }
    double item() const {
        require(size() == 1, ErrorCode::ShapeMismatch, "item() on non-scalar " + shape_str(shape()));
        return node_->value[0];
    }
    double operator()(std::size_t r, std::size_t c) const { return node_->value[r * cols() + c]; }

    bool requires_grad() const { return node_->requires_grad; }
    Node& node() const { return *node_; }
    const std::shared_ptr<Node>& ptr() const { return node_; }

    void zero_grad() {
        if (node_->requires_grad) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
    }

    /// Independent copy of the values, untracked.
    Tensor detach() const { return from(shape(), node_->value, false); }

    /// Accumulates d(this)/d(leaf) into every tracked leaf. `this` must be a scalar.
    void backward() const {
        require(size() == 1, ErrorCode::ShapeMismatch, "backward() needs a scalar");
        if (!node_->requires_grad) return;
        std::vector<Node*> order;
        std::unordered_set<Node*> seen;
        std::vector<std::pair<Node*, bool>> stack{{node_.get(), false}};
        while (!stack.empty()) {
            auto [n, expanded] = stack.back();
            stack.pop_back();
            if (expanded) {
                order.push_back(n);
                continue;
            }
            if (!seen.insert(n).second) continue;
            stack.emplace_back(n, true);
            for (const auto& in : n->inputs)
                if (in->requires_grad && !seen.count(in.get())) stack.emplace_back(in.get(), false);
        }
        node_->grad[0] += 1.0;
        for (auto it = order.rbegin(); it != order.rend(); ++it)
            if ((*it)->backward) (*it)->backward(**it);
    }

private:
    std::shared_ptr<Node> node_;
};

/// Builds the result node of an op. The backward closure and inputs are kept only
/// when recording is on and some input is tracked.
inline Tensor make_result(Shape shape, std::vector<double> value, std::vector<Tensor> inputs,
                          std::function<void(Node&)> backward) {
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->value = std::move(value);
    bool track = false;
    if (grad_enabled())
        for (const auto& t : inputs) track = track || t.requires_grad();
    if (track) {
        n->requires_grad = true;
        n->grad.assign(n->value.size(), 0.0);
        for (auto& t : inputs) n->inputs.push_back(t.ptr());
        n->backward = std::move(backward);
    }
    return Tensor(n);
}

}  // namespace nipred::nn
