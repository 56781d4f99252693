#pragma once

#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "windcast/tensor.hpp"

namespace windcast {

/// One recorded value in a computation graph. Leaves with requires_grad are
/// trainable parameters; interior nodes live only as long as the Vars that
/// reference them, so a graph is discarded with its forward pass.
struct Node {
    Tensor value;
    Tensor grad;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward_fn;
    bool requires_grad = false;

    /// Gradient buffer, zero-initialized on first use.
    Tensor& grad_buffer()
    {
        if (grad.shape() != value.shape()) grad = Tensor::zeros(value.shape());
        return grad;
    }
};

class Var {
public:
    Var() = default;
    explicit Var(Tensor value, bool requires_grad = false);

    static Var constant(Tensor value) { return Var(std::move(value), false); }
    static Var parameter(Tensor value) { return Var(std::move(value), true); }

    const Tensor& value() const { return node_->value; }
    /// Mutable access for optimizers and weight loading.
    Tensor& mutable_value() { return node_->value; }
    const Tensor& grad() const { return node_->grad; }
    bool has_grad() const { return node_->grad.shape() == node_->value.shape(); }
    const Shape& shape() const { return node_->value.shape(); }
    Index dim(Index axis) const { return node_->value.dim(axis); }
    bool requires_grad() const { return node_->requires_grad; }
    void zero_grad() { node_->grad = Tensor(); }

    const std::shared_ptr<Node>& node() const { return node_; }
    explicit operator bool() const { return static_cast<bool>(node_); }

    /// Records a derived node. backward receives the node itself and must
    /// accumulate into parents that require gradients.
    static Var record(Tensor value, std::vector<Var> parents, std::function<void(Node&)> backward);

private:
    std::shared_ptr<Node> node_;
};

/// Accumulates d(loss)/d(node) into every reachable node requiring gradients.
/// Parameters not reachable from loss are left untouched (read them as zero).
void backward(const Var& loss);

Var permute(const Var& x, std::span<const Index> axes);
Var permute(const Var& x, std::initializer_list<Index> axes);
Var reshape(const Var& x, Shape shape);
Var flatten(const Var& x);
/// Collapses all but the leading axis: (B, ...) -> (B, rest).
Var flatten_batch(const Var& x);
Var concat(std::span<const Var> xs, Index axis);
Var concat(std::initializer_list<Var> xs, Index axis);

Var matmul(const Var& a, const Var& b);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var relu(const Var& x);
Var scale(const Var& x, double factor);
Var div(const Var& x, double divisor);
Var square(const Var& x);
Var sum(const Var& x);
Var mean(const Var& x);

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(const Var& a, const Var& b) { return mul(a, b); }
inline Var operator*(double s, const Var& x) { return scale(x, s); }
inline Var operator/(const Var& x, double s) { return div(x, s); }

} // namespace windcast
