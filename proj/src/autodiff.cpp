#include "windcast/autodiff.hpp"

#include <unordered_set>

namespace windcast {

namespace {

void require_same_shape(const Var& a, const Var& b, const char* op)
{
    if (a.shape() != b.shape())
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
}

Node& parent(Node& n, std::size_t i) { return *n.parents[i]; }

} // namespace

Var::Var(Tensor value, bool requires_grad) : node_(std::make_shared<Node>())
{
    node_->value = std::move(value);
    node_->requires_grad = requires_grad;
}

Var Var::record(Tensor value, std::vector<Var> parents, std::function<void(Node&)> backward)
{
    Var out(std::move(value), false);
    for (auto& p : parents) {
        out.node_->requires_grad = out.node_->requires_grad || p.requires_grad();
        out.node_->parents.push_back(p.node_);
    }
    if (out.node_->requires_grad) out.node_->backward_fn = std::move(backward);
    return out;
}

void backward(const Var& loss)
{
    if (loss.value().size() != 1)
        throw InvalidArgument("backward: loss must be a scalar, got shape " + shape_string(loss.shape()));
    if (!loss.requires_grad()) return;

    // Iterative post-order DFS gives a topological order.
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, std::size_t>> stack{{loss.node().get(), 0}};
    visited.insert(loss.node().get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node* p = node->parents[next++].get();
            if (p->requires_grad && visited.insert(p).second) stack.emplace_back(p, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    loss.node()->grad_buffer()[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backward_fn && n->grad.shape() == n->value.shape()) n->backward_fn(*n);
    }
}

Var permute(const Var& x, std::span<const Index> axes)
{
    std::vector<Index> ax(axes.begin(), axes.end());
    Tensor out = permute(x.value(), axes);
    return Var::record(std::move(out), {x}, [ax](Node& n) {
        Node& p = parent(n, 0);
        if (!p.requires_grad) return;
        const auto inv = inverse_permutation(ax);
        p.grad_buffer().flat() += permute(n.grad, std::span<const Index>(inv)).flat();
    });
}

Var permute(const Var& x, std::initializer_list<Index> axes)
{
    return permute(x, std::span<const Index>(axes.begin(), axes.size()));
}

Var reshape(const Var& x, Shape shape)
{
    Tensor out = x.value().reshaped(std::move(shape));
    return Var::record(std::move(out), {x}, [](Node& n) {
        Node& p = parent(n, 0);
        if (p.requires_grad) p.grad_buffer().flat() += n.grad.flat();
    });
}

Var flatten(const Var& x) { return reshape(x, Shape{x.value().size()}); }

Var flatten_batch(const Var& x)
{
    const Index b = x.dim(0);
    return reshape(x, Shape{b, x.value().size() / b});
}

Var concat(std::span<const Var> xs, Index axis)
{
    std::vector<Tensor> values;
    values.reserve(xs.size());
    for (const auto& x : xs) values.push_back(x.value());
    Tensor out = concat(std::span<const Tensor>(values), axis);

    const Shape out_shape = out.shape();
    std::vector<Index> extents;
    for (const auto& x : xs) extents.push_back(x.dim(axis));
    return Var::record(std::move(out), std::vector<Var>(xs.begin(), xs.end()),
                       [axis, extents, out_shape](Node& n) {
                           Index outer = 1, inner = 1;
                           for (Index d = 0; d < axis; ++d) outer *= out_shape[static_cast<std::size_t>(d)];
                           for (Index d = axis + 1; d < static_cast<Index>(out_shape.size()); ++d)
                               inner *= out_shape[static_cast<std::size_t>(d)];
                           const Index out_block = out_shape[static_cast<std::size_t>(axis)] * inner;
                           Index col = 0;
                           for (std::size_t i = 0; i < extents.size(); ++i) {
                               const Index block = extents[i] * inner;
                               Node& p = parent(n, i);
                               if (p.requires_grad) {
                                   Tensor& g = p.grad_buffer();
                                   for (Index o = 0; o < outer; ++o)
                                       for (Index e = 0; e < block; ++e)
                                           g[o * block + e] += n.grad[o * out_block + col + e];
                               }
                               col += block;
                           }
                       });
}

Var concat(std::initializer_list<Var> xs, Index axis)
{
    return concat(std::span<const Var>(xs.begin(), xs.size()), axis);
}

Var matmul(const Var& a, const Var& b)
{
    if (a.value().rank() != 2 || b.value().rank() != 2) throw ShapeError("matmul: operands must be rank 2");
    const Index m = a.dim(0), k = a.dim(1), n = b.dim(1);
    if (b.dim(0) != k)
        throw ShapeError("matmul: inner dimension mismatch " + shape_string(a.shape()) + " x " +
                         shape_string(b.shape()));
    Tensor out(Shape{m, n});
    out.matrix(m, n).noalias() = a.value().matrix(m, k) * b.value().matrix(k, n);
    return Var::record(std::move(out), {a, b}, [m, k, n](Node& node) {
        const auto dc = node.grad.matrix(m, n);
        Node& pa = parent(node, 0);
        Node& pb = parent(node, 1);
        if (pa.requires_grad) pa.grad_buffer().matrix(m, k).noalias() += dc * pb.value.matrix(k, n).transpose();
        if (pb.requires_grad) pb.grad_buffer().matrix(k, n).noalias() += pa.value.matrix(m, k).transpose() * dc;
    });
}

Var add(const Var& a, const Var& b)
{
    require_same_shape(a, b, "add");
    Tensor out(a.shape());
    out.flat() = a.value().flat() + b.value().flat();
    return Var::record(std::move(out), {a, b}, [](Node& n) {
        for (std::size_t i = 0; i < 2; ++i)
            if (parent(n, i).requires_grad) parent(n, i).grad_buffer().flat() += n.grad.flat();
    });
}

Var sub(const Var& a, const Var& b)
{
    require_same_shape(a, b, "sub");
    Tensor out(a.shape());
    out.flat() = a.value().flat() - b.value().flat();
    return Var::record(std::move(out), {a, b}, [](Node& n) {
        if (parent(n, 0).requires_grad) parent(n, 0).grad_buffer().flat() += n.grad.flat();
        if (parent(n, 1).requires_grad) parent(n, 1).grad_buffer().flat() -= n.grad.flat();
    });
}

Var mul(const Var& a, const Var& b)
{
    require_same_shape(a, b, "mul");
    Tensor out(a.shape());
    out.flat() = a.value().flat().cwiseProduct(b.value().flat());
    return Var::record(std::move(out), {a, b}, [](Node& n) {
        Node& pa = parent(n, 0);
        Node& pb = parent(n, 1);
        if (pa.requires_grad) pa.grad_buffer().flat() += n.grad.flat().cwiseProduct(pb.value.flat());
        if (pb.requires_grad) pb.grad_buffer().flat() += n.grad.flat().cwiseProduct(pa.value.flat());
    });
}

Var relu(const Var& x)
{
    Tensor out(x.shape());
    out.flat() = x.value().flat().cwiseMax(0.0);
    return Var::record(std::move(out), {x}, [](Node& n) {
        Node& p = parent(n, 0);
        if (!p.requires_grad) return;
        Tensor& g = p.grad_buffer();
        for (Index i = 0; i < g.size(); ++i)
            if (p.value[i] > 0.0) g[i] += n.grad[i];
    });
}

Var scale(const Var& x, double factor)
{
    Tensor out(x.shape());
    out.flat() = x.value().flat() * factor;
    return Var::record(std::move(out), {x}, [factor](Node& n) {
        Node& p = parent(n, 0);
        if (p.requires_grad) p.grad_buffer().flat() += n.grad.flat() * factor;
    });
}

Var div(const Var& x, double divisor)
{
    if (divisor == 0.0) throw InvalidArgument("div: division by zero");
    return scale(x, 1.0 / divisor);
}

Var square(const Var& x) { return mul(x, x); }

Var sum(const Var& x)
{
    Tensor out = Tensor::scalar(x.value().flat().sum());
    return Var::record(std::move(out), {x}, [](Node& n) {
        Node& p = parent(n, 0);
        if (p.requires_grad) p.grad_buffer().flat().array() += n.grad[0];
    });
}

Var mean(const Var& x) { return scale(sum(x), 1.0 / static_cast<double>(x.value().size())); }

} // namespace windcast
