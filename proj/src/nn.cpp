#include "windcast/nn.hpp"

#include <cmath>

namespace windcast {

namespace {

Node& parent(Node& n, std::size_t i) { return *n.parents[i]; }

void require_rank(const Var& x, Index rank, const char* op)
{
    if (x.value().rank() != rank)
        throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                         shape_string(x.shape()));
}

Index trailing_size(const Shape& s, std::size_t from)
{
    Index n = 1;
    for (std::size_t i = from; i < s.size(); ++i) n *= s[i];
    return n;
}

} // namespace

// ---- operations -----------------------------------------------------------

Var conv2d(const Var& x, const Var& weight, Padding padding)
{
    require_rank(x, 4, "conv2d");
    require_rank(weight, 4, "conv2d weight");
    const Index batch = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    const Index o = weight.dim(0), k = weight.dim(2);
    if (weight.dim(1) != c) throw ShapeError("conv2d: input has " + std::to_string(c) + " channels, kernel expects " +
                                             std::to_string(weight.dim(1)));
    if (weight.dim(3) != k) throw ShapeError("conv2d: kernel must be square");
    if (padding == Padding::valid && (h < k || w < k))
        throw ShapeError("conv2d: kernel " + std::to_string(k) + " larger than input " + shape_string(x.shape()));

    const kernels::Geometry2d g{c, h, w, k, padding};
    const Index oh = g.out_h(), ow = g.out_w(), n = oh * ow, p = g.patch();
    Tensor out(Shape{batch, o, oh, ow});
    RowMatrix<double> cols(p, n);
    const auto wm = weight.value().matrix(o, p);
    for (Index b = 0; b < batch; ++b) {
        kernels::im2col(x.value().data() + b * c * h * w, g, cols);
        out.matrix(o, n, b * o * n).noalias() = wm * cols;
    }
    return Var::record(std::move(out), {x, weight}, [g, batch, o, n, p](Node& node) {
        Node& px = parent(node, 0);
        Node& pw = parent(node, 1);
        const Index in_size = g.channels * g.height * g.width;
        RowMatrix<double> cols(p, n);
        for (Index b = 0; b < batch; ++b) {
            const auto dout = node.grad.matrix(o, n, b * o * n);
            if (pw.requires_grad) {
                kernels::im2col(px.value.data() + b * in_size, g, cols);
                pw.grad_buffer().matrix(o, p).noalias() += dout * cols.transpose();
            }
            if (px.requires_grad) {
                cols.noalias() = pw.value.matrix(o, p).transpose() * dout;
                kernels::col2im_add<double>(cols, g, px.grad_buffer().data() + b * in_size);
            }
        }
    });
}

Var depthwise_conv2d(const Var& x, const Var& weight, Padding padding)
{
    require_rank(x, 4, "depthwise_conv2d");
    require_rank(weight, 3, "depthwise_conv2d weight");
    const Index batch = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3), k = weight.dim(1);
    if (weight.dim(0) != c)
        throw ShapeError("depthwise_conv2d: input has " + std::to_string(c) + " channels, kernel has " +
                         std::to_string(weight.dim(0)));
    if (weight.dim(2) != k) throw ShapeError("depthwise_conv2d: kernel must be square");
    if (padding == Padding::valid && (h < k || w < k))
        throw ShapeError("depthwise_conv2d: kernel larger than input " + shape_string(x.shape()));

    const kernels::Geometry2d g{c, h, w, k, padding};
    const Index in_size = c * h * w, out_size = c * g.out_h() * g.out_w();
    Tensor out(Shape{batch, c, g.out_h(), g.out_w()});
    for (Index b = 0; b < batch; ++b)
        kernels::depthwise(x.value().data() + b * in_size, weight.value().data(), g, out.data() + b * out_size);
    return Var::record(std::move(out), {x, weight}, [g, batch, in_size, out_size](Node& node) {
        Node& px = parent(node, 0);
        Node& pw = parent(node, 1);
        double* dw = pw.requires_grad ? pw.grad_buffer().data() : nullptr;
        double* dx = px.requires_grad ? px.grad_buffer().data() : nullptr;
        for (Index b = 0; b < batch; ++b)
            kernels::depthwise_backward(px.value.data() + b * in_size, pw.value.data(),
                                        node.grad.data() + b * out_size, g, dx ? dx + b * in_size : nullptr, dw);
    });
}

Var pointwise_conv2d(const Var& x, const Var& weight)
{
    require_rank(x, 4, "pointwise_conv2d");
    require_rank(weight, 4, "pointwise_conv2d weight");
    const Index batch = x.dim(0), c = x.dim(1), n = x.dim(2) * x.dim(3), o = weight.dim(0);
    if (weight.dim(1) != c || weight.dim(2) != 1 || weight.dim(3) != 1)
        throw ShapeError("pointwise_conv2d: kernel " + shape_string(weight.shape()) + " does not match input " +
                         shape_string(x.shape()));
    Tensor out(Shape{batch, o, x.dim(2), x.dim(3)});
    const auto wm = weight.value().matrix(o, c);
    for (Index b = 0; b < batch; ++b) out.matrix(o, n, b * o * n).noalias() = wm * x.value().matrix(c, n, b * c * n);
    return Var::record(std::move(out), {x, weight}, [batch, c, n, o](Node& node) {
        Node& px = parent(node, 0);
        Node& pw = parent(node, 1);
        for (Index b = 0; b < batch; ++b) {
            const auto dout = node.grad.matrix(o, n, b * o * n);
            if (pw.requires_grad)
                pw.grad_buffer().matrix(o, c).noalias() += dout * px.value.matrix(c, n, b * c * n).transpose();
            if (px.requires_grad)
                px.grad_buffer().matrix(c, n, b * c * n).noalias() += pw.value.matrix(o, c).transpose() * dout;
        }
    });
}

Var conv3d(const Var& x, const Var& weight)
{
    require_rank(x, 5, "conv3d");
    require_rank(weight, 5, "conv3d weight");
    const Index batch = x.dim(0), c = x.dim(1), o = weight.dim(0), k = weight.dim(2);
    if (weight.dim(1) != c) throw ShapeError("conv3d: channel mismatch");
    if (weight.dim(3) != k || weight.dim(4) != k) throw ShapeError("conv3d: kernel must be cubic");
    if (x.dim(2) < k || x.dim(3) < k || x.dim(4) < k)
        throw ShapeError("conv3d: spatial extent smaller than kernel in " + shape_string(x.shape()));

    const kernels::Geometry3d g{c, x.dim(2), x.dim(3), x.dim(4), k};
    const Index n = g.out_size(), p = g.patch(), in_size = c * x.dim(2) * x.dim(3) * x.dim(4);
    Tensor out(Shape{batch, o, g.out_d(), g.out_h(), g.out_w()});
    RowMatrix<double> cols(p, n);
    const auto wm = weight.value().matrix(o, p);
    for (Index b = 0; b < batch; ++b) {
        kernels::im2col3d(x.value().data() + b * in_size, g, cols);
        out.matrix(o, n, b * o * n).noalias() = wm * cols;
    }
    return Var::record(std::move(out), {x, weight}, [g, batch, o, n, p, in_size](Node& node) {
        Node& px = parent(node, 0);
        Node& pw = parent(node, 1);
        RowMatrix<double> cols(p, n);
        for (Index b = 0; b < batch; ++b) {
            const auto dout = node.grad.matrix(o, n, b * o * n);
            if (pw.requires_grad) {
                kernels::im2col3d(px.value.data() + b * in_size, g, cols);
                pw.grad_buffer().matrix(o, p).noalias() += dout * cols.transpose();
            }
            if (px.requires_grad) {
                cols.noalias() = pw.value.matrix(o, p).transpose() * dout;
                kernels::col2im3d_add<double>(cols, g, px.grad_buffer().data() + b * in_size);
            }
        }
    });
}

Var conv_transpose2d(const Var& x, const Var& weight)
{
    require_rank(x, 4, "conv_transpose2d");
    require_rank(weight, 4, "conv_transpose2d weight");
    const Index batch = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3), o = weight.dim(1);
    if (weight.dim(0) != c) throw ShapeError("conv_transpose2d: channel mismatch");
    if (weight.dim(2) != 2 || weight.dim(3) != 2) throw ShapeError("conv_transpose2d: kernel must be 2x2");

    const Index n = h * w, q = o * 4, out_size = o * 4 * n;
    Tensor out(Shape{batch, o, 2 * h, 2 * w});
    RowMatrix<double> y(q, n);
    // Row r = (o, a, b) of y holds the contribution of kernel tap (a, b) for
    // output channel o; tap (a, b) of input pixel (i, j) lands at (2i+a, 2j+b).
    auto scatter = [h, w, o](const RowMatrix<double>& src, double* dst) {
        for (Index oc = 0; oc < o; ++oc)
            for (Index a = 0; a < 2; ++a)
                for (Index bb = 0; bb < 2; ++bb) {
                    const Index r = (oc * 2 + a) * 2 + bb;
                    for (Index i = 0; i < h; ++i)
                        for (Index j = 0; j < w; ++j)
                            dst[(oc * 2 * h + 2 * i + a) * 2 * w + 2 * j + bb] = src(r, i * w + j);
                }
    };
    const auto wm = weight.value().matrix(c, q);
    for (Index b = 0; b < batch; ++b) {
        y.noalias() = wm.transpose() * x.value().matrix(c, n, b * c * n);
        scatter(y, out.data() + b * out_size);
    }
    return Var::record(std::move(out), {x, weight}, [batch, c, h, w, o, n, q, out_size](Node& node) {
        Node& px = parent(node, 0);
        Node& pw = parent(node, 1);
        RowMatrix<double> dy(q, n);
        for (Index b = 0; b < batch; ++b) {
            const double* g = node.grad.data() + b * out_size;
            for (Index oc = 0; oc < o; ++oc)
                for (Index a = 0; a < 2; ++a)
                    for (Index bb = 0; bb < 2; ++bb) {
                        const Index r = (oc * 2 + a) * 2 + bb;
                        for (Index i = 0; i < h; ++i)
                            for (Index j = 0; j < w; ++j)
                                dy(r, i * w + j) = g[(oc * 2 * h + 2 * i + a) * 2 * w + 2 * j + bb];
                    }
            if (pw.requires_grad)
                pw.grad_buffer().matrix(c, q).noalias() += px.value.matrix(c, n, b * c * n) * dy.transpose();
            if (px.requires_grad)
                px.grad_buffer().matrix(c, n, b * c * n).noalias() += pw.value.matrix(c, q) * dy;
        }
    });
}

Var add_channel_bias(const Var& x, const Var& bias)
{
    if (x.value().rank() < 2) throw ShapeError("add_channel_bias: input needs a channel axis");
    const Index batch = x.dim(0), c = x.dim(1), s = trailing_size(x.shape(), 2);
    if (bias.value().rank() != 1 || bias.dim(0) != c)
        throw ShapeError("add_channel_bias: bias " + shape_string(bias.shape()) + " for " + std::to_string(c) +
                         " channels");
    Tensor out = x.value();
    for (Index b = 0; b < batch; ++b)
        out.matrix(c, s, b * c * s).colwise() += bias.value().flat();
    return Var::record(std::move(out), {x, bias}, [batch, c, s](Node& node) {
        Node& px = parent(node, 0);
        Node& pb = parent(node, 1);
        if (px.requires_grad) px.grad_buffer().flat() += node.grad.flat();
        if (pb.requires_grad)
            for (Index b = 0; b < batch; ++b)
                pb.grad_buffer().flat() += node.grad.matrix(c, s, b * c * s).rowwise().sum();
    });
}

Var linear(const Var& x, const Var& weight, const Var& bias)
{
    require_rank(x, 2, "linear");
    require_rank(weight, 2, "linear weight");
    const Index batch = x.dim(0), in = x.dim(1), out_units = weight.dim(0);
    if (weight.dim(1) != in)
        throw ShapeError("linear: input length " + std::to_string(in) + " does not match " +
                         std::to_string(weight.dim(1)) + " input units");
    if (bias.value().rank() != 1 || bias.dim(0) != out_units) throw ShapeError("linear: bias length mismatch");
    Tensor out(Shape{batch, out_units});
    auto om = out.matrix(batch, out_units);
    om.noalias() = x.value().matrix(batch, in) * weight.value().matrix(out_units, in).transpose();
    om.rowwise() += bias.value().flat().transpose();
    return Var::record(std::move(out), {x, weight, bias}, [batch, in, out_units](Node& node) {
        Node& px = parent(node, 0);
        Node& pw = parent(node, 1);
        Node& pb = parent(node, 2);
        const auto dy = node.grad.matrix(batch, out_units);
        if (px.requires_grad) px.grad_buffer().matrix(batch, in).noalias() += dy * pw.value.matrix(out_units, in);
        if (pw.requires_grad)
            pw.grad_buffer().matrix(out_units, in).noalias() += dy.transpose() * px.value.matrix(batch, in);
        if (pb.requires_grad) pb.grad_buffer().flat() += dy.colwise().sum().transpose();
    });
}

Var batch_norm(const Var& x, const Var& gamma, const Var& beta, BatchNormStats& stats, Mode mode,
               BatchNormOptions options)
{
    if (x.value().rank() < 2) throw ShapeError("batch_norm: input needs a channel axis");
    const Index batch = x.dim(0), c = x.dim(1), s = trailing_size(x.shape(), 2);
    if (gamma.value().size() != c || beta.value().size() != c) throw ShapeError("batch_norm: parameter length mismatch");
    if (stats.running_mean.size() != c || stats.running_var.size() != c)
        throw ShapeError("batch_norm: running statistics length mismatch");
    if (mode == Mode::train && batch < 2)
        throw InvalidArgument("batch_norm: training mode needs a batch of at least 2, got " + std::to_string(batch));

    const double m = static_cast<double>(batch * s);
    Eigen::VectorXd mu(c), inv_std(c);
    if (mode == Mode::train) {
        mu.setZero();
        for (Index b = 0; b < batch; ++b) mu += x.value().matrix(c, s, b * c * s).rowwise().sum();
        mu /= m;
        Eigen::VectorXd var = Eigen::VectorXd::Zero(c);
        for (Index b = 0; b < batch; ++b)
            var += (x.value().matrix(c, s, b * c * s).colwise() - mu).array().square().matrix().rowwise().sum();
        var /= m;
        inv_std = (var.array() + options.epsilon).rsqrt();
        stats.running_mean.flat() = (1.0 - options.momentum) * stats.running_mean.flat() + options.momentum * mu;
        stats.running_var.flat() = (1.0 - options.momentum) * stats.running_var.flat() + options.momentum * var;
    } else {
        mu = stats.running_mean.flat();
        inv_std = (stats.running_var.flat().array() + options.epsilon).rsqrt();
    }

    Tensor xhat(x.shape());
    Tensor out(x.shape());
    for (Index b = 0; b < batch; ++b) {
        auto xh = xhat.matrix(c, s, b * c * s);
        xh = ((x.value().matrix(c, s, b * c * s).colwise() - mu).array().colwise() * inv_std.array()).matrix();
        out.matrix(c, s, b * c * s) =
            ((xh.array().colwise() * gamma.value().flat().array()).colwise() + beta.value().flat().array()).matrix();
    }

    const bool batch_stats = mode == Mode::train;
    return Var::record(std::move(out), {x, gamma, beta},
                       [batch, c, s, m, inv_std, batch_stats, xhat = std::move(xhat)](Node& node) {
                           Node& px = parent(node, 0);
                           Node& pg = parent(node, 1);
                           Node& pb = parent(node, 2);
                           Eigen::VectorXd sum_dy = Eigen::VectorXd::Zero(c);
                           Eigen::VectorXd sum_dy_xhat = Eigen::VectorXd::Zero(c);
                           for (Index b = 0; b < batch; ++b) {
                               const auto dy = node.grad.matrix(c, s, b * c * s);
                               sum_dy += dy.rowwise().sum();
                               sum_dy_xhat += dy.cwiseProduct(xhat.matrix(c, s, b * c * s)).rowwise().sum();
                           }
                           if (pg.requires_grad) pg.grad_buffer().flat() += sum_dy_xhat;
                           if (pb.requires_grad) pb.grad_buffer().flat() += sum_dy;
                           if (!px.requires_grad) return;
                           const Eigen::ArrayXd scale = pg.value.flat().array() * inv_std.array();
                           for (Index b = 0; b < batch; ++b) {
                               const auto dy = node.grad.matrix(c, s, b * c * s);
                               auto dx = px.grad_buffer().matrix(c, s, b * c * s);
                               if (batch_stats) {
                                   const auto xh = xhat.matrix(c, s, b * c * s);
                                   const Eigen::ArrayXXd centred =
                                       (dy.array().colwise() - sum_dy.array() / m) -
                                       xh.array().colwise() * (sum_dy_xhat.array() / m);
                                   dx += (centred.colwise() * scale).matrix();
                               } else {
                                   dx += (dy.array().colwise() * scale).matrix();
                               }
                           }
                       });
}

Var attention_augment(const Var& x, const AttentionWeights& w, Tensor* attention_out)
{
    require_rank(x, 4, "attention_augment");
    const Index batch = x.dim(0), c = x.dim(1), h = x.dim(2), wd = x.dim(3), n = h * wd;
    const Index dk = w.query_w.dim(0), dv = w.value_w.dim(0);
    if (dk < 1 || dv < 1) throw ShapeError("attention_augment: key/value widths must be positive");
    if (w.query_w.dim(1) != c || w.key_w.dim(1) != c || w.value_w.dim(1) != c || w.key_w.dim(0) != dk)
        throw ShapeError("attention_augment: projection shapes do not match " + std::to_string(c) + " channels");
    if (w.query_b.value().size() != dk || w.key_b.value().size() != dk || w.value_b.value().size() != dv)
        throw ShapeError("attention_augment: projection bias length mismatch");

    const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(dk));
    const Index out_c = c + dv, out_size = out_c * n;

    struct Cache {
        RowMatrix<double> q, k, v, a;
    };
    std::vector<Cache> cache(static_cast<std::size_t>(batch));
    Tensor out(Shape{batch, out_c, h, wd});
    if (attention_out) *attention_out = Tensor(Shape{batch, n, n});

    for (Index b = 0; b < batch; ++b) {
        auto& cb = cache[static_cast<std::size_t>(b)];
        const auto xs = x.value().matrix(c, n, b * c * n).transpose(); // (n, c)
        cb.q = (xs * w.query_w.value().matrix(dk, c).transpose()).rowwise() + w.query_b.value().flat().transpose();
        cb.k = (xs * w.key_w.value().matrix(dk, c).transpose()).rowwise() + w.key_b.value().flat().transpose();
        cb.v = (xs * w.value_w.value().matrix(dv, c).transpose()).rowwise() + w.value_b.value().flat().transpose();
        RowMatrix<double> scores = cb.q * cb.k.transpose() * inv_sqrt_dk;
        cb.a = (scores.colwise() - scores.rowwise().maxCoeff()).array().exp().matrix();
        cb.a = cb.a.array().colwise() / cb.a.rowwise().sum().array();
        if (attention_out) attention_out->matrix(n, n, b * n * n) = cb.a;

        out.matrix(c, n, b * out_size) = x.value().matrix(c, n, b * c * n);
        out.matrix(dv, n, b * out_size + c * n) = (cb.a * cb.v).transpose();
    }

    return Var::record(
        std::move(out), {x, w.query_w, w.query_b, w.key_w, w.key_b, w.value_w, w.value_b},
        [batch, c, n, dk, dv, out_size, inv_sqrt_dk, cache = std::move(cache)](Node& node) {
            Node& px = parent(node, 0);
            Node* proj_w[3] = {node.parents[1].get(), node.parents[3].get(), node.parents[5].get()};
            Node* proj_b[3] = {node.parents[2].get(), node.parents[4].get(), node.parents[6].get()};
            const Index width[3] = {dk, dk, dv};
            for (Index b = 0; b < batch; ++b) {
                const auto& cb = cache[static_cast<std::size_t>(b)];
                const RowMatrix<double> d_att = node.grad.matrix(dv, n, b * out_size + c * n).transpose(); // (n, dv)
                const RowMatrix<double> d_a = d_att * cb.v.transpose();
                const RowMatrix<double> d_v = cb.a.transpose() * d_att;
                const Eigen::VectorXd row_dot = d_a.cwiseProduct(cb.a).rowwise().sum();
                const RowMatrix<double> d_s = cb.a.cwiseProduct(d_a.colwise() - row_dot) * inv_sqrt_dk;
                const RowMatrix<double> d_q = d_s * cb.k;
                const RowMatrix<double> d_k = d_s.transpose() * cb.q;
                const RowMatrix<double>* d_proj[3] = {&d_q, &d_k, &d_v};

                const auto xs = px.value.matrix(c, n, b * c * n).transpose();
                for (int i = 0; i < 3; ++i) {
                    if (proj_w[i]->requires_grad)
                        proj_w[i]->grad_buffer().matrix(width[i], c).noalias() += d_proj[i]->transpose() * xs;
                    if (proj_b[i]->requires_grad)
                        proj_b[i]->grad_buffer().flat() += d_proj[i]->colwise().sum().transpose();
                }
                if (px.requires_grad) {
                    auto dx = px.grad_buffer().matrix(c, n, b * c * n);
                    dx += node.grad.matrix(c, n, b * out_size);
                    for (int i = 0; i < 3; ++i)
                        dx.noalias() += (*d_proj[i] * proj_w[i]->value.matrix(width[i], c)).transpose();
                }
            }
        });
}

// ---- parameter bookkeeping ------------------------------------------------

void ParameterRegistry::add(std::string name, Var var)
{
    for (const auto& e : entries_)
        if (e.name == name || e.var.node() == var.node())
            throw ConfigError("parameter registered twice: " + name);
    entries_.push_back({std::move(name), std::move(var)});
}

Index ParameterRegistry::count() const
{
    Index n = 0;
    for (const auto& e : entries_) n += e.var.value().size();
    return n;
}

void ParameterRegistry::zero_grad()
{
    for (auto& e : entries_) e.var.zero_grad();
}

Tensor glorot_uniform(Shape shape, Index fan_in, Index fan_out, Rng& rng)
{
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Tensor t(std::move(shape));
    for (auto& v : t.values()) v = rng.uniform(-limit, limit);
    return t;
}

// ---- layers ---------------------------------------------------------------

Conv2dLayer::Conv2dLayer(Index in_channels, Index out_channels, Index k, Padding padding_, Rng& rng)
    : weight(Var::parameter(glorot_uniform({out_channels, in_channels, k, k}, in_channels * k * k,
                                           out_channels * k * k, rng))),
      bias(Var::parameter(Tensor::zeros({out_channels}))), padding(padding_)
{
}

Var Conv2dLayer::forward(const Var& x) const { return add_channel_bias(conv2d(x, weight, padding), bias); }

void Conv2dLayer::collect(const std::string& prefix, ParameterRegistry& registry) const
{
    registry.add(prefix + ".weight", weight);
    registry.add(prefix + ".bias", bias);
}

DepthwiseConv2dLayer::DepthwiseConv2dLayer(Index channels, Index k, Padding padding_, Rng& rng)
    : weight(Var::parameter(glorot_uniform({channels, k, k}, k * k, k * k, rng))), padding(padding_)
{
}

void DepthwiseConv2dLayer::collect(const std::string& prefix, ParameterRegistry& registry) const
{
    registry.add(prefix + ".weight", weight);
}

PointwiseConv2dLayer::PointwiseConv2dLayer(Index in_channels, Index out_channels, Rng& rng)
    : weight(Var::parameter(glorot_uniform({out_channels, in_channels, 1, 1}, in_channels, out_channels, rng)))
{
}

void PointwiseConv2dLayer::collect(const std::string& prefix, ParameterRegistry& registry) const
{
    registry.add(prefix + ".weight", weight);
}

BatchNormLayer::BatchNormLayer(Index channels, BatchNormOptions options_)
    : gamma(Var::parameter(Tensor::ones({channels}))), beta(Var::parameter(Tensor::zeros({channels}))),
      stats{Tensor::zeros({channels}), Tensor::ones({channels})}, options(options_)
{
}

Var BatchNormLayer::forward(const Var& x, Mode mode) { return batch_norm(x, gamma, beta, stats, mode, options); }

void BatchNormLayer::collect(const std::string& prefix, ParameterRegistry& registry) const
{
    registry.add(prefix + ".gamma", gamma);
    registry.add(prefix + ".beta", beta);
}

DepthwiseSeparableBlock::DepthwiseSeparableBlock(Index in_channels, Index out_channels, Index k, Rng& rng)
    : depthwise(in_channels, k, Padding::valid, rng), pointwise(in_channels, out_channels, rng), norm(out_channels)
{
}

Var DepthwiseSeparableBlock::forward(const Var& x, Mode mode)
{
    return relu(norm.forward(pointwise.forward(depthwise.forward(x)), mode));
}

void DepthwiseSeparableBlock::collect(const std::string& prefix, ParameterRegistry& registry) const
{
    depthwise.collect(prefix + ".depthwise", registry);
    pointwise.collect(prefix + ".pointwise", registry);
    norm.collect(prefix + ".norm", registry);
}

Conv3dLayer::Conv3dLayer(Index in_channels, Index out_channels, Index k, Rng& rng)
    : weight(Var::parameter(glorot_uniform({out_channels, in_channels, k, k, k}, in_channels * k * k * k,
                                           out_channels * k * k * k, rng))),
      bias(Var::parameter(Tensor::zeros({out_channels})))
{
}

void Conv3dLayer::collect(const std::string& prefix, ParameterRegistry& registry) const
{
    registry.add(prefix + ".weight", weight);
    registry.add(prefix + ".bias", bias);
}

TransposedConv2dLayer::TransposedConv2dLayer(Index in_channels, Index out_channels, Rng& rng)
    : weight(Var::parameter(glorot_uniform({in_channels, out_channels, 2, 2}, in_channels * 4, out_channels * 4, rng))),
      bias(Var::parameter(Tensor::zeros({out_channels})))
{
}

void TransposedConv2dLayer::collect(const std::string& prefix, ParameterRegistry& registry) const
{
    registry.add(prefix + ".weight", weight);
    registry.add(prefix + ".bias", bias);
}

DenseLayer::DenseLayer(Index in_units, Index out_units, Rng& rng)
    : weight(Var::parameter(glorot_uniform({out_units, in_units}, in_units, out_units, rng))),
      bias(Var::parameter(Tensor::zeros({out_units})))
{
}

void DenseLayer::collect(const std::string& prefix, ParameterRegistry& registry) const
{
    registry.add(prefix + ".weight", weight);
    registry.add(prefix + ".bias", bias);
}

AttentionAugmentation::AttentionAugmentation(Index channels, Index key_dim, Index value_dim, Rng& rng)
    : query(channels, key_dim, rng), key(channels, key_dim, rng), value(channels, value_dim, rng)
{
}

void AttentionAugmentation::collect(const std::string& prefix, ParameterRegistry& registry) const
{
    query.collect(prefix + ".query", registry);
    key.collect(prefix + ".key", registry);
    value.collect(prefix + ".value", registry);
}

} // namespace windcast
