#pragma once

// Single-sample convolution kernels over raw row-major buffers. Batched
// autodiff ops in ops.hpp loop these over the leading batch axis.

#include <Eigen/Core>

#include <type_traits>

#include "windcast/tensor.hpp"

namespace windcast::kernels {

enum class Padding { valid, same };

inline Index conv_out_extent(Index in, Index k, Padding p) { return p == Padding::same ? in : in - k + 1; }
inline Index same_pad_before(Index k) { return (k - 1) / 2; }

struct Geometry2d {
    Index channels, height, width, k;
    Padding padding;

    Index pad() const { return padding == Padding::same ? same_pad_before(k) : 0; }
    Index out_h() const { return conv_out_extent(height, k, padding); }
    Index out_w() const { return conv_out_extent(width, k, padding); }
    Index patch() const { return channels * k * k; }
};

/// Unfolds (C,H,W) into a (C·k·k, H'·W') matrix of receptive fields.
template <typename Scalar>
void im2col(const Scalar* x, const Geometry2d& g, std::type_identity_t<Eigen::Ref<RowMatrix<Scalar>>> cols)
{
    const Index oh = g.out_h(), ow = g.out_w(), pad = g.pad();
    for (Index c = 0; c < g.channels; ++c)
        for (Index ki = 0; ki < g.k; ++ki)
            for (Index kj = 0; kj < g.k; ++kj) {
                const Index row = (c * g.k + ki) * g.k + kj;
                for (Index i = 0; i < oh; ++i) {
                    const Index y = i + ki - pad;
                    for (Index j = 0; j < ow; ++j) {
                        const Index xx = j + kj - pad;
                        const bool inside = y >= 0 && y < g.height && xx >= 0 && xx < g.width;
                        cols(row, i * ow + j) = inside ? x[(c * g.height + y) * g.width + xx] : Scalar(0);
                    }
                }
            }
}

/// Adjoint of im2col: accumulates receptive-field gradients back into dx.
template <typename Scalar>
void col2im_add(const std::type_identity_t<Eigen::Ref<const RowMatrix<Scalar>>>& cols, const Geometry2d& g, Scalar* dx)
{
    const Index oh = g.out_h(), ow = g.out_w(), pad = g.pad();
    for (Index c = 0; c < g.channels; ++c)
        for (Index ki = 0; ki < g.k; ++ki)
            for (Index kj = 0; kj < g.k; ++kj) {
                const Index row = (c * g.k + ki) * g.k + kj;
                for (Index i = 0; i < oh; ++i) {
                    const Index y = i + ki - pad;
                    if (y < 0 || y >= g.height) continue;
                    for (Index j = 0; j < ow; ++j) {
                        const Index xx = j + kj - pad;
                        if (xx < 0 || xx >= g.width) continue;
                        dx[(c * g.height + y) * g.width + xx] += cols(row, i * ow + j);
                    }
                }
            }
}

struct Geometry3d {
    Index channels, depth, height, width, k;

    Index out_d() const { return depth - k + 1; }
    Index out_h() const { return height - k + 1; }
    Index out_w() const { return width - k + 1; }
    Index out_size() const { return out_d() * out_h() * out_w(); }
    Index patch() const { return channels * k * k * k; }
};

/// Valid-padding 3D unfold: (C,D,H,W) into (C·k³, D'·H'·W').
template <typename Scalar>
void im2col3d(const Scalar* x, const Geometry3d& g, std::type_identity_t<Eigen::Ref<RowMatrix<Scalar>>> cols)
{
    const Index od = g.out_d(), oh = g.out_h(), ow = g.out_w();
    Index row = 0;
    for (Index c = 0; c < g.channels; ++c)
        for (Index kd = 0; kd < g.k; ++kd)
            for (Index ki = 0; ki < g.k; ++ki)
                for (Index kj = 0; kj < g.k; ++kj, ++row) {
                    Index col = 0;
                    for (Index d = 0; d < od; ++d)
                        for (Index i = 0; i < oh; ++i)
                            for (Index j = 0; j < ow; ++j, ++col)
                                cols(row, col) = x[((c * g.depth + d + kd) * g.height + i + ki) * g.width + j + kj];
                }
}

template <typename Scalar>
void col2im3d_add(const std::type_identity_t<Eigen::Ref<const RowMatrix<Scalar>>>& cols, const Geometry3d& g, Scalar* dx)
{
    const Index od = g.out_d(), oh = g.out_h(), ow = g.out_w();
    Index row = 0;
    for (Index c = 0; c < g.channels; ++c)
        for (Index kd = 0; kd < g.k; ++kd)
            for (Index ki = 0; ki < g.k; ++ki)
                for (Index kj = 0; kj < g.k; ++kj, ++row) {
                    Index col = 0;
                    for (Index d = 0; d < od; ++d)
                        for (Index i = 0; i < oh; ++i)
                            for (Index j = 0; j < ow; ++j, ++col)
                                dx[((c * g.depth + d + kd) * g.height + i + ki) * g.width + j + kj] += cols(row, col);
                }
}

/// Per-channel spatial cross-correlation: out[c] = x[c] ⋆ w[c].
template <typename Scalar>
void depthwise(const Scalar* x, const Scalar* w, const Geometry2d& g, Scalar* out)
{
    const Index oh = g.out_h(), ow = g.out_w(), pad = g.pad();
    for (Index c = 0; c < g.channels; ++c) {
        const Scalar* xc = x + c * g.height * g.width;
        const Scalar* wc = w + c * g.k * g.k;
        Scalar* oc = out + c * oh * ow;
        for (Index i = 0; i < oh; ++i)
            for (Index j = 0; j < ow; ++j) {
                Scalar acc(0);
                for (Index ki = 0; ki < g.k; ++ki) {
                    const Index y = i + ki - pad;
                    if (y < 0 || y >= g.height) continue;
                    for (Index kj = 0; kj < g.k; ++kj) {
                        const Index xx = j + kj - pad;
                        if (xx < 0 || xx >= g.width) continue;
                        acc += xc[y * g.width + xx] * wc[ki * g.k + kj];
                    }
                }
                oc[i * ow + j] = acc;
            }
    }
}

/// Gradients of depthwise(); either output pointer may be null.
template <typename Scalar>
void depthwise_backward(const Scalar* x, const Scalar* w, const Scalar* dout, const Geometry2d& g, Scalar* dx,
                        Scalar* dw)
{
    const Index oh = g.out_h(), ow = g.out_w(), pad = g.pad();
    for (Index c = 0; c < g.channels; ++c) {
        const Index xo = c * g.height * g.width, wo = c * g.k * g.k, oo = c * oh * ow;
        for (Index i = 0; i < oh; ++i)
            for (Index j = 0; j < ow; ++j) {
                const Scalar go = dout[oo + i * ow + j];
                for (Index ki = 0; ki < g.k; ++ki) {
                    const Index y = i + ki - pad;
                    if (y < 0 || y >= g.height) continue;
                    for (Index kj = 0; kj < g.k; ++kj) {
                        const Index xx = j + kj - pad;
                        if (xx < 0 || xx >= g.width) continue;
                        if (dx) dx[xo + y * g.width + xx] += go * w[wo + ki * g.k + kj];
                        if (dw) dw[wo + ki * g.k + kj] += go * x[xo + y * g.width + xx];
                    }
                }
            }
    }
}

} // namespace windcast::kernels
