#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "windcast/errors.hpp"

namespace windcast {

using Index = Eigen::Index;
using Shape = std::vector<Index>;

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline Index shape_size(const Shape& shape)
{
    return std::accumulate(shape.begin(), shape.end(), Index{1}, std::multiplies<>{});
}

inline std::string shape_string(const Shape& shape)
{
    std::string s = "(";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(shape[i]);
    }
    return s + ")";
}

/// Dense row-major N-dimensional array. Extents are positive; the element
/// count always equals the product of the extents.
template <typename Scalar>
class BasicTensor {
public:
    using value_type = Scalar;

    BasicTensor() = default;

    explicit BasicTensor(Shape shape, Scalar fill = Scalar(0))
        : shape_(std::move(shape)), data_(static_cast<std::size_t>(check_shape(shape_)), fill) {}

    BasicTensor(Shape shape, std::vector<Scalar> data) : shape_(std::move(shape)), data_(std::move(data))
    {
        if (check_shape(shape_) != static_cast<Index>(data_.size()))
            throw ShapeError("tensor data length " + std::to_string(data_.size()) + " does not match shape " +
                             shape_string(shape_));
    }

    static BasicTensor zeros(Shape shape) { return BasicTensor(std::move(shape)); }
    static BasicTensor ones(Shape shape) { return BasicTensor(std::move(shape), Scalar(1)); }
    static BasicTensor scalar(Scalar v) { return BasicTensor(Shape{1}, std::vector<Scalar>{v}); }
    static BasicTensor vector(std::initializer_list<Scalar> v)
    {
        return BasicTensor(Shape{static_cast<Index>(v.size())}, std::vector<Scalar>(v));
    }

    const Shape& shape() const noexcept { return shape_; }
    Index rank() const noexcept { return static_cast<Index>(shape_.size()); }
    Index size() const noexcept { return static_cast<Index>(data_.size()); }
    Index dim(Index axis) const { return shape_.at(static_cast<std::size_t>(axis)); }
    bool empty() const noexcept { return data_.empty(); }

    std::span<Scalar> values() noexcept { return data_; }
    std::span<const Scalar> values() const noexcept { return data_; }
    Scalar* data() noexcept { return data_.data(); }
    const Scalar* data() const noexcept { return data_.data(); }
    const std::vector<Scalar>& storage() const noexcept { return data_; }

    Scalar& operator[](Index i) { return data_[static_cast<std::size_t>(i)]; }
    const Scalar& operator[](Index i) const { return data_[static_cast<std::size_t>(i)]; }

    template <typename... Is>
    Scalar& operator()(Is... idx) { return data_[static_cast<std::size_t>(offset({static_cast<Index>(idx)...}))]; }
    template <typename... Is>
    const Scalar& operator()(Is... idx) const
    {
        return data_[static_cast<std::size_t>(offset({static_cast<Index>(idx)...}))];
    }

    Index offset(std::initializer_list<Index> idx) const
    {
        Index off = 0;
        std::size_t axis = 0;
        for (Index i : idx) off = off * shape_[axis++] + i;
        return off;
    }

    /// Same elements under new extents of equal product.
    BasicTensor reshaped(Shape shape) const
    {
        if (check_shape(shape) != size())
            throw ShapeError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
        return BasicTensor(std::move(shape), data_);
    }

    Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>> flat() const { return {data(), size()}; }
    Eigen::Map<Eigen::Matrix<Scalar, Eigen::Dynamic, 1>> flat() { return {data(), size()}; }

    /// Row-major matrix view over a contiguous block starting at `offset`.
    Eigen::Map<const RowMatrix<Scalar>> matrix(Index rows, Index cols, Index offset = 0) const
    {
        return {data() + offset, rows, cols};
    }
    Eigen::Map<RowMatrix<Scalar>> matrix(Index rows, Index cols, Index offset = 0)
    {
        return {data() + offset, rows, cols};
    }

    bool all_finite() const
    {
        return std::all_of(data_.begin(), data_.end(), [](Scalar v) { return std::isfinite(v); });
    }

    friend bool operator==(const BasicTensor& a, const BasicTensor& b)
    {
        return a.shape_ == b.shape_ && a.data_ == b.data_;
    }

private:
    static Index check_shape(const Shape& shape)
    {
        for (Index e : shape)
            if (e <= 0) throw ShapeError("tensor extents must be positive, got " + shape_string(shape));
        return shape_size(shape);
    }

    Shape shape_;
    std::vector<Scalar> data_;
};

using Tensor = BasicTensor<double>;

template <typename Scalar>
std::ostream& operator<<(std::ostream& os, const BasicTensor<Scalar>& t)
{
    os << "Tensor" << shape_string(t.shape()) << " [";
    for (Index i = 0; i < t.size() && i < 16; ++i) os << (i ? ", " : "") << t[i];
    if (t.size() > 16) os << ", ...";
    return os << "]";
}

inline bool is_permutation_of_axes(std::span<const Index> axes, Index rank)
{
    if (static_cast<Index>(axes.size()) != rank) return false;
    std::vector<bool> seen(static_cast<std::size_t>(rank), false);
    for (Index a : axes) {
        if (a < 0 || a >= rank || seen[static_cast<std::size_t>(a)]) return false;
        seen[static_cast<std::size_t>(a)] = true;
    }
    return true;
}

inline std::vector<Index> inverse_permutation(std::span<const Index> axes)
{
    std::vector<Index> inv(axes.size());
    for (std::size_t i = 0; i < axes.size(); ++i) inv[static_cast<std::size_t>(axes[i])] = static_cast<Index>(i);
    return inv;
}

/// Output axis i takes source axis axes[i].
template <typename Scalar>
BasicTensor<Scalar> permute(const BasicTensor<Scalar>& t, std::span<const Index> axes)
{
    const Index rank = t.rank();
    if (!is_permutation_of_axes(axes, rank))
        throw InvalidArgument("permute: axes are not a permutation of 0.." + std::to_string(rank - 1));

    Shape out_shape(static_cast<std::size_t>(rank));
    for (Index i = 0; i < rank; ++i) out_shape[static_cast<std::size_t>(i)] = t.dim(axes[static_cast<std::size_t>(i)]);

    std::vector<Index> src_stride(static_cast<std::size_t>(rank));
    Index s = 1;
    for (Index i = rank - 1; i >= 0; --i) {
        src_stride[static_cast<std::size_t>(i)] = s;
        s *= t.dim(i);
    }
    // stride in the source for each output axis
    std::vector<Index> stride(static_cast<std::size_t>(rank));
    for (Index i = 0; i < rank; ++i) stride[static_cast<std::size_t>(i)] = src_stride[static_cast<std::size_t>(axes[static_cast<std::size_t>(i)])];

    BasicTensor<Scalar> out(out_shape);
    std::vector<Index> idx(static_cast<std::size_t>(rank), 0);
    Index src = 0;
    for (Index n = 0; n < out.size(); ++n) {
        out[n] = t[src];
        for (Index ax = rank - 1; ax >= 0; --ax) {
            auto a = static_cast<std::size_t>(ax);
            if (++idx[a] < out_shape[a]) {
                src += stride[a];
                break;
            }
            src -= stride[a] * (out_shape[a] - 1);
            idx[a] = 0;
        }
    }
    return out;
}

template <typename Scalar>
BasicTensor<Scalar> permute(const BasicTensor<Scalar>& t, std::initializer_list<Index> axes)
{
    return permute(t, std::span<const Index>(axes.begin(), axes.size()));
}

/// Joins tensors along `axis`; all other extents must agree.
template <typename Scalar>
BasicTensor<Scalar> concat(std::span<const BasicTensor<Scalar>> ts, Index axis)
{
    if (ts.empty()) throw ShapeError("concat: no inputs");
    const Index rank = ts[0].rank();
    if (axis < 0 || axis >= rank) throw ShapeError("concat: axis out of range");
    Shape out_shape = ts[0].shape();
    out_shape[static_cast<std::size_t>(axis)] = 0;
    for (const auto& t : ts) {
        if (t.rank() != rank) throw ShapeError("concat: rank mismatch");
        for (Index d = 0; d < rank; ++d)
            if (d != axis && t.dim(d) != ts[0].dim(d))
                throw ShapeError("concat: extent mismatch " + shape_string(t.shape()) + " vs " +
                                 shape_string(ts[0].shape()));
        out_shape[static_cast<std::size_t>(axis)] += t.dim(axis);
    }
    Index outer = 1;
    for (Index d = 0; d < axis; ++d) outer *= out_shape[static_cast<std::size_t>(d)];
    Index inner = 1;
    for (Index d = axis + 1; d < rank; ++d) inner *= out_shape[static_cast<std::size_t>(d)];

    BasicTensor<Scalar> out(out_shape);
    const Index out_block = out_shape[static_cast<std::size_t>(axis)] * inner;
    Index col = 0;
    for (const auto& t : ts) {
        const Index block = t.dim(axis) * inner;
        for (Index o = 0; o < outer; ++o)
            std::copy_n(t.data() + o * block, block, out.data() + o * out_block + col);
        col += block;
    }
    return out;
}

template <typename Scalar>
BasicTensor<Scalar> flatten(const BasicTensor<Scalar>& t)
{
    return t.reshaped(Shape{t.size()});
}

/// Maximum elementwise absolute difference; shapes must match.
template <typename Scalar>
Scalar max_abs_diff(const BasicTensor<Scalar>& a, const BasicTensor<Scalar>& b)
{
    if (a.shape() != b.shape()) throw ShapeError("max_abs_diff: shape mismatch");
    return (a.flat() - b.flat()).cwiseAbs().maxCoeff();
}

} // namespace windcast
