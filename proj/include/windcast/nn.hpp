#pragma once

// Batched neural-network operations and the parameterized layers built on
// them. Every operation takes a leading batch axis B.

#include <string>
#include <utility>
#include <vector>

#include "windcast/autodiff.hpp"
#include "windcast/kernels.hpp"
#include "windcast/random.hpp"

namespace windcast {

using kernels::Padding;

enum class Mode { train, eval };

// ---- operations -----------------------------------------------------------

/// (B,C,H,W) ⋆ (O,C,k,k) -> (B,O,H',W'), stride 1, no kernel flip.
Var conv2d(const Var& x, const Var& weight, Padding padding = Padding::valid);
/// (B,C,H,W) with (C,k,k) -> (B,C,H',W'); no cross-channel mixing.
Var depthwise_conv2d(const Var& x, const Var& weight, Padding padding = Padding::valid);
/// 1×1 convolution: (B,C,H,W) with (O,C,1,1) -> (B,O,H,W).
Var pointwise_conv2d(const Var& x, const Var& weight);
/// Valid 3D cross-correlation: (B,C,D,H,W) ⋆ (O,C,k,k,k) -> (B,O,D',H',W').
Var conv3d(const Var& x, const Var& weight);
/// Stride-2, 2×2 transposed convolution: (B,C,H,W) with (C,O,2,2) -> (B,O,2H,2W).
Var conv_transpose2d(const Var& x, const Var& weight);
/// Adds bias[c] to every element of channel c of a (B,C,...) tensor.
Var add_channel_bias(const Var& x, const Var& bias);
/// (B,in) · weightᵀ + bias -> (B,out).
Var linear(const Var& x, const Var& weight, const Var& bias);

struct BatchNormStats {
    Tensor running_mean;
    Tensor running_var;
};

struct BatchNormOptions {
    double momentum = 0.1;
    double epsilon = 1e-5;
};

/// Per-channel normalization of a (B,C,...) tensor. Train mode uses batch
/// statistics over batch and spatial axes and folds them into `stats` with
/// running = (1-momentum)·running + momentum·batch; eval mode reads `stats`.
Var batch_norm(const Var& x, const Var& gamma, const Var& beta, BatchNormStats& stats, Mode mode,
               BatchNormOptions options = {});

struct AttentionWeights {
    Var query_w, query_b, key_w, key_b, value_w, value_b;
};

/// Single-head scaled dot-product self-attention across the H·W positions of
/// (B,C,H,W); the d_v attention channels are appended: -> (B,C+d_v,H,W).
/// When `attention_out` is given it receives the (B,HW,HW) softmax weights.
Var attention_augment(const Var& x, const AttentionWeights& w, Tensor* attention_out = nullptr);

// ---- parameter bookkeeping ------------------------------------------------

struct NamedParameter {
    std::string name;
    Var var;
};

class ParameterRegistry {
public:
    void add(std::string name, Var var);
    const std::vector<NamedParameter>& entries() const { return entries_; }
    std::vector<NamedParameter>& entries() { return entries_; }
    Index count() const;
    void zero_grad();

private:
    std::vector<NamedParameter> entries_;
};

/// Symmetric Glorot-uniform draw in ±sqrt(6/(fan_in+fan_out)).
Tensor glorot_uniform(Shape shape, Index fan_in, Index fan_out, Rng& rng);

// ---- layers ---------------------------------------------------------------

class Conv2dLayer {
public:
    Conv2dLayer(Index in_channels, Index out_channels, Index k, Padding padding, Rng& rng);
    Var forward(const Var& x) const;
    void collect(const std::string& prefix, ParameterRegistry& registry) const;
    Index parameter_count() const { return weight.value().size() + bias.value().size(); }

    Var weight, bias;
    Padding padding;
};

class DepthwiseConv2dLayer {
public:
    DepthwiseConv2dLayer(Index channels, Index k, Padding padding, Rng& rng);
    Var forward(const Var& x) const { return depthwise_conv2d(x, weight, padding); }
    void collect(const std::string& prefix, ParameterRegistry& registry) const;

    Var weight;
    Padding padding;
};

class PointwiseConv2dLayer {
public:
    PointwiseConv2dLayer(Index in_channels, Index out_channels, Rng& rng);
    Var forward(const Var& x) const { return pointwise_conv2d(x, weight); }
    void collect(const std::string& prefix, ParameterRegistry& registry) const;

    Var weight;
};

class BatchNormLayer {
public:
    explicit BatchNormLayer(Index channels, BatchNormOptions options = {});
    Var forward(const Var& x, Mode mode);
    void collect(const std::string& prefix, ParameterRegistry& registry) const;

    Var gamma, beta;
    BatchNormStats stats;
    BatchNormOptions options;
};

/// Depthwise k×k (bias-free) -> pointwise to out channels (bias-free) ->
/// batch norm -> ReLU.
class DepthwiseSeparableBlock {
public:
    DepthwiseSeparableBlock(Index in_channels, Index out_channels, Index k, Rng& rng);
    Var forward(const Var& x, Mode mode);
    void collect(const std::string& prefix, ParameterRegistry& registry) const;

    DepthwiseConv2dLayer depthwise;
    PointwiseConv2dLayer pointwise;
    BatchNormLayer norm;
};

class Conv3dLayer {
public:
    Conv3dLayer(Index in_channels, Index out_channels, Index k, Rng& rng);
    Var forward(const Var& x) const { return add_channel_bias(conv3d(x, weight), bias); }
    void collect(const std::string& prefix, ParameterRegistry& registry) const;

    Var weight, bias;
};

class TransposedConv2dLayer {
public:
    TransposedConv2dLayer(Index in_channels, Index out_channels, Rng& rng);
    Var forward(const Var& x) const { return add_channel_bias(conv_transpose2d(x, weight), bias); }
    void collect(const std::string& prefix, ParameterRegistry& registry) const;

    Var weight, bias;
};

class DenseLayer {
public:
    DenseLayer(Index in_units, Index out_units, Rng& rng);
    Var forward(const Var& x) const { return linear(x, weight, bias); }
    void collect(const std::string& prefix, ParameterRegistry& registry) const;
    Index in_units() const { return weight.dim(1); }
    Index out_units() const { return weight.dim(0); }

    Var weight, bias;
};

class AttentionAugmentation {
public:
    AttentionAugmentation(Index channels, Index key_dim, Index value_dim, Rng& rng);
    Var forward(const Var& x, Tensor* attention_out = nullptr) const
    {
        return attention_augment(x, {query.weight, query.bias, key.weight, key.bias, value.weight, value.bias},
                                 attention_out);
    }
    void collect(const std::string& prefix, ParameterRegistry& registry) const;

    DenseLayer query, key, value;
};

} // namespace windcast
