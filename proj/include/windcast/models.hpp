#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "windcast/data.hpp"
#include "windcast/nn.hpp"

namespace windcast {

enum class ModelKind { multidim, conv2d, conv2d_attention, conv2d_upscaling, conv3d, persistence };

std::string to_string(ModelKind kind);
/// Accepts the canonical names plus the short forms 2d, 2d_attention,
/// 2d_upscaling, 3d.
ModelKind parse_model_kind(const std::string& name);
/// The five trainable architectures, in table order.
std::vector<ModelKind> trainable_kinds();

struct InputShape {
    Index cities = 0, steps = 0, features = 0;

    friend bool operator==(const InputShape&, const InputShape&) = default;
};

struct ModelSpec {
    ModelKind kind = ModelKind::multidim;
    InputShape input;
    std::vector<Index> targets;

    Index output_size() const { return static_cast<Index>(targets.size()); }
    friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

constexpr Index kKernelSize = 3;
constexpr Index kHiddenUnits = 128;
constexpr Index kMultidimFeatureMaps = 16;
constexpr Index k2dFeatureMaps = 32;
constexpr Index k3dFeatureMaps = 10;
constexpr Index kAttentionKeyDim = 4;
constexpr Index kAttentionValueDim = 4;

/// A forecasting model: (B,C,T,F) normalized windows to (B,targets) raw-unit
/// wind speeds.
class Model {
public:
    explicit Model(ModelSpec spec) : spec_(std::move(spec)) {}
    virtual ~Model() = default;
    Model(const Model&) = delete;
    Model& operator=(const Model&) = delete;

    const ModelSpec& spec() const { return spec_; }
    const ParameterRegistry& parameters() const { return registry_; }
    ParameterRegistry& parameters() { return registry_; }
    /// Batch-norm layers whose running statistics belong to the model state.
    const std::vector<std::pair<std::string, BatchNormLayer*>>& norms() const { return norms_; }

    virtual Var forward(const Var& x, Mode mode) = 0;
    virtual bool trainable() const { return true; }

    /// Eval-mode predictions for every sample, one row per sample.
    virtual Eigen::MatrixXd predict(const SampleSet& samples, Index batch_size = 256);

protected:
    void register_norm(std::string name, BatchNormLayer& layer) { norms_.emplace_back(std::move(name), &layer); }
    void check_input(const Var& x) const;

    ModelSpec spec_;
    ParameterRegistry registry_;
    std::vector<std::pair<std::string, BatchNormLayer*>> norms_;
};

/// Three depthwise-separable views of the input: channels = cities (T×F),
/// channels = steps (C×F), channels = features (C×T); flattened,
/// concatenated, then dense(128)+ReLU and dense(targets).
class MultidimModel final : public Model {
public:
    MultidimModel(ModelSpec spec, Rng& rng);
    Var forward(const Var& x, Mode mode) override;
    /// Per-branch block outputs before flattening.
    std::vector<Var> branch_outputs(const Var& x, Mode mode);

    std::vector<DepthwiseSeparableBlock> branches;
    DenseLayer hidden, output;
};

class Conv2dModel final : public Model {
public:
    Conv2dModel(ModelSpec spec, Rng& rng, bool with_attention);
    Var forward(const Var& x, Mode mode) override;
    /// Softmax weights of the most recent forward pass (attention variant only).
    const Tensor& last_attention() const { return last_attention_; }

    Conv2dLayer conv;
    std::optional<AttentionAugmentation> attention;
    DenseLayer hidden, output;

private:
    Tensor last_attention_;
};

class UpscalingModel final : public Model {
public:
    UpscalingModel(ModelSpec spec, Rng& rng);
    Var forward(const Var& x, Mode mode) override;

    TransposedConv2dLayer upscale;
    DepthwiseSeparableBlock first, second;
    DenseLayer hidden, output;
};

class Conv3dModel final : public Model {
public:
    Conv3dModel(ModelSpec spec, Rng& rng);
    Var forward(const Var& x, Mode mode) override;

    Conv3dLayer conv;
    DenseLayer hidden, output;
};

/// Parameter-free baseline: the last observed wind speed of each target city.
class PersistenceModel final : public Model {
public:
    explicit PersistenceModel(ModelSpec spec) : Model(std::move(spec)) {}
    Var forward(const Var& x, Mode mode) override;
    bool trainable() const override { return false; }
    Eigen::MatrixXd predict(const SampleSet& samples, Index batch_size = 256) override;
};

/// Raw-unit wind speed of each target city at the window's last time step.
Eigen::VectorXd persistence_predict(const SampleWindow& window, std::span<const Index> targets);

std::unique_ptr<Model> build_model(const ModelSpec& spec, std::uint64_t seed);
std::unique_ptr<MultidimModel> build_multidim(InputShape input, std::vector<Index> targets, std::uint64_t seed = 42);
std::unique_ptr<Conv2dModel> build_conv2d(InputShape input, std::vector<Index> targets, std::uint64_t seed = 42);
std::unique_ptr<Conv2dModel> build_conv2d_attention(InputShape input, std::vector<Index> targets,
                                                    std::uint64_t seed = 42);
std::unique_ptr<UpscalingModel> build_conv2d_upscaling(InputShape input, std::vector<Index> targets,
                                                       std::uint64_t seed = 42);
std::unique_ptr<Conv3dModel> build_conv3d(InputShape input, std::vector<Index> targets, std::uint64_t seed = 42);

/// Trainable element count (kernels, biases, gamma/beta, dense weights);
/// running statistics excluded.
Index count_parameters(const Model& model);

/// Reported counts for the Denmark / Netherlands inputs, for side-by-side
/// printing only.
struct ReferenceParameterCount {
    ModelKind kind;
    Index denmark;
    Index netherlands;
};
std::vector<ReferenceParameterCount> reference_parameter_counts();

// ---- weight files -----------------------------------------------------------

constexpr std::uint32_t kWeightFormatVersion = 1;

/// "WNDC" | u32 version | spec (kind, C, T, F, target count, target indices;
/// all u32) | u32 record count | records | u32 CRC32 of everything before it.
/// Record: u32 name length, name bytes, u32 rank, u32 extents, f64 values.
/// All integers and doubles little-endian. Records cover every parameter and
/// every batch-norm running statistic.
std::string save_weights(const Model& model);
/// Replaces the model's state. Throws FormatError on spec mismatch, truncation
/// or checksum failure, leaving the model untouched.
void load_weights(Model& model, std::string_view bytes);
/// Decodes only the spec descriptor of a weight file.
ModelSpec read_weight_spec(std::string_view bytes);

/// Snapshot of all parameter values and running statistics.
struct ModelState {
    std::vector<Tensor> values;
};
ModelState capture_state(const Model& model);
void restore_state(Model& model, const ModelState& state);

} // namespace windcast
