#include "windcast/models.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>

namespace windcast {

std::string to_string(ModelKind kind)
{
    switch (kind) {
    case ModelKind::multidim: return "multidim";
    case ModelKind::conv2d: return "conv2d";
    case ModelKind::conv2d_attention: return "conv2d_attention";
    case ModelKind::conv2d_upscaling: return "conv2d_upscaling";
    case ModelKind::conv3d: return "conv3d";
    case ModelKind::persistence: return "persistence";
    }
    return "unknown";
}

ModelKind parse_model_kind(const std::string& name)
{
    if (name == "multidim" || name == "multidimensional") return ModelKind::multidim;
    if (name == "conv2d" || name == "2d") return ModelKind::conv2d;
    if (name == "conv2d_attention" || name == "2d_attention") return ModelKind::conv2d_attention;
    if (name == "conv2d_upscaling" || name == "2d_upscaling") return ModelKind::conv2d_upscaling;
    if (name == "conv3d" || name == "3d") return ModelKind::conv3d;
    if (name == "persistence") return ModelKind::persistence;
    throw ConfigError("unknown model kind '" + name + "'");
}

std::vector<ModelKind> trainable_kinds()
{
    return {ModelKind::conv2d, ModelKind::conv2d_attention, ModelKind::conv2d_upscaling, ModelKind::conv3d,
            ModelKind::multidim};
}

// ---- base -------------------------------------------------------------------

void Model::check_input(const Var& x) const
{
    const auto& s = x.shape();
    if (s.size() != 4 || s[1] != spec_.input.cities || s[2] != spec_.input.steps || s[3] != spec_.input.features)
        throw ShapeError(to_string(spec_.kind) + ": expected input (B," + std::to_string(spec_.input.cities) + "," +
                         std::to_string(spec_.input.steps) + "," + std::to_string(spec_.input.features) + "), got " +
                         shape_string(s));
}

Eigen::MatrixXd Model::predict(const SampleSet& samples, Index batch_size)
{
    if (samples.window_shape() != Shape{spec_.input.cities, spec_.input.steps, spec_.input.features})
        throw ConfigError(to_string(spec_.kind) + ": sample shape " + shape_string(samples.window_shape()) +
                          " does not match the model input");
    Eigen::MatrixXd out(samples.size(), spec_.output_size());
    std::vector<Index> rows;
    for (Index start = 0; start < samples.size(); start += batch_size) {
        const Index end = std::min(samples.size(), start + batch_size);
        rows.resize(static_cast<std::size_t>(end - start));
        for (Index i = start; i < end; ++i) rows[static_cast<std::size_t>(i - start)] = i;
        const Var y = forward(Var::constant(samples.batch_inputs(rows)), Mode::eval);
        out.middleRows(start, end - start) = y.value().matrix(end - start, spec_.output_size());
    }
    return out;
}

namespace {

void require_kernel_fit(const ModelSpec& spec)
{
    const auto& in = spec.input;
    if (in.cities < kKernelSize || in.steps < kKernelSize || in.features < kKernelSize)
        throw ConfigError(to_string(spec.kind) + ": every input extent must be at least " +
                          std::to_string(kKernelSize) + ", got (" + std::to_string(in.cities) + "," +
                          std::to_string(in.steps) + "," + std::to_string(in.features) + ")");
    if (spec.targets.empty()) throw ConfigError(to_string(spec.kind) + ": no target cities");
}

Index valid_extent(Index n) { return n - kKernelSize + 1; }

} // namespace

// ---- multidim ---------------------------------------------------------------

namespace {

// Branch views: channel axis first, then the two axes the kernel slides over.
constexpr Index kBranchAxes[3][4] = {{0, 1, 2, 3}, {0, 2, 1, 3}, {0, 3, 1, 2}};

Index multidim_fan_in(const InputShape& in)
{
    const Index c = in.cities, t = in.steps, f = in.features;
    return kMultidimFeatureMaps *
           (valid_extent(t) * valid_extent(f) + valid_extent(c) * valid_extent(f) + valid_extent(c) * valid_extent(t));
}

std::vector<DepthwiseSeparableBlock> make_branches(const InputShape& in, Rng& rng)
{
    std::vector<DepthwiseSeparableBlock> out;
    out.reserve(3);
    for (Index c : {in.cities, in.steps, in.features}) out.emplace_back(c, kMultidimFeatureMaps, kKernelSize, rng);
    return out;
}

} // namespace

MultidimModel::MultidimModel(ModelSpec spec, Rng& rng)
    : Model((require_kernel_fit(spec), std::move(spec))), branches(make_branches(spec_.input, rng)),
      hidden(multidim_fan_in(spec_.input), kHiddenUnits, rng), output(kHiddenUnits, spec_.output_size(), rng)
{
    const char* names[3] = {"branch_cities", "branch_steps", "branch_features"};
    for (std::size_t i = 0; i < 3; ++i) {
        branches[i].collect(names[i], registry_);
        register_norm(std::string(names[i]) + ".norm", branches[i].norm);
    }
    hidden.collect("hidden", registry_);
    output.collect("output", registry_);
}

std::vector<Var> MultidimModel::branch_outputs(const Var& x, Mode mode)
{
    check_input(x);
    std::vector<Var> out;
    for (std::size_t i = 0; i < 3; ++i) {
        const Var view = i == 0 ? x : permute(x, std::span<const Index>(kBranchAxes[i], 4));
        out.push_back(branches[i].forward(view, mode));
    }
    return out;
}

Var MultidimModel::forward(const Var& x, Mode mode)
{
    std::vector<Var> flat;
    for (const Var& b : branch_outputs(x, mode)) flat.push_back(flatten_batch(b));
    const Var joined = concat(std::span<const Var>(flat), 1);
    return output.forward(relu(hidden.forward(joined)));
}

// ---- 2D / 2D + attention -------------------------------------------------------

namespace {

Index conv2d_fan_in(const InputShape& in, bool with_attention)
{
    const Index channels = k2dFeatureMaps + (with_attention ? kAttentionValueDim : 0);
    return channels * valid_extent(in.steps) * valid_extent(in.features);
}

} // namespace

Conv2dModel::Conv2dModel(ModelSpec spec, Rng& rng, bool with_attention)
    : Model((require_kernel_fit(spec), std::move(spec))),
      conv(spec_.input.cities, k2dFeatureMaps, kKernelSize, Padding::valid, rng),
      attention(with_attention ? std::optional<AttentionAugmentation>(std::in_place, k2dFeatureMaps, kAttentionKeyDim,
                                                                      kAttentionValueDim, rng)
                               : std::nullopt),
      hidden(conv2d_fan_in(spec_.input, with_attention), kHiddenUnits, rng),
      output(kHiddenUnits, spec_.output_size(), rng)
{
    conv.collect("conv", registry_);
    if (attention) attention->collect("attention", registry_);
    hidden.collect("hidden", registry_);
    output.collect("output", registry_);
}

Var Conv2dModel::forward(const Var& x, Mode)
{
    check_input(x);
    Var h = relu(conv.forward(x));
    if (attention) h = attention->forward(h, &last_attention_);
    return output.forward(relu(hidden.forward(flatten_batch(h))));
}

// ---- 2D + upscaling --------------------------------------------------------------

namespace {

Index upscaling_fan_in(const InputShape& in)
{
    // two valid 3×3 blocks after doubling
    return k2dFeatureMaps * (2 * in.steps - 2 * (kKernelSize - 1)) * (2 * in.features - 2 * (kKernelSize - 1));
}

} // namespace

UpscalingModel::UpscalingModel(ModelSpec spec, Rng& rng)
    : Model((require_kernel_fit(spec), std::move(spec))), upscale(spec_.input.cities, spec_.input.cities, rng),
      first(spec_.input.cities, k2dFeatureMaps, kKernelSize, rng),
      second(k2dFeatureMaps, k2dFeatureMaps, kKernelSize, rng), hidden(upscaling_fan_in(spec_.input), kHiddenUnits, rng),
      output(kHiddenUnits, spec_.output_size(), rng)
{
    upscale.collect("upscale", registry_);
    first.collect("block1", registry_);
    second.collect("block2", registry_);
    hidden.collect("hidden", registry_);
    output.collect("output", registry_);
    register_norm("block1.norm", first.norm);
    register_norm("block2.norm", second.norm);
}

Var UpscalingModel::forward(const Var& x, Mode mode)
{
    check_input(x);
    const Var h = second.forward(first.forward(upscale.forward(x), mode), mode);
    return output.forward(relu(hidden.forward(flatten_batch(h))));
}

// ---- 3D ---------------------------------------------------------------------

Conv3dModel::Conv3dModel(ModelSpec spec, Rng& rng)
    : Model((require_kernel_fit(spec), std::move(spec))), conv(1, k3dFeatureMaps, kKernelSize, rng),
      hidden(k3dFeatureMaps * valid_extent(spec_.input.cities) * valid_extent(spec_.input.steps) *
                 valid_extent(spec_.input.features),
             kHiddenUnits, rng),
      output(kHiddenUnits, spec_.output_size(), rng)
{
    conv.collect("conv", registry_);
    hidden.collect("hidden", registry_);
    output.collect("output", registry_);
}

Var Conv3dModel::forward(const Var& x, Mode)
{
    check_input(x);
    const auto& s = x.shape();
    const Var volume = reshape(x, Shape{s[0], 1, s[1], s[2], s[3]});
    return output.forward(relu(hidden.forward(flatten_batch(relu(conv.forward(volume))))));
}

// ---- persistence ------------------------------------------------------------

Var PersistenceModel::forward(const Var&, Mode)
{
    throw ConfigError("persistence reads raw anchor values; use predict() on a SampleSet");
}

Eigen::MatrixXd PersistenceModel::predict(const SampleSet& samples, Index)
{
    Eigen::MatrixXd out(samples.size(), spec_.output_size());
    for (Index j = 0; j < spec_.output_size(); ++j)
        out.col(j) = samples.anchor_wind().col(spec_.targets[static_cast<std::size_t>(j)]);
    return out;
}

Eigen::VectorXd persistence_predict(const SampleWindow& window, std::span<const Index> targets)
{
    Eigen::VectorXd out(static_cast<Index>(targets.size()));
    for (std::size_t j = 0; j < targets.size(); ++j) out(static_cast<Index>(j)) = window.anchor_wind(targets[j]);
    return out;
}

// ---- builders ---------------------------------------------------------------

std::unique_ptr<MultidimModel> build_multidim(InputShape input, std::vector<Index> targets, std::uint64_t seed)
{
    Rng rng(seed);
    return std::make_unique<MultidimModel>(ModelSpec{ModelKind::multidim, input, std::move(targets)}, rng);
}

std::unique_ptr<Conv2dModel> build_conv2d(InputShape input, std::vector<Index> targets, std::uint64_t seed)
{
    Rng rng(seed);
    return std::make_unique<Conv2dModel>(ModelSpec{ModelKind::conv2d, input, std::move(targets)}, rng, false);
}

std::unique_ptr<Conv2dModel> build_conv2d_attention(InputShape input, std::vector<Index> targets, std::uint64_t seed)
{
    Rng rng(seed);
    return std::make_unique<Conv2dModel>(ModelSpec{ModelKind::conv2d_attention, input, std::move(targets)}, rng, true);
}

std::unique_ptr<UpscalingModel> build_conv2d_upscaling(InputShape input, std::vector<Index> targets,
                                                       std::uint64_t seed)
{
    Rng rng(seed);
    return std::make_unique<UpscalingModel>(ModelSpec{ModelKind::conv2d_upscaling, input, std::move(targets)}, rng);
}

std::unique_ptr<Conv3dModel> build_conv3d(InputShape input, std::vector<Index> targets, std::uint64_t seed)
{
    Rng rng(seed);
    return std::make_unique<Conv3dModel>(ModelSpec{ModelKind::conv3d, input, std::move(targets)}, rng);
}

std::unique_ptr<Model> build_model(const ModelSpec& spec, std::uint64_t seed)
{
    switch (spec.kind) {
    case ModelKind::multidim: return build_multidim(spec.input, spec.targets, seed);
    case ModelKind::conv2d: return build_conv2d(spec.input, spec.targets, seed);
    case ModelKind::conv2d_attention: return build_conv2d_attention(spec.input, spec.targets, seed);
    case ModelKind::conv2d_upscaling: return build_conv2d_upscaling(spec.input, spec.targets, seed);
    case ModelKind::conv3d: return build_conv3d(spec.input, spec.targets, seed);
    case ModelKind::persistence: return std::make_unique<PersistenceModel>(spec);
    }
    throw ConfigError("unknown model kind");
}

Index count_parameters(const Model& model) { return model.parameters().count(); }

std::vector<ReferenceParameterCount> reference_parameter_counts()
{
    return {{ModelKind::conv2d, 46115, 112167},
            {ModelKind::conv2d_attention, 47059, 113367},
            {ModelKind::conv2d_upscaling, 27974, 77568},
            {ModelKind::conv3d, 54749, 200929},
            {ModelKind::multidim, 37258, 102832}};
}

// ---- state ------------------------------------------------------------------

namespace {

struct StateSlot {
    std::string name;
    Tensor* value;
};

std::vector<StateSlot> state_slots(Model& model)
{
    std::vector<StateSlot> out;
    for (auto& p : model.parameters().entries()) out.push_back({p.name, &p.var.mutable_value()});
    for (const auto& [name, norm] : model.norms()) {
        out.push_back({name + ".running_mean", &norm->stats.running_mean});
        out.push_back({name + ".running_var", &norm->stats.running_var});
    }
    return out;
}

} // namespace

ModelState capture_state(const Model& model)
{
    ModelState s;
    for (auto& slot : state_slots(const_cast<Model&>(model))) s.values.push_back(*slot.value);
    return s;
}

void restore_state(Model& model, const ModelState& state)
{
    auto slots = state_slots(model);
    if (slots.size() != state.values.size()) throw ConfigError("restore_state: state does not match model");
    for (std::size_t i = 0; i < slots.size(); ++i) {
        if (slots[i].value->shape() != state.values[i].shape())
            throw ConfigError("restore_state: shape mismatch for " + slots[i].name);
        *slots[i].value = state.values[i];
    }
}

// ---- weight files -----------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'W', 'N', 'D', 'C'};

class Writer {
public:
    void u32(std::uint32_t v)
    {
        for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
    void f64(double v)
    {
        const auto bits = std::bit_cast<std::uint64_t>(v);
        for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
    }
    void bytes(std::string_view s) { buf_.append(s); }
    std::string& str() { return buf_; }

private:
    std::string buf_;
};

class Reader {
public:
    explicit Reader(std::string_view s) : s_(s) {}
    std::uint32_t u32()
    {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(s_[pos_ + i])) << (8 * i);
        pos_ += 4;
        return v;
    }
    double f64()
    {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(s_[pos_ + i])) << (8 * i);
        pos_ += 8;
        return std::bit_cast<double>(v);
    }
    std::string_view bytes(std::size_t n)
    {
        need(n);
        auto out = s_.substr(pos_, n);
        pos_ += n;
        return out;
    }
    std::size_t remaining() const { return s_.size() - pos_; }

private:
    void need(std::size_t n) const
    {
        if (s_.size() - pos_ < n) throw FormatError("weight file truncated");
    }
    std::string_view s_;
    std::size_t pos_ = 0;
};

std::uint32_t crc_of(std::string_view payload)
{
    return static_cast<std::uint32_t>(
        crc32(0L, reinterpret_cast<const Bytef*>(payload.data()), static_cast<uInt>(payload.size())));
}

ModelSpec read_spec(Reader& r)
{
    if (r.bytes(4) != std::string_view(kMagic, 4)) throw FormatError("not a weight file (bad magic)");
    const auto version = r.u32();
    if (version != kWeightFormatVersion) throw FormatError("unsupported weight format version " + std::to_string(version));
    ModelSpec spec;
    const auto kind = r.u32();
    if (kind > static_cast<std::uint32_t>(ModelKind::persistence)) throw FormatError("unknown model kind in weight file");
    spec.kind = static_cast<ModelKind>(kind);
    spec.input.cities = r.u32();
    spec.input.steps = r.u32();
    spec.input.features = r.u32();
    const auto ntargets = r.u32();
    if (ntargets > 4096) throw FormatError("implausible target count");
    for (std::uint32_t i = 0; i < ntargets; ++i) spec.targets.push_back(r.u32());
    return spec;
}

std::string_view checked_payload(std::string_view bytes)
{
    if (bytes.size() < 8) throw FormatError("weight file truncated");
    const auto payload = bytes.substr(0, bytes.size() - 4);
    Reader tail(bytes.substr(bytes.size() - 4));
    if (tail.u32() != crc_of(payload)) throw FormatError("weight file checksum mismatch");
    return payload;
}

} // namespace

std::string save_weights(const Model& model)
{
    Writer w;
    w.bytes(std::string_view(kMagic, 4));
    w.u32(kWeightFormatVersion);
    const auto& spec = model.spec();
    w.u32(static_cast<std::uint32_t>(spec.kind));
    w.u32(static_cast<std::uint32_t>(spec.input.cities));
    w.u32(static_cast<std::uint32_t>(spec.input.steps));
    w.u32(static_cast<std::uint32_t>(spec.input.features));
    w.u32(static_cast<std::uint32_t>(spec.targets.size()));
    for (Index t : spec.targets) w.u32(static_cast<std::uint32_t>(t));

    const auto slots = state_slots(const_cast<Model&>(model));
    w.u32(static_cast<std::uint32_t>(slots.size()));
    for (const auto& slot : slots) {
        w.u32(static_cast<std::uint32_t>(slot.name.size()));
        w.bytes(slot.name);
        w.u32(static_cast<std::uint32_t>(slot.value->rank()));
        for (Index d : slot.value->shape()) w.u32(static_cast<std::uint32_t>(d));
        for (double v : slot.value->values()) w.f64(v);
    }
    w.u32(crc_of(w.str()));
    return std::move(w.str());
}

ModelSpec read_weight_spec(std::string_view bytes)
{
    Reader r(checked_payload(bytes));
    return read_spec(r);
}

void load_weights(Model& model, std::string_view bytes)
{
    Reader r(checked_payload(bytes));
    const ModelSpec spec = read_spec(r);
    if (!(spec == model.spec()))
        throw FormatError("weight file is for " + to_string(spec.kind) + " with a different input/target spec");

    auto slots = state_slots(model);
    const auto count = r.u32();
    if (count != slots.size()) throw FormatError("weight file has " + std::to_string(count) + " records, model needs " +
                                                 std::to_string(slots.size()));
    std::vector<Tensor> staged;
    for (const auto& slot : slots) {
        const auto name = r.bytes(r.u32());
        if (name != slot.name) throw FormatError("weight record '" + std::string(name) + "' where '" + slot.name + "' expected");
        const auto rank = r.u32();
        Shape shape;
        for (std::uint32_t i = 0; i < rank; ++i) shape.push_back(r.u32());
        if (shape != slot.value->shape()) throw FormatError("shape mismatch for " + slot.name);
        Tensor t(shape);
        for (auto& v : t.values()) v = r.f64();
        staged.push_back(std::move(t));
    }
    if (r.remaining() != 0) throw FormatError("trailing bytes in weight file");
    for (std::size_t i = 0; i < slots.size(); ++i) *slots[i].value = std::move(staged[i]);
}

} // namespace windcast
