#include "windcast/train.hpp"

#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>

#include <json.hpp>

namespace windcast {

void TrainConfig::validate() const
{
    if (max_epochs < 1 || batch_size < 1 || !(learning_rate > 0.0) || patience < 1)
        throw ConfigError("train config: epochs, batch size, learning rate and patience must be positive");
    if (patience >= max_epochs) throw ConfigError("train config: patience must be smaller than max_epochs");
}

// ---- Adam -------------------------------------------------------------------

Adam::Adam(std::vector<Var> params, AdamOptions options) : params_(std::move(params)), options_(options)
{
    for (const auto& p : params_) {
        m_.push_back(Tensor::zeros(p.shape()));
        v_.push_back(Tensor::zeros(p.shape()));
    }
}

namespace {

std::vector<Var> vars_of(const ParameterRegistry& registry)
{
    std::vector<Var> out;
    for (const auto& e : registry.entries()) out.push_back(e.var);
    return out;
}

} // namespace

Adam::Adam(const ParameterRegistry& registry, AdamOptions options) : Adam(vars_of(registry), options) {}

void Adam::step()
{
    ++step_;
    const double t = static_cast<double>(step_);
    const double c1 = 1.0 - std::pow(options_.beta1, t);
    const double c2 = 1.0 - std::pow(options_.beta2, t);
    for (std::size_t i = 0; i < params_.size(); ++i) {
        auto& p = params_[i];
        auto m = m_[i].flat();
        auto v = v_[i].flat();
        if (p.has_grad()) {
            const auto g = p.grad().flat();
            m = options_.beta1 * m + (1.0 - options_.beta1) * g;
            v = options_.beta2 * v + (1.0 - options_.beta2) * g.cwiseProduct(g);
        } else {
            m *= options_.beta1;
            v *= options_.beta2;
        }
        p.mutable_value().flat().array() -=
            options_.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + options_.epsilon);
    }
}

// ---- loss -------------------------------------------------------------------

Var mse_loss(const Var& prediction, const Var& target)
{
    if (prediction.shape() != target.shape())
        throw ShapeError("mse_loss: prediction " + shape_string(prediction.shape()) + " vs target " +
                         shape_string(target.shape()));
    return mean(square(sub(prediction, target)));
}

// ---- trace ------------------------------------------------------------------

std::string TrainingTrace::to_jsonl() const
{
    std::ostringstream os;
    for (const auto& e : epochs) {
        nlohmann::json j{{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"val_loss", e.val_loss},
                         {"elapsed_s", e.elapsed_s}};
        os << j.dump() << '\n';
    }
    return os.str();
}

TrainingTrace TrainingTrace::from_jsonl(const std::string& text)
{
    TrainingTrace t;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const auto j = nlohmann::json::parse(line);
        t.epochs.push_back({j.at("epoch").get<int>(), j.at("train_loss").get<double>(), j.at("val_loss").get<double>(),
                            j.at("elapsed_s").get<double>()});
    }
    t.epochs_run = static_cast<int>(t.epochs.size());
    for (const auto& e : t.epochs)
        if (t.best_epoch == 0 || e.val_loss < t.best_val_loss) {
            t.best_epoch = e.epoch;
            t.best_val_loss = e.val_loss;
        }
    return t;
}

// ---- fit --------------------------------------------------------------------

double evaluate_loss(Model& model, const SampleSet& samples, Index batch_size)
{
    const Eigen::MatrixXd pred = model.predict(samples, batch_size);
    return (pred - samples.targets()).squaredNorm() / static_cast<double>(pred.size());
}

std::vector<std::vector<Index>> make_batches(std::span<const Index> order, Index batch_size)
{
    std::vector<std::vector<Index>> out;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(batch_size)) {
        const auto end = std::min(order.size(), start + static_cast<std::size_t>(batch_size));
        out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start), order.begin() + static_cast<std::ptrdiff_t>(end));
    }
    if (out.size() > 1 && out.back().size() == 1) {
        out[out.size() - 2].push_back(out.back().front());
        out.pop_back();
    }
    return out;
}

namespace {

Tensor to_tensor(const Eigen::MatrixXd& m)
{
    Tensor t(Shape{m.rows(), m.cols()});
    t.matrix(m.rows(), m.cols()) = m;
    return t;
}

// Distinct stream from the initialization draws of the same seed.
constexpr std::uint64_t kShuffleStream = 0x9e3779b97f4a7c15ULL;

} // namespace

TrainingTrace fit(Model& model, const SampleSet& train, const SampleSet& validation, const TrainConfig& config,
                  const EpochCallback& on_epoch)
{
    config.validate();
    if (train.empty() || validation.empty()) throw InvalidArgument("fit: empty training or validation set");
    if (!model.trainable()) throw InvalidArgument("fit: " + to_string(model.spec().kind) + " has no parameters");
    if (train.size() < 2) throw InvalidArgument("fit: batch statistics need at least two training samples");

    using clock = std::chrono::steady_clock;
    const auto started = clock::now();
    Rng rng(config.seed ^ kShuffleStream);
    Adam optimizer(model.parameters(), AdamOptions{config.learning_rate});

    std::vector<Index> order(static_cast<std::size_t>(train.size()));
    std::iota(order.begin(), order.end(), Index{0});

    TrainingTrace trace;
    trace.best_val_loss = std::numeric_limits<double>::infinity();
    ModelState best_state = capture_state(model);
    int since_best = 0;

    for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
        rng.shuffle(std::span<Index>(order));
        const auto batches = make_batches(order, config.batch_size);
        double loss_sum = 0.0;
        for (std::size_t b = 0; b < batches.size(); ++b) {
            const auto& rows = batches[b];
            model.parameters().zero_grad();
            const Var x = Var::constant(train.batch_inputs(rows));
            const Var y = Var::constant(to_tensor(train.batch_targets(rows)));
            const Var loss = mse_loss(model.forward(x, Mode::train), y);
            const double value = loss.value()[0];
            if (!std::isfinite(value))
                throw DivergenceError("non-finite training loss at epoch " + std::to_string(epoch) + ", batch " +
                                          std::to_string(b + 1),
                                      epoch, static_cast<int>(b + 1));
            backward(loss);
            optimizer.step();
            loss_sum += value * static_cast<double>(rows.size());
        }
        model.parameters().zero_grad();

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = loss_sum / static_cast<double>(train.size());
        rec.val_loss = evaluate_loss(model, validation);
        rec.elapsed_s = std::chrono::duration<double>(clock::now() - started).count();
        if (!std::isfinite(rec.val_loss))
            throw DivergenceError("non-finite validation loss at epoch " + std::to_string(epoch), epoch, 0);
        trace.epochs.push_back(rec);
        trace.epochs_run = epoch;
        if (on_epoch) on_epoch(rec);

        if (rec.val_loss < trace.best_val_loss) {
            trace.best_val_loss = rec.val_loss;
            trace.best_epoch = epoch;
            best_state = capture_state(model);
            since_best = 0;
        } else if (++since_best >= config.patience) {
            trace.early_stopped = true;
            break;
        }
    }
    restore_state(model, best_state);
    trace.wall_seconds = std::chrono::duration<double>(clock::now() - started).count();
    return trace;
}

} // namespace windcast
