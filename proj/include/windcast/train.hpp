#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "windcast/models.hpp"

namespace windcast {

struct TrainConfig {
    int max_epochs = 150;
    Index batch_size = 64;
    double learning_rate = 1e-3;
    int patience = 20;
    std::uint64_t seed = 42;

    void validate() const;
};

struct AdamOptions {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// Bias-corrected Adam over a fixed parameter list. A parameter without a
/// gradient buffer is treated as having a zero gradient.
class Adam {
public:
    Adam(std::vector<Var> params, AdamOptions options = {});
    explicit Adam(const ParameterRegistry& registry, AdamOptions options = {});

    void step();
    std::int64_t steps() const { return step_; }
    const std::vector<Tensor>& first_moments() const { return m_; }
    const std::vector<Tensor>& second_moments() const { return v_; }

private:
    std::vector<Var> params_;
    std::vector<Tensor> m_, v_;
    AdamOptions options_;
    std::int64_t step_ = 0;
};

/// Mean of squared residuals over all elements.
Var mse_loss(const Var& prediction, const Var& target);

struct EpochRecord {
    int epoch = 0;
    double train_loss = 0;
    double val_loss = 0;
    double elapsed_s = 0;
};

struct TrainingTrace {
    std::vector<EpochRecord> epochs;
    int best_epoch = 0;
    double best_val_loss = 0;
    int epochs_run = 0;
    bool early_stopped = false;
    double wall_seconds = 0;

    /// One JSON object per line: epoch, train_loss, val_loss, elapsed_s.
    std::string to_jsonl() const;
    static TrainingTrace from_jsonl(const std::string& text);
};

/// Eval-mode MSE of the model over a whole sample set.
double evaluate_loss(Model& model, const SampleSet& samples, Index batch_size = 256);

/// Split of a shuffled index list into batches; a trailing singleton batch is
/// merged into its predecessor so batch statistics always see two samples.
std::vector<std::vector<Index>> make_batches(std::span<const Index> order, Index batch_size);

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Mini-batch Adam on MSE with early stopping on validation loss. On return
/// the model holds the weights of the best validation epoch.
TrainingTrace fit(Model& model, const SampleSet& train, const SampleSet& validation, const TrainConfig& config,
                  const EpochCallback& on_epoch = {});

} // namespace windcast
