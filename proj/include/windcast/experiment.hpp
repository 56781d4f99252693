#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "windcast/data.hpp"
#include "windcast/metrics.hpp"
#include "windcast/models.hpp"
#include "windcast/train.hpp"

namespace windcast {

struct Dataset {
    DatasetSchema schema;
    WeatherTable table;
    /// git blob id of the CSV bytes.
    std::string content_hash;
};

Dataset load_dataset(const std::filesystem::path& csv, const std::string& schema_id);
Dataset load_dataset(const std::filesystem::path& csv, DatasetSchema schema);

/// Short dataset tag used in artifact names ("dk", "nl", or the schema id).
std::string dataset_tag(const DatasetSchema& schema);
/// `<model>_<tag>_h<hours>_s<seed>`
std::string artifact_stem(ModelKind kind, const DatasetSchema& schema, int horizon_hours, std::uint64_t seed);

struct RunKey {
    ModelKind kind = ModelKind::multidim;
    int horizon_hours = 0;
    std::uint64_t seed = 42;
};

struct RunResult {
    RunKey key;
    std::unique_ptr<Model> model;
    TrainingTrace trace;
    ExperimentReport report;
};

ModelSpec model_spec_for(const DatasetSchema& schema, ModelKind kind);
EvaluationContext evaluation_context(const Dataset& dataset, int horizon_hours, std::uint64_t seed, int epochs,
                                     const std::string& config_digest);

/// Builds, trains and evaluates one (model, horizon, seed) run.
RunResult train_run(const Dataset& dataset, const RunKey& key, const TrainConfig& config,
                    const std::string& config_digest = {}, const EpochCallback& on_epoch = {});

ExperimentReport persistence_report(const Dataset& dataset, int horizon_hours, const std::string& config_digest = {});

/// Worker count for independent runs: WINDCAST_THREADS if set, else 1.
int run_thread_budget();

/// Runs independent trainings on up to `threads` workers. Results keep the
/// order of `keys`. The first exception thrown by any run is rethrown.
std::vector<RunResult> run_grid(const Dataset& dataset, const std::vector<RunKey>& keys,
                                const std::function<TrainConfig(ModelKind)>& config_for, int threads,
                                const std::string& config_digest = {},
                                const std::function<void(const RunResult&)>& on_done = {});

} // namespace windcast
