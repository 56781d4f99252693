#pragma once

#include <functional>
#include <string>
#include <vector>

#include "windcast/experiment.hpp"

namespace windcast {

/// One checked value of an acceptance criterion.
struct CriterionResult {
    int criterion = 0;
    std::string label;
    bool pass = false;
    std::string detail;
};

std::string format_criterion(const CriterionResult& r);

struct PersistenceExpectation {
    int horizon_hours;
    double mae;
    double mse;
};

/// Published persistence errors and their relative tolerances.
std::vector<PersistenceExpectation> denmark_persistence_expectation();
std::vector<PersistenceExpectation> netherlands_persistence_expectation();
constexpr double kDenmarkPersistenceTolerance = 0.01;
constexpr double kNetherlandsPersistenceTolerance = 0.015;

/// Median-over-seeds MAE ceilings for the multidimensional model: the
/// published value plus 10%.
struct QualityCeiling {
    int horizon_hours;
    double max_mae;
};
std::vector<QualityCeiling> denmark_multidim_ceilings();
std::vector<QualityCeiling> netherlands_multidim_ceilings();

struct ReproOptions {
    std::vector<std::uint64_t> seeds{1, 2, 3};
    std::vector<ModelKind> models = trainable_kinds();
    TrainConfig train;
    bool train_models = true;
    int threads = 1;
    std::function<void(const std::string&)> log;
};

/// Persistence check against the published table for this dataset.
std::vector<CriterionResult> check_persistence(const Dataset& dataset,
                                               std::vector<ExperimentReport>* reports = nullptr);

/// Trains every (model, horizon, seed), then checks the multidimensional
/// ceilings and that every model beats persistence at every horizon.
std::vector<CriterionResult> check_model_quality(const Dataset& dataset, const ReproOptions& options,
                                                 std::vector<ExperimentReport>* reports = nullptr);

/// Full reproduction for one dataset; the criteria numbering follows the
/// acceptance list (1/3/5 Denmark, 2/4/5 Netherlands).
std::vector<CriterionResult> run_repro(const Dataset& dataset, const ReproOptions& options,
                                       std::vector<ExperimentReport>* reports = nullptr);

} // namespace windcast
