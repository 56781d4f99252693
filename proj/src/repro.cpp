#include "windcast/repro.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>

namespace windcast {

std::string format_criterion(const CriterionResult& r)
{
    return std::string(r.pass ? "PASS" : "FAIL") + "  [" + std::to_string(r.criterion) + "] " + r.label +
           (r.detail.empty() ? "" : "  " + r.detail);
}

std::vector<PersistenceExpectation> denmark_persistence_expectation()
{
    return {{6, 1.649, 4.608}, {12, 2.210, 7.929}, {18, 2.309, 8.702}, {24, 2.313, 8.812}};
}

std::vector<PersistenceExpectation> netherlands_persistence_expectation()
{
    return {{1, 9.55, 183.61}, {2, 11.34, 246.95}, {3, 12.90, 310.38}, {4, 14.37, 375.36}};
}

std::vector<QualityCeiling> denmark_multidim_ceilings() { return {{6, 1.43}, {24, 2.12}}; }
std::vector<QualityCeiling> netherlands_multidim_ceilings() { return {{2, 9.96}, {3, 10.95}}; }

namespace {

bool is_denmark(const Dataset& d) { return d.schema.id == "denmark"; }

std::string fmt(double v, int precision = 4)
{
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.*f", precision, v);
    return buf;
}

CriterionResult relative_check(int criterion, const std::string& label, double expected, double observed,
                               double tolerance)
{
    const double delta = std::abs(observed - expected);
    const bool pass = delta <= tolerance * std::abs(expected);
    return {criterion, label, pass,
            "expected " + fmt(expected, 3) + "  observed " + fmt(observed) + "  |d| " + fmt(delta) + "  (tol " +
                fmt(100.0 * tolerance, 1) + "%)"};
}

} // namespace

std::vector<CriterionResult> check_persistence(const Dataset& dataset, std::vector<ExperimentReport>* reports)
{
    const bool dk = is_denmark(dataset);
    if (!dk && dataset.schema.id != "netherlands")
        throw ConfigError("repro: published persistence values exist only for denmark and netherlands");
    const auto expected = dk ? denmark_persistence_expectation() : netherlands_persistence_expectation();
    const double tol = dk ? kDenmarkPersistenceTolerance : kNetherlandsPersistenceTolerance;
    const int id = dk ? 1 : 2;

    std::vector<CriterionResult> out;
    for (const auto& e : expected) {
        const ExperimentReport r = persistence_report(dataset, e.horizon_hours);
        const std::string h = std::to_string(e.horizon_hours) + "h";
        out.push_back(relative_check(id, dataset.schema.id + " persistence MAE " + h, e.mae, r.mae, tol));
        out.push_back(relative_check(id, dataset.schema.id + " persistence MSE " + h, e.mse, r.mse, tol));
        if (reports) reports->push_back(r);
    }
    return out;
}

std::vector<CriterionResult> check_model_quality(const Dataset& dataset, const ReproOptions& options,
                                                 std::vector<ExperimentReport>* reports)
{
    const bool dk = is_denmark(dataset);
    const int quality_id = dk ? 3 : 4;
    const auto& horizons = dataset.schema.horizons_hours;

    std::map<int, double> persistence_mae;
    for (int h : horizons) {
        const auto r = persistence_report(dataset, h);
        persistence_mae[h] = r.mae;
        if (reports) reports->push_back(r);
    }

    std::vector<RunKey> keys;
    for (ModelKind kind : options.models)
        for (int h : horizons)
            for (auto seed : options.seeds) keys.push_back({kind, h, seed});

    auto on_done = [&](const RunResult& r) {
        if (options.log)
            options.log(artifact_stem(r.key.kind, dataset.schema, r.key.horizon_hours, r.key.seed) + ": MAE " +
                        fmt(r.report.mae) + " after " + std::to_string(r.trace.epochs_run) + " epochs");
    };
    const auto runs = run_grid(
        dataset, keys, [&](ModelKind) { return options.train; }, options.threads, {}, on_done);

    std::map<std::pair<ModelKind, int>, std::vector<double>> maes;
    for (const auto& r : runs) {
        maes[{r.key.kind, r.key.horizon_hours}].push_back(r.report.mae);
        if (reports) reports->push_back(r.report);
    }

    std::vector<CriterionResult> out;
    const bool has_multidim =
        std::find(options.models.begin(), options.models.end(), ModelKind::multidim) != options.models.end();
    if (has_multidim) {
        for (const auto& c : dk ? denmark_multidim_ceilings() : netherlands_multidim_ceilings()) {
            const double m = median(maes[{ModelKind::multidim, c.horizon_hours}]);
            out.push_back({quality_id, dataset.schema.id + " multidim median MAE " + std::to_string(c.horizon_hours) + "h",
                           m <= c.max_mae, "ceiling " + fmt(c.max_mae, 3) + "  observed " + fmt(m)});
        }
        for (int h : horizons) {
            const double m = median(maes[{ModelKind::multidim, h}]);
            out.push_back({quality_id, dataset.schema.id + " multidim below persistence " + std::to_string(h) + "h",
                           m < persistence_mae[h],
                           "persistence " + fmt(persistence_mae[h]) + "  multidim " + fmt(m)});
        }
    }
    for (ModelKind kind : options.models)
        for (int h : horizons) {
            const double m = median(maes[{kind, h}]);
            out.push_back({5, dataset.schema.id + " " + to_string(kind) + " below persistence " + std::to_string(h) + "h",
                           m < persistence_mae[h], "persistence " + fmt(persistence_mae[h]) + "  model " + fmt(m)});
        }
    if (options.models.size() != trainable_kinds().size())
        out.push_back({5, dataset.schema.id + " all five models evaluated", false,
                       "only " + std::to_string(options.models.size()) + " model kinds were run"});
    return out;
}

std::vector<CriterionResult> run_repro(const Dataset& dataset, const ReproOptions& options,
                                       std::vector<ExperimentReport>* reports)
{
    auto out = check_persistence(dataset, nullptr);
    if (options.train_models) {
        auto quality = check_model_quality(dataset, options, reports);
        out.insert(out.end(), quality.begin(), quality.end());
    } else if (reports) {
        for (int h : dataset.schema.horizons_hours) reports->push_back(persistence_report(dataset, h));
    }
    return out;
}

} // namespace windcast
