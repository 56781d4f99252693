#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "windcast/data.hpp"
#include "windcast/models.hpp"

namespace windcast {

/// Σ|y−ŷ|/n. Throws InvalidArgument on length mismatch or n = 0.
double mae(const Eigen::Ref<const Eigen::VectorXd>& y, const Eigen::Ref<const Eigen::VectorXd>& y_hat);
/// Σ(y−ŷ)²/n.
double mse(const Eigen::Ref<const Eigen::VectorXd>& y, const Eigen::Ref<const Eigen::VectorXd>& y_hat);

struct CityError {
    std::string city;
    double mae = 0;
    double mse = 0;
};

struct ExperimentReport {
    std::string dataset;
    std::string model;
    int horizon_hours = 0;
    std::vector<CityError> cities;
    /// Unweighted means over cities.
    double mae = 0;
    double mse = 0;
    Index parameters = 0;
    std::uint64_t seed = 0;
    int epochs = 0;
    Index samples = 0;
    FillReport fills;
    std::string config_digest;
};

/// Run metadata carried into a report.
struct EvaluationContext {
    std::string dataset;
    std::vector<std::string> city_names; // all dataset cities, indexed by city id
    int horizon_hours = 0;
    std::uint64_t seed = 0;
    int epochs = 0;
    FillReport fills;
    std::string config_digest;
};

/// Per-city and averaged errors of raw-unit predictions.
ExperimentReport evaluate(Model& model, const SampleSet& test, const EvaluationContext& context);
ExperimentReport evaluate_predictions(const Eigen::MatrixXd& predictions, const SampleSet& test,
                                      const EvaluationContext& context, const std::string& model_name,
                                      Index parameters);

/// Mean per-city MAE across horizons; reports must share dataset and model and
/// cover each horizon once. A non-empty `expected` must match the horizon set.
std::map<std::string, double> per_city_mean_over_horizons(std::span<const ExperimentReport> reports,
                                                          std::span<const int> expected = {});

enum class ReportFormat { json, csv, markdown };
ReportFormat parse_report_format(const std::string& name);

struct MarkdownOptions {
    int precision = 3;
};

/// json/csv keep full precision. markdown renders models × horizons × {MAE,
/// MSE} with the best cell of each column in bold; several seeds for one
/// (model, horizon) collapse to their median.
std::string emit_report(std::span<const ExperimentReport> reports, ReportFormat format, MarkdownOptions options = {});

std::vector<ExperimentReport> parse_reports_json(const std::string& text);
/// Rebuilds reports from the per-city CSV rows; averages are recomputed.
std::vector<ExperimentReport> parse_reports_csv(const std::string& text);

/// Rows `timestamp,city,horizon,y,y_hat` for every sample and target city;
/// the timestamp is the target time.
std::string predictions_csv(const SampleSet& samples, const Eigen::MatrixXd& predictions,
                            const std::vector<std::string>& city_names, int horizon_hours);

/// Our parameter counts next to the published ones.
std::string parameter_table_markdown(const std::vector<std::pair<ModelKind, std::pair<Index, Index>>>& ours);

/// SHA-1 of "blob <size>\0<content>", hex encoded (git object id).
std::string git_blob_hash(std::string_view content);

double median(std::vector<double> values);

} // namespace windcast
