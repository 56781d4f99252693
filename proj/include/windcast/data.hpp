#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "windcast/tensor.hpp"

namespace windcast {

/// Seconds since the Unix epoch, UTC.
using Timestamp = std::int64_t;

Timestamp parse_timestamp(std::string_view text);
std::string format_timestamp(Timestamp t);
Timestamp make_timestamp(int year, unsigned month, unsigned day, int hour = 0);

/// Half-open [start, end) interval of timestamps.
struct DateRange {
    Timestamp start = 0;
    Timestamp end = 0;

    bool empty() const { return end <= start; }
    bool contains(Timestamp t) const { return t >= start && t < end; }
};

struct SplitConfig {
    DateRange train;
    /// Empty range: validation is carved from the tail of the training rows.
    DateRange validation;
    DateRange test;
    double validation_tail_fraction = 0.1;
};

/// Half-open row interval into a WeatherTable.
struct RowRange {
    Index begin = 0;
    Index end = 0;

    Index size() const { return end - begin; }
    bool empty() const { return end <= begin; }
};

struct SplitRows {
    RowRange train, validation, test;
};

struct DatasetSchema {
    std::string id;
    std::vector<std::string> cities;
    std::vector<std::string> features;
    std::string wind_feature = "wind_speed";
    std::vector<std::string> target_cities;
    Index steps = 4;
    std::vector<int> horizons_hours;
    /// Seconds between consecutive rows.
    Timestamp step_seconds = 3600;
    SplitConfig split;

    Index horizon_steps(int hours) const;
    std::vector<Index> target_indices() const;
    Index wind_feature_index() const;
    Shape window_shape() const { return {static_cast<Index>(cities.size()), steps, static_cast<Index>(features.size())}; }
};

DatasetSchema denmark_schema();
DatasetSchema netherlands_schema();
/// Cities and features are inferred from the header (`<city>_<feature>`,
/// split at the first underscore); targets default to every city.
DatasetSchema custom_schema();
DatasetSchema schema_by_id(const std::string& id);

struct FillReport {
    Index source_rows = 0;
    Index inserted_rows = 0;
    Index filled_cells = 0;
};

/// Hourly weather observations, one column per (city, feature) in city-major
/// order: column = city · features + feature. Raw source units.
struct WeatherTable {
    std::vector<Timestamp> timestamps;
    Eigen::MatrixXd values;
    std::vector<std::string> cities;
    std::vector<std::string> features;
    FillReport fills;

    Index rows() const { return static_cast<Index>(timestamps.size()); }
    Index columns() const { return values.cols(); }
    Index column(Index city, Index feature) const { return city * static_cast<Index>(features.size()) + feature; }
    /// Station-rows: timestamps × cities.
    Index station_rows() const { return rows() * static_cast<Index>(cities.size()); }
};

/// Parses a canonical CSV (`timestamp,<city>_<feature>,...`). Rows are sorted,
/// missing hours inserted, missing cells forward- then back-filled. A custom
/// schema adopts the header's cities and features.
WeatherTable load_csv(const std::filesystem::path& path, DatasetSchema& schema);
WeatherTable load_csv(std::istream& in, DatasetSchema& schema);

class MinMaxScaler {
public:
    MinMaxScaler() = default;
    MinMaxScaler(Eigen::RowVectorXd min, Eigen::RowVectorXd max);

    double transform(double value, Index column) const;
    double inverse(double value, Index column) const;
    Eigen::MatrixXd transform(const Eigen::MatrixXd& values) const;
    Eigen::MatrixXd inverse(const Eigen::MatrixXd& values) const;

    const Eigen::RowVectorXd& min() const { return min_; }
    const Eigen::RowVectorXd& max() const { return max_; }
    bool is_constant(Index column) const { return max_(column) <= min_(column); }
    Index columns() const { return min_.size(); }

private:
    Eigen::RowVectorXd min_, max_;
};

/// Column-wise min/max over `train` rows only.
MinMaxScaler fit_scaler(const WeatherTable& table, RowRange train);

/// One example: normalized (C,T,F) history ending at the anchor row, raw
/// target-city wind speeds `horizon` rows later, and the raw wind speed of
/// every city at the anchor row.
struct SampleWindow {
    Tensor input;
    Eigen::VectorXd target;
    Timestamp anchor_time = 0;
    Eigen::VectorXd anchor_wind;
};

class SampleSet {
public:
    SampleSet() = default;
    SampleSet(Tensor inputs, Eigen::MatrixXd targets, Eigen::MatrixXd anchor_wind, std::vector<Timestamp> anchors,
              std::vector<Index> target_cities, Index horizon_steps, Timestamp step_seconds);

    Index size() const { return static_cast<Index>(anchors_.size()); }
    bool empty() const { return anchors_.empty(); }
    Shape window_shape() const { return {inputs_.dim(1), inputs_.dim(2), inputs_.dim(3)}; }
    Index target_count() const { return targets_.cols(); }

    SampleWindow window(Index i) const;
    /// Inputs of the selected samples stacked as (B,C,T,F).
    Tensor batch_inputs(std::span<const Index> rows) const;
    Eigen::MatrixXd batch_targets(std::span<const Index> rows) const;

    const Tensor& inputs() const { return inputs_; }
    const Eigen::MatrixXd& targets() const { return targets_; }
    const Eigen::MatrixXd& anchor_wind() const { return anchor_wind_; }
    const std::vector<Timestamp>& anchors() const { return anchors_; }
    const std::vector<Index>& target_cities() const { return target_cities_; }
    Index horizon_steps() const { return horizon_steps_; }
    Timestamp target_time(Index i) const { return anchors_[static_cast<std::size_t>(i)] + horizon_steps_ * step_seconds_; }

    friend bool operator==(const SampleSet&, const SampleSet&) = default;

private:
    Tensor inputs_;
    Eigen::MatrixXd targets_;
    Eigen::MatrixXd anchor_wind_;
    std::vector<Timestamp> anchors_;
    std::vector<Index> target_cities_;
    Index horizon_steps_ = 0;
    Timestamp step_seconds_ = 3600;
};

/// Windows fully inside `rows`: N − (T−1) − horizon samples for N rows.
SampleSet make_windows(const WeatherTable& table, const MinMaxScaler& scaler, RowRange rows, Index steps,
                       Index horizon_steps, std::span<const Index> target_cities, Index wind_feature,
                       Timestamp step_seconds = 3600);

/// Maps the date ranges of `config` onto table rows.
SplitRows split_rows(const WeatherTable& table, const SplitConfig& config);

struct SplitSamples {
    SampleSet train, validation, test;
    MinMaxScaler scaler;
    SplitRows rows;
};

/// Chronological train/validation/test sample sets for one horizon, with the
/// scaler fit on the training rows.
SplitSamples split(const WeatherTable& table, const DatasetSchema& schema, int horizon_hours);

} // namespace windcast
