#include "windcast/data.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

namespace windcast {

// ---- timestamps -------------------------------------------------------------

Timestamp make_timestamp(int year, unsigned month, unsigned day, int hour)
{
    using namespace std::chrono;
    const sys_days d = std::chrono::year{year} / std::chrono::month{month} / std::chrono::day{day};
    return d.time_since_epoch().count() * 86400 + static_cast<Timestamp>(hour) * 3600;
}

Timestamp parse_timestamp(std::string_view text)
{
    // YYYY-MM-DD[T ]HH:MM[:SS][Z]
    int y = 0, mo = 0, d = 0, h = 0, mi = 0, s = 0;
    char sep = 0;
    const std::string buf(text);
    const int n = std::sscanf(buf.c_str(), "%4d-%2d-%2d%c%2d:%2d:%2d", &y, &mo, &d, &sep, &h, &mi, &s);
    if (n < 3 || (n > 3 && n < 6) || (n >= 4 && sep != 'T' && sep != ' '))
        throw InvalidArgument("unparsable timestamp '" + buf + "'");
    using namespace std::chrono;
    const year_month_day ymd{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(mo)},
                             std::chrono::day{static_cast<unsigned>(d)}};
    if (!ymd.ok() || h < 0 || h > 23 || mi < 0 || mi > 59 || s < 0 || s > 60)
        throw InvalidArgument("invalid timestamp '" + buf + "'");
    return sys_days(ymd).time_since_epoch().count() * 86400 + h * 3600 + mi * 60 + s;
}

std::string format_timestamp(Timestamp t)
{
    using namespace std::chrono;
    const auto days = static_cast<int>(std::floor(static_cast<double>(t) / 86400.0));
    const Timestamp rem = t - static_cast<Timestamp>(days) * 86400;
    const year_month_day ymd{sys_days{std::chrono::days{days}}};
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()), static_cast<int>(rem / 3600),
                  static_cast<int>(rem % 3600 / 60), static_cast<int>(rem % 60));
    return buf;
}

// ---- schemas ----------------------------------------------------------------

Index DatasetSchema::horizon_steps(int hours) const
{
    const Timestamp seconds = static_cast<Timestamp>(hours) * 3600;
    if (hours < 1 || seconds % step_seconds != 0)
        throw ConfigError("horizon of " + std::to_string(hours) + " h is not a whole number of " +
                          std::to_string(step_seconds) + " s steps");
    return seconds / step_seconds;
}

std::vector<Index> DatasetSchema::target_indices() const
{
    std::vector<Index> out;
    for (const auto& t : target_cities) {
        const auto it = std::find(cities.begin(), cities.end(), t);
        if (it == cities.end()) throw ConfigError("target city '" + t + "' is not in the dataset");
        out.push_back(static_cast<Index>(it - cities.begin()));
    }
    return out;
}

Index DatasetSchema::wind_feature_index() const
{
    const auto it = std::find(features.begin(), features.end(), wind_feature);
    if (it == features.end()) throw ConfigError("dataset has no '" + wind_feature + "' feature");
    return static_cast<Index>(it - features.begin());
}

DatasetSchema denmark_schema()
{
    DatasetSchema s;
    s.id = "denmark";
    s.cities = {"aalborg", "aarhus", "esbjerg", "odense", "roskilde"};
    s.features = {"temperature", "pressure", "wind_speed", "wind_direction"};
    s.target_cities = {"esbjerg", "odense", "roskilde"};
    s.steps = 4;
    s.horizons_hours = {6, 12, 18, 24};
    s.split.train = {make_timestamp(2000, 1, 1), make_timestamp(2009, 1, 1)};
    s.split.validation = {make_timestamp(2009, 1, 1), make_timestamp(2010, 1, 1)};
    s.split.test = {make_timestamp(2010, 1, 1), make_timestamp(2011, 1, 1)};
    return s;
}

DatasetSchema netherlands_schema()
{
    DatasetSchema s;
    s.id = "netherlands";
    s.cities = {"schiphol", "debilt", "leeuwarden", "eelde", "rotterdam", "eindhoven", "maastricht"};
    s.features = {"wind_speed", "wind_direction", "temperature", "dew_point", "pressure", "rain"};
    s.target_cities = s.cities;
    s.steps = 6;
    s.horizons_hours = {1, 2, 3, 4};
    s.split.train = {make_timestamp(2011, 1, 1), make_timestamp(2019, 1, 1)};
    s.split.validation = {};
    s.split.test = {make_timestamp(2019, 1, 1), std::numeric_limits<Timestamp>::max()};
    return s;
}

DatasetSchema custom_schema()
{
    DatasetSchema s;
    s.id = "custom";
    return s;
}

DatasetSchema schema_by_id(const std::string& id)
{
    if (id == "denmark" || id == "dk") return denmark_schema();
    if (id == "netherlands" || id == "nl") return netherlands_schema();
    if (id == "custom") return custom_schema();
    throw ConfigError("unknown dataset schema '" + id + "'");
}

// ---- CSV ingestion ----------------------------------------------------------

namespace {

std::vector<std::string_view> split_fields(std::string_view line)
{
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        out.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

std::string_view trim(std::string_view s)
{
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

bool is_missing(std::string_view s)
{
    return s.empty() || s == "NaN" || s == "nan" || s == "NA" || s == "null";
}

std::string row_label(std::size_t line) { return "line " + std::to_string(line); }

// Resolves each data column of the header to (city, feature).
std::vector<std::pair<Index, Index>> map_header(const std::vector<std::string_view>& header, DatasetSchema& schema)
{
    if (header.empty() || trim(header[0]) != "timestamp")
        throw IngestionError("line 1: first column must be 'timestamp'");
    const bool infer = schema.cities.empty();
    std::vector<std::pair<Index, Index>> map;
    auto index_of = [](std::vector<std::string>& v, const std::string& name, bool add) -> Index {
        auto it = std::find(v.begin(), v.end(), name);
        if (it != v.end()) return static_cast<Index>(it - v.begin());
        if (!add) return -1;
        v.push_back(name);
        return static_cast<Index>(v.size()) - 1;
    };
    for (std::size_t i = 1; i < header.size(); ++i) {
        const std::string col(trim(header[i]));
        Index city = -1, feature = -1;
        if (infer) {
            const auto us = col.find('_');
            if (us == std::string::npos || us == 0 || us + 1 == col.size())
                throw IngestionError("line 1: column '" + col + "' is not <city>_<feature>");
            city = index_of(schema.cities, col.substr(0, us), true);
            feature = index_of(schema.features, col.substr(us + 1), true);
        } else {
            for (std::size_t c = 0; c < schema.cities.size() && city < 0; ++c) {
                const auto& name = schema.cities[c];
                if (col.size() > name.size() + 1 && col.compare(0, name.size(), name) == 0 && col[name.size()] == '_') {
                    const Index f = index_of(schema.features, col.substr(name.size() + 1), false);
                    if (f >= 0) {
                        city = static_cast<Index>(c);
                        feature = f;
                    }
                }
            }
            if (city < 0) throw IngestionError("line 1: unknown column '" + col + "' for schema " + schema.id);
        }
        for (const auto& m : map)
            if (m == std::pair{city, feature}) throw IngestionError("line 1: duplicate column '" + col + "'");
        map.emplace_back(city, feature);
    }
    if (infer && schema.target_cities.empty()) schema.target_cities = schema.cities;
    const auto expected = schema.cities.size() * schema.features.size();
    if (map.size() != expected)
        throw IngestionError("line 1: header has " + std::to_string(map.size()) + " data columns, schema " + schema.id +
                             " needs " + std::to_string(expected));
    return map;
}

} // namespace

WeatherTable load_csv(const std::filesystem::path& path, DatasetSchema& schema)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IngestionError("cannot open " + path.string());
    return load_csv(in, schema);
}

WeatherTable load_csv(std::istream& in, DatasetSchema& schema)
{
    std::string line;
    if (!std::getline(in, line) || trim(line).empty()) throw IngestionError("line 1: empty file");
    const auto header = split_fields(line);
    const auto colmap = map_header(header, schema);
    const Index ncols = static_cast<Index>(colmap.size());

    struct Raw {
        Timestamp t;
        std::size_t line;
        std::vector<double> v;
    };
    std::vector<Raw> raw;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        const auto fields = split_fields(line);
        if (static_cast<Index>(fields.size()) != ncols + 1)
            throw IngestionError(row_label(lineno) + ": expected " + std::to_string(ncols + 1) + " fields, got " +
                                 std::to_string(fields.size()));
        Raw r{0, lineno, std::vector<double>(static_cast<std::size_t>(ncols), std::nan(""))};
        try {
            r.t = parse_timestamp(trim(fields[0]));
        } catch (const InvalidArgument& e) {
            throw IngestionError(row_label(lineno) + ": " + e.what());
        }
        for (Index c = 0; c < ncols; ++c) {
            const auto f = trim(fields[static_cast<std::size_t>(c) + 1]);
            if (is_missing(f)) continue;
            double v = 0;
            const auto res = std::from_chars(f.data(), f.data() + f.size(), v);
            if (res.ec != std::errc{} || res.ptr != f.data() + f.size() || !std::isfinite(v))
                throw IngestionError(row_label(lineno) + ": unparsable value '" + std::string(f) + "' in column " +
                                     std::string(trim(header[static_cast<std::size_t>(c) + 1])));
            r.v[static_cast<std::size_t>(c)] = v;
        }
        raw.push_back(std::move(r));
    }
    if (raw.empty()) throw IngestionError("line 2: file has a header but no data rows");

    std::stable_sort(raw.begin(), raw.end(), [](const Raw& a, const Raw& b) { return a.t < b.t; });

    WeatherTable table;
    table.cities = schema.cities;
    table.features = schema.features;
    table.fills.source_rows = static_cast<Index>(raw.size());

    const Timestamp step = schema.step_seconds;
    std::vector<Timestamp> times;
    std::vector<const Raw*> source;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        if (i > 0) {
            const Timestamp gap = raw[i].t - raw[i - 1].t;
            if (gap == 0)
                throw IngestionError(row_label(std::max(raw[i].line, raw[i - 1].line)) + ": duplicate timestamp " +
                                     format_timestamp(raw[i].t));
            if (gap % step != 0)
                throw IngestionError(row_label(raw[i].line) + ": timestamp " + format_timestamp(raw[i].t) +
                                     " is off the " + std::to_string(step) + " s grid");
            for (Timestamp t = raw[i - 1].t + step; t < raw[i].t; t += step) {
                times.push_back(t);
                source.push_back(nullptr);
                ++table.fills.inserted_rows;
            }
        }
        times.push_back(raw[i].t);
        source.push_back(&raw[i]);
    }

    const Index nrows = static_cast<Index>(times.size());
    table.timestamps = std::move(times);
    table.values.resize(nrows, ncols);
    for (Index r = 0; r < nrows; ++r)
        for (Index c = 0; c < ncols; ++c) {
            const Raw* src = source[static_cast<std::size_t>(r)];
            const auto [city, feature] = colmap[static_cast<std::size_t>(c)];
            table.values(r, table.column(city, feature)) = src ? src->v[static_cast<std::size_t>(c)] : std::nan("");
        }

    for (Index c = 0; c < ncols; ++c) {
        auto col = table.values.col(c);
        Index first = -1;
        for (Index r = 0; r < nrows; ++r) {
            if (std::isnan(col(r))) {
                if (r > 0 && first >= 0) {
                    col(r) = col(r - 1);
                    ++table.fills.filled_cells;
                }
            } else if (first < 0) {
                first = r;
            }
        }
        if (first < 0) throw IngestionError("column " + std::to_string(c) + " has no values");
        for (Index r = 0; r < first; ++r) {
            col(r) = col(first);
            ++table.fills.filled_cells;
        }
    }
    return table;
}

// ---- scaling ----------------------------------------------------------------

MinMaxScaler::MinMaxScaler(Eigen::RowVectorXd min, Eigen::RowVectorXd max) : min_(std::move(min)), max_(std::move(max))
{
    if (min_.size() != max_.size()) throw ShapeError("MinMaxScaler: min/max length mismatch");
}

double MinMaxScaler::transform(double value, Index column) const
{
    if (is_constant(column)) return 0.0;
    return (value - min_(column)) / (max_(column) - min_(column));
}

double MinMaxScaler::inverse(double value, Index column) const
{
    if (is_constant(column)) return min_(column);
    return value * (max_(column) - min_(column)) + min_(column);
}

Eigen::MatrixXd MinMaxScaler::transform(const Eigen::MatrixXd& values) const
{
    if (values.cols() != columns()) throw ShapeError("MinMaxScaler: column count mismatch");
    Eigen::MatrixXd out(values.rows(), values.cols());
    for (Index c = 0; c < values.cols(); ++c)
        for (Index r = 0; r < values.rows(); ++r) out(r, c) = transform(values(r, c), c);
    return out;
}

Eigen::MatrixXd MinMaxScaler::inverse(const Eigen::MatrixXd& values) const
{
    if (values.cols() != columns()) throw ShapeError("MinMaxScaler: column count mismatch");
    Eigen::MatrixXd out(values.rows(), values.cols());
    for (Index c = 0; c < values.cols(); ++c)
        for (Index r = 0; r < values.rows(); ++r) out(r, c) = inverse(values(r, c), c);
    return out;
}

MinMaxScaler fit_scaler(const WeatherTable& table, RowRange train)
{
    if (train.empty() || train.begin < 0 || train.end > table.rows())
        throw InvalidArgument("fit_scaler: empty or out-of-range training rows");
    const auto block = table.values.middleRows(train.begin, train.size());
    return MinMaxScaler(block.colwise().minCoeff(), block.colwise().maxCoeff());
}

// ---- windows ----------------------------------------------------------------

SampleSet::SampleSet(Tensor inputs, Eigen::MatrixXd targets, Eigen::MatrixXd anchor_wind,
                     std::vector<Timestamp> anchors, std::vector<Index> target_cities, Index horizon_steps,
                     Timestamp step_seconds)
    : inputs_(std::move(inputs)), targets_(std::move(targets)), anchor_wind_(std::move(anchor_wind)),
      anchors_(std::move(anchors)), target_cities_(std::move(target_cities)), horizon_steps_(horizon_steps),
      step_seconds_(step_seconds)
{
}

SampleWindow SampleSet::window(Index i) const
{
    const Shape ws = window_shape();
    const Index n = shape_size(ws);
    SampleWindow w;
    w.input = Tensor(ws, std::vector<double>(inputs_.data() + i * n, inputs_.data() + (i + 1) * n));
    w.target = targets_.row(i).transpose();
    w.anchor_time = anchors_[static_cast<std::size_t>(i)];
    w.anchor_wind = anchor_wind_.row(i).transpose();
    return w;
}

Tensor SampleSet::batch_inputs(std::span<const Index> rows) const
{
    const Shape ws = window_shape();
    const Index n = shape_size(ws);
    Tensor out(Shape{static_cast<Index>(rows.size()), ws[0], ws[1], ws[2]});
    for (std::size_t b = 0; b < rows.size(); ++b)
        std::copy_n(inputs_.data() + rows[b] * n, n, out.data() + static_cast<Index>(b) * n);
    return out;
}

Eigen::MatrixXd SampleSet::batch_targets(std::span<const Index> rows) const
{
    Eigen::MatrixXd out(static_cast<Index>(rows.size()), targets_.cols());
    for (std::size_t b = 0; b < rows.size(); ++b) out.row(static_cast<Index>(b)) = targets_.row(rows[b]);
    return out;
}

SampleSet make_windows(const WeatherTable& table, const MinMaxScaler& scaler, RowRange rows, Index steps,
                       Index horizon_steps, std::span<const Index> target_cities, Index wind_feature,
                       Timestamp step_seconds)
{
    if (steps < 1 || horizon_steps < 1) throw InvalidArgument("make_windows: steps and horizon must be positive");
    if (rows.begin < 0 || rows.end > table.rows()) throw InvalidArgument("make_windows: row range outside table");
    if (scaler.columns() != table.columns()) throw ShapeError("make_windows: scaler does not match table columns");
    const Index count = rows.size() - (steps - 1) - horizon_steps;
    if (count < 1)
        throw InvalidArgument("make_windows: " + std::to_string(rows.size()) + " rows cannot hold a " +
                              std::to_string(steps) + "-step window with a " + std::to_string(horizon_steps) +
                              "-step horizon");

    const Index cities = static_cast<Index>(table.cities.size());
    const Index features = static_cast<Index>(table.features.size());
    const Index n = cities * steps * features;
    const Index ntargets = static_cast<Index>(target_cities.size());

    Tensor inputs(Shape{count, cities, steps, features});
    Eigen::MatrixXd targets(count, ntargets);
    Eigen::MatrixXd anchor_wind(count, cities);
    std::vector<Timestamp> anchors(static_cast<std::size_t>(count));

    for (Index s = 0; s < count; ++s) {
        const Index anchor = rows.begin + steps - 1 + s;
        double* dst = inputs.data() + s * n;
        for (Index c = 0; c < cities; ++c)
            for (Index t = 0; t < steps; ++t) {
                const Index row = anchor - steps + 1 + t;
                for (Index f = 0; f < features; ++f) {
                    const Index col = table.column(c, f);
                    dst[(c * steps + t) * features + f] = scaler.transform(table.values(row, col), col);
                }
            }
        for (Index j = 0; j < ntargets; ++j)
            targets(s, j) = table.values(anchor + horizon_steps, table.column(target_cities[static_cast<std::size_t>(j)], wind_feature));
        for (Index c = 0; c < cities; ++c) anchor_wind(s, c) = table.values(anchor, table.column(c, wind_feature));
        anchors[static_cast<std::size_t>(s)] = table.timestamps[static_cast<std::size_t>(anchor)];
    }
    return SampleSet(std::move(inputs), std::move(targets), std::move(anchor_wind), std::move(anchors),
                     std::vector<Index>(target_cities.begin(), target_cities.end()), horizon_steps, step_seconds);
}

SplitRows split_rows(const WeatherTable& table, const SplitConfig& config)
{
    if (table.rows() == 0) throw ConfigError("split: empty table");
    auto check = [](const DateRange& r, const char* name) {
        if (r.empty()) throw ConfigError(std::string("split: ") + name + " range is empty or inverted");
    };
    check(config.train, "train");
    check(config.test, "test");
    if (!config.validation.empty() || config.validation.start != config.validation.end)
        check(config.validation, "validation");

    auto overlap = [](const DateRange& a, const DateRange& b) { return a.start < b.end && b.start < a.end; };
    if (overlap(config.train, config.test)) throw ConfigError("split: train and test ranges overlap");
    if (!config.validation.empty() &&
        (overlap(config.train, config.validation) || overlap(config.validation, config.test)))
        throw ConfigError("split: validation range overlaps train or test");
    if (config.train.start >= config.test.start || (!config.validation.empty() && (config.validation.start < config.train.start ||
                                                                                  config.validation.start >= config.test.start)))
        throw ConfigError("split: ranges are not chronological (train, validation, test)");

    const auto& ts = table.timestamps;
    auto rows_of = [&](const DateRange& r) {
        const auto b = std::lower_bound(ts.begin(), ts.end(), r.start);
        const auto e = std::lower_bound(ts.begin(), ts.end(), r.end);
        return RowRange{static_cast<Index>(b - ts.begin()), static_cast<Index>(e - ts.begin())};
    };
    if (config.train.start > ts.back() || config.test.start > ts.back())
        throw ConfigError("split: ranges start after the table ends (" + format_timestamp(ts.back()) + ")");

    SplitRows out;
    out.train = rows_of(config.train);
    out.test = rows_of(config.test);
    if (config.validation.empty()) {
        if (!(config.validation_tail_fraction > 0.0 && config.validation_tail_fraction < 1.0))
            throw ConfigError("split: validation tail fraction must be in (0,1)");
        const auto tail = static_cast<Index>(std::llround(static_cast<double>(out.train.size()) * config.validation_tail_fraction));
        out.validation = {out.train.end - tail, out.train.end};
        out.train.end -= tail;
    } else {
        out.validation = rows_of(config.validation);
    }
    if (out.train.empty() || out.validation.empty() || out.test.empty())
        throw ConfigError("split: a split range contains no rows of the table");
    return out;
}

SplitSamples split(const WeatherTable& table, const DatasetSchema& schema, int horizon_hours)
{
    SplitSamples out;
    out.rows = split_rows(table, schema.split);
    out.scaler = fit_scaler(table, out.rows.train);
    const Index h = schema.horizon_steps(horizon_hours);
    const auto targets = schema.target_indices();
    const Index wind = schema.wind_feature_index();
    out.train = make_windows(table, out.scaler, out.rows.train, schema.steps, h, targets, wind, schema.step_seconds);
    out.validation =
        make_windows(table, out.scaler, out.rows.validation, schema.steps, h, targets, wind, schema.step_seconds);
    out.test = make_windows(table, out.scaler, out.rows.test, schema.steps, h, targets, wind, schema.step_seconds);
    return out;
}

} // namespace windcast
