#include <doctest.h>

#include <cmath>
#include <sstream>

#include "fixtures.hpp"
#include "windcast/errors.hpp"

using namespace windcast;

namespace {

WeatherTable parse(const std::string& text, DatasetSchema& schema)
{
    std::istringstream in(text);
    return load_csv(in, schema);
}

WeatherTable parse(const std::string& text)
{
    DatasetSchema s = custom_schema();
    return parse(text, s);
}

MinMaxScaler identity_scaler(Index columns)
{
    return MinMaxScaler(Eigen::RowVectorXd::Zero(columns), Eigen::RowVectorXd::Ones(columns));
}

} // namespace

TEST_CASE("timestamps")
{
    CHECK(parse_timestamp("1970-01-01T00:00:00Z") == 0);
    CHECK(parse_timestamp("2000-01-01 06:00") == make_timestamp(2000, 1, 1, 6));
    CHECK(parse_timestamp("2019-03-04") == make_timestamp(2019, 3, 4));
    CHECK(format_timestamp(make_timestamp(2010, 12, 31, 23)) == "2010-12-31T23:00:00Z");
    CHECK(parse_timestamp(format_timestamp(1234567890)) == 1234567890);
    CHECK_THROWS_AS(parse_timestamp("yesterday"), InvalidArgument);
    CHECK_THROWS_AS(parse_timestamp("2001-02-30T00:00"), InvalidArgument);
    CHECK_THROWS_AS(parse_timestamp("2001-02-03T25:00"), InvalidArgument);
}

TEST_CASE("schemas")
{
    const auto dk = denmark_schema();
    CHECK(dk.window_shape() == Shape{5, 4, 4});
    CHECK(dk.target_indices() == std::vector<Index>{2, 3, 4});
    CHECK(dk.wind_feature_index() == 2);
    CHECK(dk.horizon_steps(6) == 6);
    const auto nl = netherlands_schema();
    CHECK(nl.window_shape() == Shape{7, 6, 6});
    CHECK(nl.target_indices().size() == 7);
    CHECK(nl.wind_feature_index() == 0);
    CHECK(nl.split.validation.empty());
    CHECK(schema_by_id("dk").id == "denmark");
    CHECK_THROWS_AS(schema_by_id("atlantis"), ConfigError);

    DatasetSchema three_hourly = dk;
    three_hourly.step_seconds = 3 * 3600;
    CHECK(three_hourly.horizon_steps(6) == 2);
    CHECK_THROWS_AS(three_hourly.horizon_steps(4), ConfigError);
    CHECK_THROWS_AS(dk.horizon_steps(0), ConfigError);
}

TEST_CASE("CSV ingestion")
{
    SUBCASE("a single missing cell is forward-filled")
    {
        const auto t = parse("timestamp,a_wind_speed,a_temp\n"
                             "2000-01-01T00:00,1,10\n"
                             "2000-01-01T01:00,,11\n"
                             "2000-01-01T02:00,3,12\n");
        CHECK(t.fills.filled_cells == 1);
        CHECK(t.fills.inserted_rows == 0);
        CHECK(t.values(1, 0) == 1.0);
        CHECK(t.rows() == 3);
        CHECK(t.station_rows() == 3);
    }
    SUBCASE("leading gaps are back-filled, missing hours inserted")
    {
        const auto t = parse("timestamp,a_wind_speed,b_wind_speed\n"
                             "2000-01-01T00:00,NaN,5\n"
                             "2000-01-01T01:00,2,6\n"
                             "2000-01-01T04:00,4,7\n");
        CHECK(t.rows() == 5);
        CHECK(t.fills.source_rows == 3);
        CHECK(t.fills.inserted_rows == 2);
        CHECK(t.values(0, 0) == 2.0);
        CHECK(t.values(2, 0) == 2.0);
        CHECK(t.values(3, 1) == 6.0);
        CHECK(t.values(4, 1) == 7.0);
        CHECK(t.fills.filled_cells == 1 + 2 * 2);
        CHECK(t.station_rows() == 10);
    }
    SUBCASE("rows are reordered by timestamp")
    {
        const auto t = parse("timestamp,a_wind_speed\n"
                             "2000-01-01T02:00,3\n"
                             "2000-01-01T00:00,1\n"
                             "2000-01-01T01:00,2\n");
        CHECK(t.values(0, 0) == 1.0);
        CHECK(t.values(1, 0) == 2.0);
        CHECK(t.values(2, 0) == 3.0);
        CHECK(t.timestamps[0] == make_timestamp(2000, 1, 1));
    }
    SUBCASE("columns are placed city-major whatever the header order")
    {
        DatasetSchema s = custom_schema();
        const auto t = parse("timestamp,a_x,b_x,a_wind_speed,b_wind_speed\n2000-01-01T00:00,1,2,3,4\n", s);
        CHECK(s.cities == std::vector<std::string>{"a", "b"});
        CHECK(s.features == std::vector<std::string>{"x", "wind_speed"});
        CHECK(s.target_cities == s.cities);
        CHECK(t.values(0, t.column(0, 0)) == 1.0);
        CHECK(t.values(0, t.column(1, 0)) == 2.0);
        CHECK(t.values(0, t.column(0, 1)) == 3.0);
        CHECK(t.values(0, t.column(1, 1)) == 4.0);
    }
    SUBCASE("errors")
    {
        auto fails = [](const std::string& text) { CHECK_THROWS_AS(parse(text), IngestionError); };
        fails("");
        fails("time,a_x\n2000-01-01,1\n");
        fails("timestamp,ax\n2000-01-01,1\n");
        fails("timestamp,a_x,a_x\n2000-01-01,1,2\n");
        fails("timestamp,a_x\n");
        fails("timestamp,a_x\nnot-a-date,1\n");
        fails("timestamp,a_x\n2000-01-01T00:00,1,2\n");
        fails("timestamp,a_x\n2000-01-01T00:00,abc\n");
        fails("timestamp,a_x\n2000-01-01T00:00,1\n2000-01-01T00:00,2\n");
        fails("timestamp,a_x\n2000-01-01T00:00,1\n2000-01-01T00:30,2\n");
        fails("timestamp,a_x,a_y\n2000-01-01T00:00,1,\n2000-01-01T01:00,2,\n");

        DatasetSchema dk = denmark_schema();
        CHECK_THROWS_AS(parse("timestamp,aalborg_temperature\n2000-01-01,1\n", dk), IngestionError);
        CHECK_THROWS_AS(parse("timestamp,paris_temperature\n2000-01-01,1\n", dk), IngestionError);
        CHECK_THROWS_AS(load_csv(std::filesystem::path("/nonexistent/file.csv"), dk), IngestionError);
    }
    SUBCASE("error messages carry the line number")
    {
        try {
            parse("timestamp,a_x\n2000-01-01T00:00,1\n2000-01-01T01:00,oops\n");
            FAIL("expected an ingestion error");
        } catch (const IngestionError& e) {
            CHECK(std::string(e.what()).find("line 3") != std::string::npos);
        }
    }
}

TEST_CASE("min-max scaler")
{
    WeatherTable t = fixture::ramp_table(3, 1, 2);
    t.values << 0, 7, 10, 7, 5, 7;
    const MinMaxScaler s = fit_scaler(t, {0, 3});
    CHECK(s.transform(5.0, 0) == 0.5);
    CHECK(s.transform(12.0, 0) == doctest::Approx(1.2).epsilon(1e-15));
    CHECK(s.transform(-1.0, 0) == doctest::Approx(-0.1).epsilon(1e-15));
    CHECK(s.is_constant(1));
    CHECK(s.transform(7.0, 1) == 0.0);
    CHECK(s.transform(100.0, 1) == 0.0);
    CHECK(s.inverse(0.0, 1) == 7.0);

    std::mt19937_64 gen(41);
    std::uniform_real_distribution<double> u(-50, 50);
    for (int i = 0; i < 1000; ++i) {
        const double x = u(gen);
        CHECK(std::abs(s.inverse(s.transform(x, 0), 0) - x) <= 1e-12 * std::max(1.0, std::abs(x)));
    }
    const Eigen::MatrixXd m = s.transform(t.values);
    CHECK(m.col(0).minCoeff() == 0.0);
    CHECK(m.col(0).maxCoeff() == 1.0);
    CHECK(s.inverse(m).col(0) == t.values.col(0));

    CHECK_THROWS_AS(fit_scaler(t, {0, 0}), InvalidArgument);
    CHECK_THROWS_AS(fit_scaler(t, {0, 4}), InvalidArgument);
    CHECK_THROWS_AS(s.transform(Eigen::MatrixXd::Zero(2, 3)), ShapeError);
}

TEST_CASE("scaler statistics come from training rows only")
{
    WeatherTable t = fixture::ramp_table(10, 1, 1);
    const MinMaxScaler s = fit_scaler(t, {2, 5});
    CHECK(s.min()(0) == 2000.0);
    CHECK(s.max()(0) == 4000.0);
    // Perturbing rows outside the fit range leaves the scaler unchanged.
    t.values(0, 0) = -1e9;
    t.values(9, 0) = 1e9;
    const MinMaxScaler again = fit_scaler(t, {2, 5});
    CHECK(again.min() == s.min());
    CHECK(again.max() == s.max());
}

TEST_CASE("window counts are N - (T-1) - horizon")
{
    const std::vector<Index> targets{0};
    for (Index n : {10, 25, 100})
        for (Index steps : {1, 4, 6})
            for (Index h : {1, 2, 6, 24}) {
                const auto t = fixture::ramp_table(n, 2, 2);
                const Index expected = n - (steps - 1) - h;
                if (expected < 1) {
                    CHECK_THROWS_AS(make_windows(t, identity_scaler(4), {0, n}, steps, h, targets, 0), InvalidArgument);
                    continue;
                }
                CHECK(make_windows(t, identity_scaler(4), {0, n}, steps, h, targets, 0).size() == expected);
            }
    const auto t = fixture::ramp_table(100, 1, 1);
    // Anchors 3..93 inclusive: 100 - 3 - 6.
    CHECK(make_windows(t, identity_scaler(1), {0, 100}, 4, 6, targets, 0).size() == 91);
    const auto small = fixture::ramp_table(10, 1, 1);
    CHECK_THROWS_AS(make_windows(small, identity_scaler(1), {0, 10}, 6, 6, targets, 0), InvalidArgument);
}

TEST_CASE("window contents")
{
    const auto t = fixture::ramp_table(20, 3, 2, 7200);
    const std::vector<Index> targets{2, 0};
    const SampleSet s = make_windows(t, identity_scaler(6), {0, 20}, 4, 6, targets, 0);
    REQUIRE(s.size() == 11);
    CHECK(s.window_shape() == Shape{3, 4, 2});

    const SampleWindow w = s.window(0);
    for (Index c = 0; c < 3; ++c)
        for (Index step = 0; step < 4; ++step)
            for (Index f = 0; f < 2; ++f) CHECK(w.input(c, step, f) == 1000.0 * step + t.column(c, f));
    CHECK(w.target(0) == 1000.0 * 9 + t.column(2, 0));
    CHECK(w.target(1) == 1000.0 * 9 + t.column(0, 0));
    CHECK(w.anchor_time == 7200 + 3 * 3600);
    CHECK(s.target_time(0) == 7200 + 9 * 3600);
    for (Index c = 0; c < 3; ++c) CHECK(w.anchor_wind(c) == 1000.0 * 3 + t.column(c, 0));

    const SampleWindow last = s.window(10);
    CHECK(last.target(0) == 1000.0 * 19 + t.column(2, 0));

    const std::vector<Index> rows{3, 1};
    const Tensor b = s.batch_inputs(rows);
    CHECK(b.shape() == Shape{2, 3, 4, 2});
    CHECK(b(0, 0, 0, 0) == 3000.0);
    CHECK(b(1, 2, 3, 1) == 1000.0 * 4 + t.column(2, 1));
    CHECK(s.batch_targets(rows)(1, 0) == s.targets()(1, 0));
}

TEST_CASE("no window reads beyond its split")
{
    DatasetSchema schema = custom_schema();
    schema.cities = {"a", "b"};
    schema.features = {"wind_speed", "x"};
    schema.target_cities = {"b"};
    schema.steps = 3;
    schema.split.train = {0, 40 * 3600};
    schema.split.validation = {40 * 3600, 60 * 3600};
    schema.split.test = {60 * 3600, 100 * 3600};
    const WeatherTable t = fixture::ramp_table(100, 2, 2);

    for (int h : {1, 5}) {
        const SplitSamples s = split(t, schema, h);
        CHECK(s.train.size() == 40 - 2 - h);
        CHECK(s.validation.size() == 20 - 2 - h);
        CHECK(s.test.size() == 40 - 2 - h);
        auto within = [&](const SampleSet& set, RowRange rows) {
            for (Index i = 0; i < set.size(); ++i) {
                const Index target_row = static_cast<Index>(set.targets()(i, 0)) / 1000;
                const Index first_row = set.anchors()[static_cast<std::size_t>(i)] / 3600 - (schema.steps - 1);
                CHECK(first_row >= rows.begin);
                CHECK(target_row < rows.end);
            }
        };
        within(s.train, s.rows.train);
        within(s.validation, s.rows.validation);
        within(s.test, s.rows.test);
        CHECK(s.train.target_time(s.train.size() - 1) < s.validation.anchors().front());
        CHECK(s.validation.target_time(s.validation.size() - 1) < s.test.anchors().front());
        CHECK(s.scaler.min()(0) == 0.0);
        CHECK(s.scaler.max()(0) == 39000.0);
    }
}

TEST_CASE("windowing is deterministic")
{
    const DatasetSchema schema = [] {
        DatasetSchema s = denmark_schema();
        s.split.train = {make_timestamp(2009, 1, 1), make_timestamp(2009, 1, 20)};
        s.split.validation = {make_timestamp(2009, 1, 20), make_timestamp(2009, 1, 25)};
        s.split.test = {make_timestamp(2009, 1, 25), make_timestamp(2009, 2, 1)};
        return s;
    }();
    const std::string csv = fixture::synthetic_csv(schema, make_timestamp(2009, 1, 1), 31 * 24, 3);
    DatasetSchema a = schema, b = schema;
    const auto ta = parse(csv, a), tb = parse(csv, b);
    CHECK(ta.values == tb.values);
    const auto sa = split(ta, schema, 6), sb = split(tb, schema, 6);
    CHECK(sa.train == sb.train);
    CHECK(sa.validation == sb.validation);
    CHECK(sa.test == sb.test);
    CHECK(sa.train.size() == 19 * 24 - 3 - 6);
    CHECK(sa.train.target_count() == 3);
}

TEST_CASE("split configuration")
{
    const WeatherTable t = fixture::ramp_table(200, 1, 1, make_timestamp(2011, 1, 1));
    SplitConfig c;
    c.train = {make_timestamp(2011, 1, 1), make_timestamp(2011, 1, 5)};
    c.test = {make_timestamp(2011, 1, 5), make_timestamp(2011, 1, 10)};

    SUBCASE("empty validation takes the last tenth of training rows")
    {
        const SplitRows r = split_rows(t, c);
        CHECK(r.train.begin == 0);
        CHECK(r.train.end == 86);
        CHECK(r.validation.begin == 86);
        CHECK(r.validation.end == 96);
        CHECK(r.test.begin == 96);
        CHECK(r.test.end == 200);
    }
    SUBCASE("rejections")
    {
        SplitConfig bad = c;
        bad.test = {make_timestamp(2011, 1, 4), make_timestamp(2011, 1, 9)};
        CHECK_THROWS_AS(split_rows(t, bad), ConfigError);
        bad = c;
        bad.train = {make_timestamp(2011, 1, 5), make_timestamp(2011, 1, 1)};
        CHECK_THROWS_AS(split_rows(t, bad), ConfigError);
        bad = c;
        std::swap(bad.train, bad.test);
        CHECK_THROWS_AS(split_rows(t, bad), ConfigError);
        bad = c;
        bad.validation = {make_timestamp(2011, 1, 3), make_timestamp(2011, 1, 6)};
        CHECK_THROWS_AS(split_rows(t, bad), ConfigError);
        bad = c;
        bad.validation_tail_fraction = 1.0;
        CHECK_THROWS_AS(split_rows(t, bad), ConfigError);
        bad = c;
        bad.train = {make_timestamp(2030, 1, 1), make_timestamp(2031, 1, 1)};
        bad.test = {make_timestamp(2031, 1, 1), make_timestamp(2032, 1, 1)};
        CHECK_THROWS_AS(split_rows(t, bad), ConfigError);
        bad = c;
        bad.train = {make_timestamp(2010, 1, 1), make_timestamp(2010, 6, 1)};
        CHECK_THROWS_AS(split_rows(t, bad), ConfigError);
    }
}

TEST_CASE("the Netherlands schema validates on the last 10% of 2011-2018")
{
    DatasetSchema schema = netherlands_schema();
    const Timestamp start = make_timestamp(2018, 12, 1);
    const Index rows = 31 * 24 + 48;
    const WeatherTable t = fixture::ramp_table(rows, 7, 6, start);
    const SplitRows r = split_rows(t, schema.split);
    CHECK(r.train.begin == 0);
    CHECK(r.validation.size() == 74);
    CHECK(r.train.size() == 31 * 24 - 74);
    CHECK(r.test.begin == 31 * 24);
    CHECK(r.test.end == rows);
}
