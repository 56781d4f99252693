#pragma once

// Synthetic weather used by the tests. Nothing here mirrors real observations.

#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>
#include <string>

#include "windcast/data.hpp"

namespace fixture {

using windcast::Index;
using windcast::Timestamp;

/// Table whose cell (r, col) holds 1000·r + col, so any value identifies
/// its row and column.
inline windcast::WeatherTable ramp_table(Index rows, Index cities, Index features, Timestamp start = 0)
{
    windcast::WeatherTable t;
    for (Index c = 0; c < cities; ++c) t.cities.push_back("c" + std::to_string(c));
    for (Index f = 0; f < features; ++f) t.features.push_back(f == 0 ? "wind_speed" : "f" + std::to_string(f));
    t.values.resize(rows, cities * features);
    for (Index r = 0; r < rows; ++r) {
        t.timestamps.push_back(start + r * 3600);
        for (Index col = 0; col < cities * features; ++col) t.values(r, col) = 1000.0 * static_cast<double>(r) + static_cast<double>(col);
    }
    return t;
}

/// Canonical CSV for `schema` with `rows` hourly rows from `start`. Wind is an
/// AR(1) process with a diurnal cycle, shared across cities with a lag so that
/// upwind cities carry information about the targets.
inline std::string synthetic_csv(const windcast::DatasetSchema& schema, Timestamp start, Index rows, std::uint64_t seed)
{
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> noise(0.0, 1.0);
    const auto ncities = static_cast<Index>(schema.cities.size());
    std::vector<double> driver(static_cast<std::size_t>(rows + ncities * 2), 6.0);
    for (std::size_t i = 1; i < driver.size(); ++i)
        driver[i] = 6.0 + 0.95 * (driver[i - 1] - 6.0) + 0.6 * noise(gen);

    std::ostringstream out;
    out << "timestamp";
    for (const auto& c : schema.cities)
        for (const auto& f : schema.features) out << ',' << c << '_' << f;
    out << '\n';
    char buf[32];
    for (Index r = 0; r < rows; ++r) {
        const Timestamp t = start + r * schema.step_seconds;
        out << windcast::format_timestamp(t);
        const double hour = static_cast<double>((t / 3600) % 24);
        for (Index c = 0; c < ncities; ++c) {
            const double wind = std::max(0.0, driver[static_cast<std::size_t>(r + 2 * (ncities - c))] +
                                                  1.5 * std::sin(hour / 24.0 * 6.283185307179586) + 0.2 * noise(gen));
            for (const auto& f : schema.features) {
                double v = 0;
                if (f == schema.wind_feature) v = wind;
                else if (f == "wind_direction") v = std::fmod(200.0 + 10.0 * wind + 5.0 * noise(gen) + 360.0, 360.0);
                else if (f == "pressure") v = 1013.0 - 0.8 * wind + noise(gen);
                else if (f == "rain") v = std::max(0.0, noise(gen) - 1.0);
                else v = 8.0 + 5.0 * std::sin(hour / 24.0 * 6.283185307179586 - 1.0) + noise(gen);
                std::snprintf(buf, sizeof buf, ",%.4f", v);
                out << buf;
            }
        }
        out << '\n';
    }
    return out.str();
}

} // namespace fixture
