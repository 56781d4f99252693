#include "windcast/convert.hpp"

#include <algorithm>
#include <charconv>
#include <optional>
#include <sstream>
#include <string_view>
#include <vector>

#include "windcast/errors.hpp"

namespace windcast {

namespace {

std::string_view trim(std::string_view s)
{
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '#')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string> split_fields(std::string_view line)
{
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        out.emplace_back(trim(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

std::vector<std::string> lines_of(const std::string& text)
{
    std::vector<std::string> out;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) out.push_back(line);
    return out;
}

bool blank(std::string_view s) { return trim(s).empty(); }

long parse_int(const std::string& s, const std::string& what, std::size_t lineno)
{
    long v = 0;
    const auto* end = s.data() + s.size();
    const auto [p, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc{} || p != end)
        throw IngestionError("line " + std::to_string(lineno) + ": bad " + what + " '" + s + "'");
    return v;
}

std::size_t column_of(const std::vector<std::string>& header, const std::string& name)
{
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw ConfigError("convert: column " + name + " not found in header");
    return static_cast<std::size_t>(it - header.begin());
}

using Grid = std::map<Timestamp, std::vector<std::optional<std::string>>>;

ConversionSummary write_grid(const Grid& grid, const DatasetSchema& schema, SourceLayout layout, std::string& out)
{
    std::ostringstream os;
    os << "timestamp";
    for (const auto& c : schema.cities)
        for (const auto& f : schema.features) os << ',' << c << '_' << f;
    os << '\n';
    ConversionSummary s;
    s.layout = layout;
    s.columns = static_cast<Index>(schema.cities.size() * schema.features.size());
    for (const auto& [t, cells] : grid) {
        os << format_timestamp(t);
        for (const auto& cell : cells) {
            os << ',';
            if (cell) os << *cell;
            else ++s.missing_cells;
        }
        os << '\n';
        ++s.rows;
    }
    out = os.str();
    return s;
}

const std::map<std::string, std::string>& knmi_columns()
{
    static const std::map<std::string, std::string> m{{"wind_speed", "FH"},  {"wind_direction", "DD"},
                                                      {"temperature", "T"},  {"dew_point", "TD"},
                                                      {"pressure", "P"},     {"rain", "RH"}};
    return m;
}

ConversionSummary convert_knmi(const std::vector<std::string>& lines, DatasetSchema schema, std::string& out)
{
    if (schema.cities.empty()) schema = netherlands_schema();
    std::vector<std::string> header;
    std::size_t first_data = 0;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const auto t = trim(lines[i]);
        if (t.starts_with("STN,")) {
            header = split_fields(t);
            first_data = i + 1;
        }
    }
    if (header.empty()) throw ConfigError("convert: KNMI header line (STN,YYYYMMDD,HH,...) not found");

    const std::size_t stn = column_of(header, "STN");
    const std::size_t date = column_of(header, "YYYYMMDD");
    const std::size_t hour = column_of(header, "HH");
    std::vector<std::size_t> feature_cols;
    for (const auto& f : schema.features) {
        const auto it = knmi_columns().find(f);
        if (it == knmi_columns().end()) throw ConfigError("convert: no KNMI column for feature " + f);
        feature_cols.push_back(column_of(header, it->second));
    }
    const std::size_t rain = std::find(header.begin(), header.end(), "RH") - header.begin();

    const std::size_t nf = schema.features.size();
    const std::size_t width = schema.cities.size() * nf;
    Grid grid;
    for (std::size_t i = first_data; i < lines.size(); ++i) {
        if (blank(lines[i]) || lines[i].front() == '#') continue;
        const auto f = split_fields(lines[i]);
        if (f.size() < header.size())
            throw IngestionError("line " + std::to_string(i + 1) + ": expected " + std::to_string(header.size()) +
                                 " fields, got " + std::to_string(f.size()));
        const long code = parse_int(f[stn], "station code", i + 1);
        const auto station = knmi_stations().find(static_cast<int>(code));
        if (station == knmi_stations().end())
            throw ConfigError("convert: unknown KNMI station code " + std::to_string(code) + " on line " +
                              std::to_string(i + 1));
        const auto city = std::find(schema.cities.begin(), schema.cities.end(), station->second);
        if (city == schema.cities.end()) continue;

        const long ymd = parse_int(f[date], "date", i + 1);
        const long hh = parse_int(f[hour], "hour", i + 1);
        if (hh < 0 || hh > 24) throw IngestionError("line " + std::to_string(i + 1) + ": hour out of range");
        const Timestamp t = make_timestamp(static_cast<int>(ymd / 10000), static_cast<unsigned>(ymd / 100 % 100),
                                           static_cast<unsigned>(ymd % 100)) +
                            hh * 3600;
        auto& row = grid[t];
        row.resize(width);
        const std::size_t base = static_cast<std::size_t>(city - schema.cities.begin()) * nf;
        for (std::size_t k = 0; k < nf; ++k) {
            std::string v = f[feature_cols[k]];
            if (v.empty()) continue;
            if (feature_cols[k] == rain && v == "-1") v = "0";
            row[base + k] = v;
        }
    }
    if (grid.empty()) throw IngestionError("convert: KNMI file has no data rows for the schema's stations");
    return write_grid(grid, schema, SourceLayout::knmi_hourly, out);
}

ConversionSummary convert_long(const std::vector<std::string>& lines, DatasetSchema schema, std::string& out)
{
    std::size_t h = 0;
    while (h < lines.size() && blank(lines[h])) ++h;
    const auto header = split_fields(lines[h]);
    const std::vector<std::string> features(header.begin() + 2, header.end());
    if (schema.features.empty()) schema.features = features;
    std::vector<std::size_t> feature_cols;
    for (const auto& f : schema.features) feature_cols.push_back(column_of(header, f));

    std::vector<std::vector<std::string>> records;
    for (std::size_t i = h + 1; i < lines.size(); ++i) {
        if (blank(lines[i])) continue;
        auto f = split_fields(lines[i]);
        if (f.size() != header.size())
            throw IngestionError("line " + std::to_string(i + 1) + ": expected " + std::to_string(header.size()) +
                                 " fields, got " + std::to_string(f.size()));
        if (schema.id == "custom" &&
            std::find(schema.cities.begin(), schema.cities.end(), f[1]) == schema.cities.end())
            schema.cities.push_back(f[1]);
        records.push_back(std::move(f));
    }
    if (records.empty()) throw IngestionError("convert: no data rows");

    const std::size_t nf = schema.features.size();
    Grid grid;
    for (const auto& f : records) {
        const auto city = std::find(schema.cities.begin(), schema.cities.end(), f[1]);
        if (city == schema.cities.end()) throw ConfigError("convert: unknown city " + f[1]);
        auto& row = grid[parse_timestamp(f[0])];
        row.resize(schema.cities.size() * nf);
        const std::size_t base = static_cast<std::size_t>(city - schema.cities.begin()) * nf;
        for (std::size_t k = 0; k < nf; ++k)
            if (!f[feature_cols[k]].empty()) row[base + k] = f[feature_cols[k]];
    }
    return write_grid(grid, schema, SourceLayout::long_table, out);
}

} // namespace

std::string to_string(SourceLayout layout)
{
    switch (layout) {
    case SourceLayout::canonical: return "canonical";
    case SourceLayout::knmi_hourly: return "knmi-hourly";
    case SourceLayout::long_table: return "long";
    }
    return "?";
}

const std::map<int, std::string>& knmi_stations()
{
    static const std::map<int, std::string> m{{240, "schiphol"},  {260, "debilt"},    {270, "leeuwarden"},
                                              {280, "eelde"},     {344, "rotterdam"}, {370, "eindhoven"},
                                              {380, "maastricht"}};
    return m;
}

SourceLayout detect_layout(const std::string& text)
{
    for (const auto& line : lines_of(text)) {
        const auto t = trim(line);
        if (t.starts_with("STN,")) return SourceLayout::knmi_hourly;
    }
    for (const auto& line : lines_of(text)) {
        if (blank(line)) continue;
        if (line.front() == '#') continue;
        const auto f = split_fields(line);
        if (f.size() >= 2 && f[0] == "timestamp" && f[1] == "city") return SourceLayout::long_table;
        if (f.size() >= 2 && f[0] == "timestamp") return SourceLayout::canonical;
        break;
    }
    throw ConfigError("convert: unrecognized input layout (expected canonical, long or KNMI hourly CSV)");
}

ConversionSummary convert_to_canonical(const std::string& text, const DatasetSchema& schema, std::string& out)
{
    const SourceLayout layout = detect_layout(text);
    const auto lines = lines_of(text);
    switch (layout) {
    case SourceLayout::knmi_hourly: return convert_knmi(lines, schema, out);
    case SourceLayout::long_table: return convert_long(lines, schema, out);
    case SourceLayout::canonical: break;
    }
    out = text;
    ConversionSummary s;
    s.layout = layout;
    bool header = true;
    for (const auto& line : lines) {
        if (blank(line)) continue;
        const auto f = split_fields(line);
        if (header) {
            s.columns = static_cast<Index>(f.size()) - 1;
            header = false;
            continue;
        }
        ++s.rows;
        s.missing_cells += std::count_if(f.begin() + 1, f.end(), [](const std::string& v) { return v.empty(); });
    }
    return s;
}

} // namespace windcast
