#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>

#include "windcast/data.hpp"

namespace windcast {

enum class SourceLayout { canonical, knmi_hourly, long_table };

std::string to_string(SourceLayout layout);

/// Guesses the layout from the first non-comment lines; throws ConfigError
/// when none matches.
SourceLayout detect_layout(const std::string& text);

/// KNMI station number to city name for the Netherlands schema.
const std::map<int, std::string>& knmi_stations();

struct ConversionSummary {
    SourceLayout layout = SourceLayout::canonical;
    Index rows = 0;
    Index columns = 0;
    /// Cells left empty in the output (filled later by ingestion).
    Index missing_cells = 0;
};

/// Rewrites an upstream export as a canonical CSV. Canonical input is copied
/// byte for byte. Values stay in source units.
ConversionSummary convert_to_canonical(const std::string& text, const DatasetSchema& schema, std::string& out);

} // namespace windcast
