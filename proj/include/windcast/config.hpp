#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "windcast/data.hpp"
#include "windcast/models.hpp"
#include "windcast/train.hpp"

namespace windcast {

/// Parsed `key = value` text grouped by `[section]`. Keys before the first
/// section header land in section "run". `#` and `;` start comments.
using KeyValueSections = std::map<std::string, std::map<std::string, std::string>>;

KeyValueSections parse_key_values(const std::string& text);

/// Training fields a model section may override.
struct TrainOverrides {
    std::optional<int> max_epochs;
    std::optional<Index> batch_size;
    std::optional<double> learning_rate;
    std::optional<int> patience;

    TrainConfig apply(TrainConfig base) const;
};

struct RunConfig {
    std::filesystem::path dataset;
    std::string schema = "denmark";
    std::vector<ModelKind> models;
    /// Empty: the schema's default horizons.
    std::vector<int> horizons;
    std::vector<std::uint64_t> seeds{42};
    std::filesystem::path out = ".";
    std::string format = "markdown";
    /// Zero: the schema's default row spacing.
    Timestamp step_seconds = 0;
    /// Split overrides, written `start/end` (end exclusive).
    std::optional<DateRange> train_range, validation_range, test_range;
    TrainConfig train;
    std::map<ModelKind, TrainOverrides> per_model;

    TrainConfig train_for(ModelKind kind) const;
    /// Schema with this config's step spacing and horizons applied.
    DatasetSchema resolved_schema() const;
    /// Stable text of every field that affects results.
    std::string canonical_text() const;
    /// Throws ConfigError on invalid horizons, seeds or train settings.
    void validate() const;
};

/// Applies a config file on top of `config`; unknown sections and keys are
/// errors.
void apply_config(const KeyValueSections& sections, RunConfig& config);
RunConfig load_run_config(const std::filesystem::path& path, RunConfig base = {});

DateRange parse_date_range(const std::string& text);
std::vector<int> parse_int_list(const std::string& text);
std::vector<std::uint64_t> parse_seed_list(const std::string& text);
std::vector<ModelKind> parse_model_list(const std::string& text);

} // namespace windcast
