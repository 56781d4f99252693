#include "windcast/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include "windcast/errors.hpp"

namespace windcast {

namespace {

std::string trim(std::string_view s)
{
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return std::string(s);
}

std::vector<std::string> split_list(const std::string& text)
{
    std::vector<std::string> out;
    std::string item;
    std::istringstream is(text);
    while (std::getline(is, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

template <class T>
T parse_number(const std::string& text, const std::string& key)
{
    T v{};
    const auto* end = text.data() + text.size();
    const auto [p, ec] = std::from_chars(text.data(), end, v);
    if (ec != std::errc{} || p != end) throw ConfigError("config: bad value '" + text + "' for " + key);
    return v;
}

void apply_train_key(const std::string& key, const std::string& value, TrainOverrides& o)
{
    if (key == "max_epochs" || key == "epochs") o.max_epochs = parse_number<int>(value, key);
    else if (key == "batch_size") o.batch_size = parse_number<Index>(value, key);
    else if (key == "learning_rate" || key == "lr") o.learning_rate = parse_number<double>(value, key);
    else if (key == "patience") o.patience = parse_number<int>(value, key);
    else throw ConfigError("config: unknown training key '" + key + "'");
}

} // namespace

KeyValueSections parse_key_values(const std::string& text)
{
    KeyValueSections out;
    std::string section = "run";
    std::istringstream is(text);
    std::string raw;
    int lineno = 0;
    while (std::getline(is, raw)) {
        ++lineno;
        const auto hash = raw.find_first_of("#;");
        const std::string line = trim(std::string_view(raw).substr(0, hash));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']' || line.size() < 3)
                throw ConfigError("config line " + std::to_string(lineno) + ": malformed section header");
            section = trim(std::string_view(line).substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(std::string_view(line).substr(0, eq));
        if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
        out[section][key] = trim(std::string_view(line).substr(eq + 1));
    }
    return out;
}

TrainConfig TrainOverrides::apply(TrainConfig base) const
{
    if (max_epochs) base.max_epochs = *max_epochs;
    if (batch_size) base.batch_size = *batch_size;
    if (learning_rate) base.learning_rate = *learning_rate;
    if (patience) base.patience = *patience;
    return base;
}

TrainConfig RunConfig::train_for(ModelKind kind) const
{
    const auto it = per_model.find(kind);
    return it == per_model.end() ? train : it->second.apply(train);
}

DatasetSchema RunConfig::resolved_schema() const
{
    DatasetSchema s = schema_by_id(schema);
    if (step_seconds > 0) s.step_seconds = step_seconds;
    if (!horizons.empty()) s.horizons_hours = horizons;
    if (train_range) s.split.train = *train_range;
    if (validation_range) s.split.validation = *validation_range;
    if (test_range) s.split.test = *test_range;
    return s;
}

std::string RunConfig::canonical_text() const
{
    std::ostringstream os;
    os.precision(17);
    const auto train_line = [&os](const TrainConfig& t) {
        os << "max_epochs=" << t.max_epochs << " batch_size=" << t.batch_size << " learning_rate=" << t.learning_rate
           << " patience=" << t.patience << '\n';
    };
    const DatasetSchema s = resolved_schema();
    os << "schema=" << schema << " step_seconds=" << s.step_seconds << '\n';
    os << "split=" << s.split.train.start << '/' << s.split.train.end << ' ' << s.split.validation.start << '/'
       << s.split.validation.end << ' ' << s.split.test.start << '/' << s.split.test.end << '\n';
    train_line(train);
    for (const auto& [kind, o] : per_model) {
        os << to_string(kind) << ": ";
        train_line(o.apply(train));
    }
    return os.str();
}

void RunConfig::validate() const
{
    const DatasetSchema s = resolved_schema();
    if (s.horizons_hours.empty()) throw ConfigError("config: no horizons");
    for (int h : s.horizons_hours) (void)s.horizon_steps(h);
    if (seeds.empty()) throw ConfigError("config: no seeds");
    try {
        train.validate();
        for (const auto& [kind, o] : per_model) o.apply(train).validate();
    } catch (const InvalidArgument& e) {
        throw ConfigError(e.what());
    }
}

void apply_config(const KeyValueSections& sections, RunConfig& config)
{
    for (const auto& [section, keys] : sections) {
        if (section == "run") {
            for (const auto& [key, value] : keys) {
                if (key == "dataset") config.dataset = value;
                else if (key == "schema") config.schema = value;
                else if (key == "models") config.models = parse_model_list(value);
                else if (key == "horizons") config.horizons = parse_int_list(value);
                else if (key == "seeds") config.seeds = parse_seed_list(value);
                else if (key == "out") config.out = value;
                else if (key == "format") config.format = value;
                else if (key == "train_range") config.train_range = parse_date_range(value);
                else if (key == "validation_range") config.validation_range = parse_date_range(value);
                else if (key == "test_range") config.test_range = parse_date_range(value);
                else if (key == "step_seconds") config.step_seconds = parse_number<Timestamp>(value, key);
                else throw ConfigError("config: unknown key '" + key + "' in [run]");
            }
        } else if (section == "train") {
            TrainOverrides o;
            for (const auto& [key, value] : keys) apply_train_key(key, value, o);
            config.train = o.apply(config.train);
        } else {
            ModelKind kind;
            try {
                kind = parse_model_kind(section);
            } catch (const std::exception&) {
                throw ConfigError("config: unknown section [" + section + "]");
            }
            auto& o = config.per_model[kind];
            for (const auto& [key, value] : keys) apply_train_key(key, value, o);
        }
    }
}

RunConfig load_run_config(const std::filesystem::path& path, RunConfig base)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    apply_config(parse_key_values(buf.str()), base);
    return base;
}

DateRange parse_date_range(const std::string& text)
{
    const auto slash = text.find('/');
    if (slash == std::string::npos) throw ConfigError("config: date range '" + text + "' must be start/end");
    try {
        const DateRange r{parse_timestamp(trim(text.substr(0, slash))), parse_timestamp(trim(text.substr(slash + 1)))};
        if (r.empty()) throw ConfigError("config: date range '" + text + "' is empty or inverted");
        return r;
    } catch (const InvalidArgument& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
}

std::vector<int> parse_int_list(const std::string& text)
{
    std::vector<int> out;
    for (const auto& item : split_list(text)) out.push_back(parse_number<int>(item, "list item"));
    return out;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text)
{
    std::vector<std::uint64_t> out;
    for (const auto& item : split_list(text)) out.push_back(parse_number<std::uint64_t>(item, "seed"));
    return out;
}

std::vector<ModelKind> parse_model_list(const std::string& text)
{
    if (trim(text) == "all") return trainable_kinds();
    std::vector<ModelKind> out;
    for (const auto& item : split_list(text)) {
        try {
            out.push_back(parse_model_kind(item));
        } catch (const std::exception&) {
            throw ConfigError("unknown model kind '" + item + "'");
        }
    }
    return out;
}

} // namespace windcast
