#include "windcast/metrics.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cstdio>
#include <iomanip>
#include <set>
#include <sstream>

#include <json.hpp>

namespace windcast {

namespace {

void check_lengths(const Eigen::Ref<const Eigen::VectorXd>& y, const Eigen::Ref<const Eigen::VectorXd>& y_hat,
                   const char* name)
{
    if (y.size() != y_hat.size())
        throw InvalidArgument(std::string(name) + ": length mismatch " + std::to_string(y.size()) + " vs " +
                              std::to_string(y_hat.size()));
    if (y.size() == 0) throw InvalidArgument(std::string(name) + ": empty input");
}

std::string full(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string fixed(double v, int precision)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.*f", precision, v);
    return buf;
}

} // namespace

double mae(const Eigen::Ref<const Eigen::VectorXd>& y, const Eigen::Ref<const Eigen::VectorXd>& y_hat)
{
    check_lengths(y, y_hat, "mae");
    return (y - y_hat).cwiseAbs().sum() / static_cast<double>(y.size());
}

double mse(const Eigen::Ref<const Eigen::VectorXd>& y, const Eigen::Ref<const Eigen::VectorXd>& y_hat)
{
    check_lengths(y, y_hat, "mse");
    return (y - y_hat).squaredNorm() / static_cast<double>(y.size());
}

double median(std::vector<double> values)
{
    if (values.empty()) throw InvalidArgument("median of nothing");
    std::sort(values.begin(), values.end());
    const auto n = values.size();
    return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

// ---- evaluation -------------------------------------------------------------

ExperimentReport evaluate_predictions(const Eigen::MatrixXd& predictions, const SampleSet& test,
                                      const EvaluationContext& context, const std::string& model_name,
                                      Index parameters)
{
    if (test.empty()) throw ConfigError("evaluate: empty test set");
    if (predictions.rows() != test.size() || predictions.cols() != test.target_count())
        throw ConfigError("evaluate: predictions do not match the test targets");
    ExperimentReport r;
    r.dataset = context.dataset;
    r.model = model_name;
    r.horizon_hours = context.horizon_hours;
    r.parameters = parameters;
    r.seed = context.seed;
    r.epochs = context.epochs;
    r.samples = test.size();
    r.fills = context.fills;
    r.config_digest = context.config_digest;
    for (Index j = 0; j < test.target_count(); ++j) {
        const Index city = test.target_cities()[static_cast<std::size_t>(j)];
        CityError e;
        e.city = city < static_cast<Index>(context.city_names.size()) ? context.city_names[static_cast<std::size_t>(city)]
                                                                      : "city" + std::to_string(city);
        e.mae = mae(test.targets().col(j), predictions.col(j));
        e.mse = mse(test.targets().col(j), predictions.col(j));
        r.cities.push_back(e);
    }
    for (const auto& c : r.cities) {
        r.mae += c.mae;
        r.mse += c.mse;
    }
    r.mae /= static_cast<double>(r.cities.size());
    r.mse /= static_cast<double>(r.cities.size());
    return r;
}

ExperimentReport evaluate(Model& model, const SampleSet& test, const EvaluationContext& context)
{
    if (test.target_cities() != model.spec().targets)
        throw ConfigError("evaluate: model targets do not match the test set");
    return evaluate_predictions(model.predict(test), test, context, to_string(model.spec().kind),
                                count_parameters(model));
}

std::map<std::string, double> per_city_mean_over_horizons(std::span<const ExperimentReport> reports,
                                                          std::span<const int> expected)
{
    if (reports.empty()) throw InvalidArgument("per_city_mean_over_horizons: no reports");
    std::set<int> horizons;
    std::map<std::string, double> sums;
    for (const auto& r : reports) {
        if (r.dataset != reports[0].dataset || r.model != reports[0].model)
            throw InvalidArgument("per_city_mean_over_horizons: reports mix datasets or models");
        if (!horizons.insert(r.horizon_hours).second)
            throw InvalidArgument("per_city_mean_over_horizons: duplicate horizon " + std::to_string(r.horizon_hours));
        std::set<std::string> names;
        for (const auto& c : r.cities) names.insert(c.city);
        std::set<std::string> first;
        for (const auto& c : reports[0].cities) first.insert(c.city);
        if (names != first) throw InvalidArgument("per_city_mean_over_horizons: city sets differ between horizons");
        for (const auto& c : r.cities) sums[c.city] += c.mae;
    }
    if (!expected.empty()) {
        const std::set<int> want(expected.begin(), expected.end());
        for (int h : want)
            if (!horizons.contains(h))
                throw InvalidArgument("per_city_mean_over_horizons: missing horizon " + std::to_string(h));
        for (int h : horizons)
            if (!want.contains(h))
                throw InvalidArgument("per_city_mean_over_horizons: unexpected horizon " + std::to_string(h));
    }
    for (auto& [city, s] : sums) s /= static_cast<double>(reports.size());
    return sums;
}

// ---- formats ----------------------------------------------------------------

ReportFormat parse_report_format(const std::string& name)
{
    if (name == "json") return ReportFormat::json;
    if (name == "csv") return ReportFormat::csv;
    if (name == "markdown" || name == "md") return ReportFormat::markdown;
    throw InvalidArgument("unknown report format '" + name + "'");
}

namespace {

nlohmann::json to_json(const ExperimentReport& r)
{
    nlohmann::json cities = nlohmann::json::array();
    for (const auto& c : r.cities) cities.push_back({{"city", c.city}, {"mae", c.mae}, {"mse", c.mse}});
    return {{"dataset", r.dataset},
            {"model", r.model},
            {"horizon", r.horizon_hours},
            {"seed", r.seed},
            {"epochs", r.epochs},
            {"params", r.parameters},
            {"samples", r.samples},
            {"mae", r.mae},
            {"mse", r.mse},
            {"cities", cities},
            {"fills",
             {{"source_rows", r.fills.source_rows},
              {"inserted_rows", r.fills.inserted_rows},
              {"filled_cells", r.fills.filled_cells}}},
            {"config_digest", r.config_digest}};
}

std::string emit_csv(std::span<const ExperimentReport> reports)
{
    std::string out = "model,dataset,horizon,city,mae,mse,params,seed,epochs\n";
    for (const auto& r : reports)
        for (const auto& c : r.cities)
            out += r.model + "," + r.dataset + "," + std::to_string(r.horizon_hours) + "," + c.city + "," + full(c.mae) +
                   "," + full(c.mse) + "," + std::to_string(r.parameters) + "," + std::to_string(r.seed) + "," +
                   std::to_string(r.epochs) + "\n";
    return out;
}

std::string emit_markdown(std::span<const ExperimentReport> reports, const MarkdownOptions& options)
{
    std::vector<std::string> models;
    std::set<int> horizon_set;
    std::map<std::pair<std::string, int>, std::vector<const ExperimentReport*>> cells;
    for (const auto& r : reports) {
        if (std::find(models.begin(), models.end(), r.model) == models.end()) models.push_back(r.model);
        horizon_set.insert(r.horizon_hours);
        cells[{r.model, r.horizon_hours}].push_back(&r);
    }
    const std::vector<int> horizons(horizon_set.begin(), horizon_set.end());
    const std::size_t ncols = horizons.size() * 2;

    // value[m][col]; MAE columns first, then MSE.
    std::vector<std::vector<std::optional<double>>> value(models.size(), std::vector<std::optional<double>>(ncols));
    for (std::size_t m = 0; m < models.size(); ++m)
        for (std::size_t h = 0; h < horizons.size(); ++h) {
            const auto it = cells.find({models[m], horizons[h]});
            if (it == cells.end()) continue;
            std::vector<double> maes, mses;
            for (const auto* r : it->second) {
                maes.push_back(r->mae);
                mses.push_back(r->mse);
            }
            value[m][h] = median(maes);
            value[m][horizons.size() + h] = median(mses);
        }

    std::ostringstream os;
    os << "| Model |";
    for (const char* metric : {"MAE", "MSE"})
        for (int h : horizons) os << ' ' << metric << ' ' << h << "h |";
    os << "\n|---|";
    for (std::size_t c = 0; c < ncols; ++c) os << "---:|";
    os << '\n';
    for (std::size_t m = 0; m < models.size(); ++m) {
        os << "| " << models[m] << " |";
        for (std::size_t c = 0; c < ncols; ++c) {
            if (!value[m][c]) {
                os << " - |";
                continue;
            }
            double best = *value[m][c];
            for (std::size_t o = 0; o < models.size(); ++o)
                if (value[o][c]) best = std::min(best, *value[o][c]);
            const std::string cell = fixed(*value[m][c], options.precision);
            os << ' ' << (*value[m][c] == best ? "**" + cell + "**" : cell) << " |";
        }
        os << '\n';
    }
    return os.str();
}

} // namespace

std::string emit_report(std::span<const ExperimentReport> reports, ReportFormat format, MarkdownOptions options)
{
    if (reports.empty()) throw InvalidArgument("emit_report: no reports");
    switch (format) {
    case ReportFormat::json: {
        nlohmann::json j{{"reports", nlohmann::json::array()}};
        for (const auto& r : reports) j["reports"].push_back(to_json(r));
        return j.dump(2) + "\n";
    }
    case ReportFormat::csv: return emit_csv(reports);
    case ReportFormat::markdown: return emit_markdown(reports, options);
    }
    throw InvalidArgument("emit_report: unknown format");
}

std::vector<ExperimentReport> parse_reports_json(const std::string& text)
{
    const auto j = nlohmann::json::parse(text);
    std::vector<ExperimentReport> out;
    for (const auto& o : j.at("reports")) {
        ExperimentReport r;
        r.dataset = o.at("dataset").get<std::string>();
        r.model = o.at("model").get<std::string>();
        r.horizon_hours = o.at("horizon").get<int>();
        r.seed = o.at("seed").get<std::uint64_t>();
        r.epochs = o.at("epochs").get<int>();
        r.parameters = o.at("params").get<Index>();
        r.samples = o.value("samples", Index{0});
        r.mae = o.at("mae").get<double>();
        r.mse = o.at("mse").get<double>();
        for (const auto& c : o.at("cities"))
            r.cities.push_back({c.at("city").get<std::string>(), c.at("mae").get<double>(), c.at("mse").get<double>()});
        if (o.contains("fills")) {
            const auto& f = o["fills"];
            r.fills = {f.value("source_rows", Index{0}), f.value("inserted_rows", Index{0}),
                       f.value("filled_cells", Index{0})};
        }
        r.config_digest = o.value("config_digest", std::string());
        out.push_back(std::move(r));
    }
    return out;
}

std::vector<ExperimentReport> parse_reports_csv(const std::string& text)
{
    std::istringstream is(text);
    std::string line;
    if (!std::getline(is, line) || line != "model,dataset,horizon,city,mae,mse,params,seed,epochs")
        throw InvalidArgument("report CSV: unexpected header");
    std::vector<ExperimentReport> out;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ls(line);
        std::string field;
        while (std::getline(ls, field, ',')) f.push_back(field);
        if (f.size() != 9) throw InvalidArgument("report CSV: expected 9 fields in '" + line + "'");
        const int horizon = std::stoi(f[2]);
        const auto seed = std::stoull(f[7]);
        if (out.empty() || out.back().model != f[0] || out.back().dataset != f[1] || out.back().horizon_hours != horizon ||
            out.back().seed != seed) {
            ExperimentReport r;
            r.model = f[0];
            r.dataset = f[1];
            r.horizon_hours = horizon;
            r.parameters = std::stoll(f[6]);
            r.seed = seed;
            r.epochs = std::stoi(f[8]);
            out.push_back(std::move(r));
        }
        out.back().cities.push_back({f[3], std::stod(f[4]), std::stod(f[5])});
    }
    for (auto& r : out) {
        r.mae = r.mse = 0;
        for (const auto& c : r.cities) {
            r.mae += c.mae;
            r.mse += c.mse;
        }
        r.mae /= static_cast<double>(r.cities.size());
        r.mse /= static_cast<double>(r.cities.size());
    }
    return out;
}

std::string predictions_csv(const SampleSet& samples, const Eigen::MatrixXd& predictions,
                            const std::vector<std::string>& city_names, int horizon_hours)
{
    if (predictions.rows() != samples.size() || predictions.cols() != samples.target_count())
        throw InvalidArgument("predictions_csv: predictions do not match samples");
    std::string out = "timestamp,city,horizon,y,y_hat\n";
    for (Index i = 0; i < samples.size(); ++i) {
        const std::string ts = format_timestamp(samples.target_time(i));
        for (Index j = 0; j < samples.target_count(); ++j) {
            const auto city = static_cast<std::size_t>(samples.target_cities()[static_cast<std::size_t>(j)]);
            out += ts + "," + (city < city_names.size() ? city_names[city] : std::to_string(city)) + "," +
                   std::to_string(horizon_hours) + "," + full(samples.targets()(i, j)) + "," + full(predictions(i, j)) +
                   "\n";
        }
    }
    return out;
}

std::string parameter_table_markdown(const std::vector<std::pair<ModelKind, std::pair<Index, Index>>>& ours)
{
    std::ostringstream os;
    os << "| Model | Denmark (ours) | Denmark (published) | Netherlands (ours) | Netherlands (published) |\n"
       << "|---|---:|---:|---:|---:|\n";
    for (const auto& ref : reference_parameter_counts()) {
        const auto it = std::find_if(ours.begin(), ours.end(), [&](const auto& o) { return o.first == ref.kind; });
        os << "| " << to_string(ref.kind) << " | " << (it != ours.end() ? std::to_string(it->second.first) : "-")
           << " | " << ref.denmark << " | " << (it != ours.end() ? std::to_string(it->second.second) : "-") << " | "
           << ref.netherlands << " |\n";
    }
    return os.str();
}

std::string git_blob_hash(std::string_view content)
{
    const std::string header = "blob " + std::to_string(content.size()) + std::string(1, '\0');
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int length = 0;
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr);
    EVP_DigestUpdate(ctx, header.data(), header.size());
    EVP_DigestUpdate(ctx, content.data(), content.size());
    EVP_DigestFinal_ex(ctx, digest, &length);
    EVP_MD_CTX_free(ctx);
    std::ostringstream os;
    for (unsigned i = 0; i < length; ++i) os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
    return os.str();
}

} // namespace windcast
