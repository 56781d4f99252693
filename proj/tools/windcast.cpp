// windcast: convert, train, evaluate and reproduce wind-speed forecasting runs.
//
// Exit codes: 0 success, 1 acceptance failure, 2 usage or configuration
// error, 3 training divergence.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include "windcast/config.hpp"
#include "windcast/convert.hpp"
#include "windcast/errors.hpp"
#include "windcast/experiment.hpp"
#include "windcast/repro.hpp"

namespace fs = std::filesystem;
using namespace windcast;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitAcceptance = 1;
constexpr int kExitUsage = 2;
constexpr int kExitDivergence = 3;

struct Flags {
    std::string config;
    std::string dataset;
    std::string schema;
    std::string models;
    std::string horizons;
    std::string seeds;
    std::string out;
    std::string format;
    std::optional<int> epochs;
    std::optional<Index> batch_size;
    std::optional<double> learning_rate;
    std::optional<int> patience;
    std::optional<int> threads;
};

void add_run_flags(CLI::App& cmd, Flags& f)
{
    cmd.add_option("--config", f.config, "key = value config file; flags override it");
    cmd.add_option("--dataset", f.dataset, "canonical CSV");
    cmd.add_option("--schema", f.schema, "denmark, netherlands or custom");
    cmd.add_option("--models", f.models, "comma-separated model kinds, or 'all'");
    cmd.add_option("--horizons", f.horizons, "comma-separated horizons in hours");
    cmd.add_option("--seeds", f.seeds, "comma-separated seeds");
    cmd.add_option("--out", f.out, "output directory");
    cmd.add_option("--format", f.format, "json, csv or markdown");
    cmd.add_option("--epochs", f.epochs, "maximum epochs");
    cmd.add_option("--batch-size", f.batch_size, "mini-batch size");
    cmd.add_option("--lr", f.learning_rate, "Adam learning rate");
    cmd.add_option("--patience", f.patience, "early-stopping patience");
    cmd.add_option("--threads", f.threads, "concurrent runs (default: WINDCAST_THREADS or 1)");
}

RunConfig resolve(const Flags& f, std::vector<ModelKind> default_models)
{
    RunConfig c;
    c.models = std::move(default_models);
    if (!f.config.empty()) c = load_run_config(f.config, c);
    if (!f.dataset.empty()) c.dataset = f.dataset;
    if (!f.schema.empty()) c.schema = f.schema;
    if (!f.models.empty()) c.models = parse_model_list(f.models);
    if (!f.horizons.empty()) c.horizons = parse_int_list(f.horizons);
    if (!f.seeds.empty()) c.seeds = parse_seed_list(f.seeds);
    if (!f.out.empty()) c.out = f.out;
    if (!f.format.empty()) c.format = f.format;
    if (f.epochs) c.train.max_epochs = *f.epochs;
    if (f.batch_size) c.train.batch_size = *f.batch_size;
    if (f.learning_rate) c.train.learning_rate = *f.learning_rate;
    if (f.patience) c.train.patience = *f.patience;
    if (c.dataset.empty()) throw ConfigError("no dataset given (--dataset or [run] dataset)");
    if (!fs::exists(c.dataset)) throw ConfigError("dataset not found: " + c.dataset.string());
    c.validate();
    (void)parse_report_format(c.format);
    return c;
}

int threads_for(const Flags& f) { return f.threads ? std::max(1, *f.threads) : run_thread_budget(); }

std::string read_file(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    if (!in) throw ConfigError("cannot open " + p.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const fs::path& p, const std::string& bytes)
{
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write " + p.string());
    out << bytes;
    if (!out) throw ConfigError("write failed: " + p.string());
}

void ensure_directory(const fs::path& dir)
{
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw ConfigError("output directory not writable: " + dir.string());
}

MarkdownOptions markdown_for(const DatasetSchema& schema)
{
    return MarkdownOptions{schema.id == "netherlands" ? 2 : 3};
}

std::string parameter_table()
{
    std::vector<std::pair<ModelKind, std::pair<Index, Index>>> rows;
    const DatasetSchema dk = denmark_schema(), nl = netherlands_schema();
    for (ModelKind kind : trainable_kinds())
        rows.push_back({kind,
                        {count_parameters(*build_model(model_spec_for(dk, kind), 0)),
                         count_parameters(*build_model(model_spec_for(nl, kind), 0))}});
    return parameter_table_markdown(rows);
}

std::string config_digest(const RunConfig& c, const Dataset& d)
{
    return git_blob_hash(c.canonical_text() + "data=" + d.content_hash + "\n");
}

// ---- commands ---------------------------------------------------------------

int cmd_convert(const std::string& input, const std::string& schema_id, const std::string& output)
{
    const std::string text = read_file(input);
    std::string canonical;
    const ConversionSummary s = convert_to_canonical(text, schema_by_id(schema_id), canonical);
    write_file(output, canonical);

    // The ingestion pass reports gap fills of the converted table.
    DatasetSchema schema = schema_by_id(schema_id);
    std::istringstream is(canonical);
    const WeatherTable table = load_csv(is, schema);
    std::cout << "layout " << to_string(s.layout) << ": " << s.rows << " rows, " << s.columns << " columns, "
              << s.missing_cells << " empty cells\n"
              << "ingestion: " << table.rows() << " timestamps (" << table.station_rows() << " station-rows), "
              << table.fills.inserted_rows << " inserted rows, " << table.fills.filled_cells << " filled cells\n"
              << "wrote " << output << '\n';
    return kExitOk;
}

int cmd_train(const Flags& flags)
{
    const RunConfig c = resolve(flags, trainable_kinds());
    ensure_directory(c.out);
    const Dataset dataset = load_dataset(c.dataset, c.resolved_schema());
    const std::string digest = config_digest(c, dataset);

    std::vector<RunKey> keys;
    for (ModelKind kind : c.models) {
        if (kind == ModelKind::persistence) continue;
        for (int h : dataset.schema.horizons_hours)
            for (auto seed : c.seeds) keys.push_back({kind, h, seed});
    }
    if (keys.empty()) throw ConfigError("train: no trainable models selected");

    std::vector<ExperimentReport> reports;
    const auto on_done = [&](const RunResult& r) {
        const std::string stem = artifact_stem(r.key.kind, dataset.schema, r.key.horizon_hours, r.key.seed);
        write_file(c.out / (stem + ".wndc"), save_weights(*r.model));
        write_file(c.out / (stem + ".trace.jsonl"), r.trace.to_jsonl());
        std::cout << stem << ": " << r.trace.epochs_run << " epochs, best " << r.trace.best_epoch << ", test MAE "
                  << r.report.mae << '\n';
    };
    const auto results = run_grid(
        dataset, keys, [&](ModelKind k) { return c.train_for(k); }, threads_for(flags), digest, on_done);
    for (const auto& r : results) reports.push_back(r.report);
    const ReportFormat format = parse_report_format(c.format);
    const std::string ext = c.format == "markdown" ? "md" : c.format;
    write_file(c.out / ("train_report." + ext), emit_report(reports, format, markdown_for(dataset.schema)));
    return kExitOk;
}

int cmd_evaluate(const Flags& flags, const std::string& weights_dir, const std::string& dump_dir)
{
    RunConfig c = resolve(flags, trainable_kinds());
    const Dataset dataset = load_dataset(c.dataset, c.resolved_schema());
    const std::string digest = config_digest(c, dataset);
    const fs::path weights = weights_dir.empty() ? c.out : fs::path(weights_dir);
    if (!dump_dir.empty()) ensure_directory(dump_dir);

    std::vector<ExperimentReport> reports;
    for (int h : dataset.schema.horizons_hours) {
        const SplitSamples samples = split(dataset.table, dataset.schema, h);
        const auto dump = [&](Model& model, const std::string& stem) {
            if (dump_dir.empty()) return;
            const Eigen::MatrixXd pred = model.predict(samples.test);
            write_file(fs::path(dump_dir) / (stem + ".predictions.csv"),
                       predictions_csv(samples.test, pred, dataset.table.cities, h));
        };

        PersistenceModel baseline(model_spec_for(dataset.schema, ModelKind::persistence));
        reports.push_back(evaluate(baseline, samples.test, evaluation_context(dataset, h, 0, 0, digest)));
        dump(baseline, "persistence_" + dataset_tag(dataset.schema) + "_h" + std::to_string(h));

        for (ModelKind kind : c.models) {
            if (kind == ModelKind::persistence) continue;
            for (auto seed : c.seeds) {
                const std::string stem = artifact_stem(kind, dataset.schema, h, seed);
                const fs::path file = weights / (stem + ".wndc");
                if (!fs::exists(file)) throw ConfigError("missing weight file " + file.string());
                const std::string bytes = read_file(file);
                auto model = build_model(model_spec_for(dataset.schema, kind), seed);
                try {
                    load_weights(*model, bytes);
                } catch (const FormatError& e) {
                    throw ConfigError(file.string() + ": " + e.what());
                }
                reports.push_back(evaluate(*model, samples.test, evaluation_context(dataset, h, seed, 0, digest)));
                dump(*model, stem);
            }
        }
    }
    const ReportFormat format = parse_report_format(c.format);
    std::cout << emit_report(reports, format, markdown_for(dataset.schema));
    if (format == ReportFormat::markdown) std::cout << '\n' << parameter_table();
    return kExitOk;
}

int cmd_repro(const Flags& flags, bool persistence_only)
{
    Flags f = flags;
    if (f.seeds.empty()) f.seeds = "1,2,3";
    const RunConfig c = resolve(f, trainable_kinds());
    const Dataset dataset = load_dataset(c.dataset, c.resolved_schema());

    ReproOptions options;
    options.seeds = c.seeds;
    options.models = c.models;
    options.train = c.train;
    options.train_models = !persistence_only;
    options.threads = threads_for(flags);
    options.log = [](const std::string& line) { std::cerr << line << '\n'; };

    std::vector<ExperimentReport> reports;
    const auto results = run_repro(dataset, options, &reports);
    bool all = true;
    for (const auto& r : results) {
        std::cout << format_criterion(r) << '\n';
        all = all && r.pass;
    }
    std::cout << '\n' << emit_report(reports, ReportFormat::markdown, markdown_for(dataset.schema)) << '\n'
              << parameter_table();
    if (!c.out.empty() && c.out != ".") {
        ensure_directory(c.out);
        write_file(c.out / ("repro_" + dataset_tag(dataset.schema) + ".json"), emit_report(reports, ReportFormat::json));
    }
    std::cout << (all ? "ALL CRITERIA PASS" : "SOME CRITERIA FAIL") << '\n';
    return all ? kExitOk : kExitAcceptance;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Wind-speed forecasting: convert, train, evaluate, repro"};
    app.require_subcommand(1);

    std::string conv_input, conv_output, conv_schema = "netherlands";
    auto* convert = app.add_subcommand("convert", "Rewrite an upstream export as a canonical CSV");
    convert->add_option("input", conv_input, "upstream file")->required();
    convert->add_option("output", conv_output, "canonical CSV to write")->required();
    convert->add_option("--schema", conv_schema, "target schema");

    Flags train_flags, eval_flags, repro_flags;
    auto* train = app.add_subcommand("train", "Train models and write weights and traces");
    add_run_flags(*train, train_flags);

    std::string weights_dir, dump_dir;
    auto* evaluate_cmd = app.add_subcommand("evaluate", "Evaluate saved weights and the persistence baseline");
    add_run_flags(*evaluate_cmd, eval_flags);
    evaluate_cmd->add_option("--weights", weights_dir, "directory holding .wndc files (default: --out)");
    evaluate_cmd->add_option("--dump-predictions", dump_dir, "directory for per-timestamp prediction CSVs");

    bool persistence_only = false;
    auto* repro = app.add_subcommand("repro", "Run the pinned-seed pipeline and check acceptance thresholds");
    add_run_flags(*repro, repro_flags);
    repro->add_flag("--persistence-only", persistence_only, "check the baseline criteria only");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*convert) return cmd_convert(conv_input, conv_schema, conv_output);
        if (*train) return cmd_train(train_flags);
        if (*evaluate_cmd) return cmd_evaluate(eval_flags, weights_dir, dump_dir);
        if (*repro) return cmd_repro(repro_flags, persistence_only);
    } catch (const DivergenceError& e) {
        std::cerr << "windcast: divergence: " << e.what() << '\n';
        return kExitDivergence;
    } catch (const ConfigError& e) {
        std::cerr << "windcast: " << e.what() << '\n';
        return kExitUsage;
    } catch (const IngestionError& e) {
        std::cerr << "windcast: " << e.what() << '\n';
        return kExitUsage;
    } catch (const FormatError& e) {
        std::cerr << "windcast: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::invalid_argument& e) {
        std::cerr << "windcast: " << e.what() << '\n';
        return kExitUsage;
    }
    return kExitUsage;
}
