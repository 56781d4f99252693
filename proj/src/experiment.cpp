#include "windcast/experiment.hpp"

#include <atomic>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

namespace windcast {

Dataset load_dataset(const std::filesystem::path& csv, const std::string& schema_id)
{
    return load_dataset(csv, schema_by_id(schema_id));
}

Dataset load_dataset(const std::filesystem::path& csv, DatasetSchema schema)
{
    std::ifstream in(csv, std::ios::binary);
    if (!in) throw IngestionError("cannot open " + csv.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    const std::string bytes = buf.str();

    Dataset d;
    d.schema = std::move(schema);
    std::istringstream is(bytes);
    d.table = load_csv(is, d.schema);
    d.content_hash = git_blob_hash(bytes);
    return d;
}

std::string dataset_tag(const DatasetSchema& schema)
{
    if (schema.id == "denmark") return "dk";
    if (schema.id == "netherlands") return "nl";
    return schema.id;
}

std::string artifact_stem(ModelKind kind, const DatasetSchema& schema, int horizon_hours, std::uint64_t seed)
{
    return to_string(kind) + "_" + dataset_tag(schema) + "_h" + std::to_string(horizon_hours) + "_s" +
           std::to_string(seed);
}

ModelSpec model_spec_for(const DatasetSchema& schema, ModelKind kind)
{
    const Shape ws = schema.window_shape();
    return ModelSpec{kind, InputShape{ws[0], ws[1], ws[2]}, schema.target_indices()};
}

EvaluationContext evaluation_context(const Dataset& dataset, int horizon_hours, std::uint64_t seed, int epochs,
                                     const std::string& config_digest)
{
    EvaluationContext ctx;
    ctx.dataset = dataset.schema.id;
    ctx.city_names = dataset.table.cities;
    ctx.horizon_hours = horizon_hours;
    ctx.seed = seed;
    ctx.epochs = epochs;
    ctx.fills = dataset.table.fills;
    ctx.config_digest = config_digest.empty() ? dataset.content_hash : config_digest;
    return ctx;
}

RunResult train_run(const Dataset& dataset, const RunKey& key, const TrainConfig& config,
                    const std::string& config_digest, const EpochCallback& on_epoch)
{
    const SplitSamples samples = split(dataset.table, dataset.schema, key.horizon_hours);
    RunResult r;
    r.key = key;
    r.model = build_model(model_spec_for(dataset.schema, key.kind), key.seed);
    TrainConfig cfg = config;
    cfg.seed = key.seed;
    try {
        r.trace = fit(*r.model, samples.train, samples.validation, cfg, on_epoch);
    } catch (const DivergenceError& e) {
        throw DivergenceError(artifact_stem(key.kind, dataset.schema, key.horizon_hours, key.seed) + ": " + e.what(),
                              e.epoch(), e.batch());
    }
    r.report = evaluate(*r.model, samples.test,
                        evaluation_context(dataset, key.horizon_hours, key.seed, r.trace.epochs_run, config_digest));
    return r;
}

ExperimentReport persistence_report(const Dataset& dataset, int horizon_hours, const std::string& config_digest)
{
    const SplitSamples samples = split(dataset.table, dataset.schema, horizon_hours);
    PersistenceModel model(model_spec_for(dataset.schema, ModelKind::persistence));
    return evaluate(model, samples.test, evaluation_context(dataset, horizon_hours, 0, 0, config_digest));
}

int run_thread_budget()
{
    if (const char* env = std::getenv("WINDCAST_THREADS")) {
        const int n = std::atoi(env);
        if (n >= 1) return n;
    }
    return 1;
}

std::vector<RunResult> run_grid(const Dataset& dataset, const std::vector<RunKey>& keys,
                                const std::function<TrainConfig(ModelKind)>& config_for, int threads,
                                const std::string& config_digest,
                                const std::function<void(const RunResult&)>& on_done)
{
    std::vector<RunResult> results(keys.size());
    std::atomic<std::size_t> next{0};
    std::mutex done_mutex;
    std::exception_ptr failure;

    auto worker = [&] {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= keys.size()) return;
            {
                std::lock_guard lock(done_mutex);
                if (failure) return;
            }
            try {
                RunResult r = train_run(dataset, keys[i], config_for(keys[i].kind), config_digest);
                std::lock_guard lock(done_mutex);
                if (on_done) on_done(r);
                results[i] = std::move(r);
            } catch (...) {
                std::lock_guard lock(done_mutex);
                if (!failure) failure = std::current_exception();
            }
        }
    };

    const int n = std::max(1, std::min(threads, static_cast<int>(keys.size())));
    if (n == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (int i = 0; i < n; ++i) pool.emplace_back(worker);
    }
    if (failure) std::rethrow_exception(failure);
    return results;
}

} // namespace windcast
