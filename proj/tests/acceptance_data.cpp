// Acceptance criteria that need the two real datasets: persistence
// exactness and model quality. Reads canonical CSVs from
// $WINDCAST_DATA_DIR/{denmark,netherlands}.csv (see README for conversion).
// Exit status: 0 all pass, 1 some fail, 77 data unavailable (ctest skip).
//
// WINDCAST_PERSISTENCE_ONLY=1 checks criteria 1-2 only; WINDCAST_THREADS sets
// the training fan-out; WINDCAST_MAX_EPOCHS lowers the epoch cap for smoke
// runs (the thresholds are unchanged, so lowered caps may fail honestly).

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>

#include "windcast/repro.hpp"

using namespace windcast;
namespace fs = std::filesystem;

namespace {

constexpr int kSkip = 77;

const char* env(const char* name)
{
    const char* v = std::getenv(name);
    return v && *v ? v : nullptr;
}

void skip_all(const std::string& reason)
{
    const char* labels[] = {"persistence (denmark)", "persistence (netherlands)", "multidim quality (denmark)",
                            "multidim quality (netherlands)", "every model beats persistence"};
    for (int i = 0; i < 5; ++i) std::cout << "SKIP  [" << i + 1 << "] " << labels[i] << "  " << reason << '\n';
}

} // namespace

int main()
{
    const char* dir = env("WINDCAST_DATA_DIR");
    if (!dir) {
        skip_all("WINDCAST_DATA_DIR is not set");
        return kSkip;
    }
    const fs::path dk = fs::path(dir) / "denmark.csv", nl = fs::path(dir) / "netherlands.csv";
    for (const auto& p : {dk, nl})
        if (!fs::exists(p)) {
            skip_all(p.string() + " not found");
            return kSkip;
        }

    ReproOptions options;
    options.train_models = !env("WINDCAST_PERSISTENCE_ONLY");
    options.threads = run_thread_budget();
    if (const char* e = env("WINDCAST_MAX_EPOCHS")) {
        options.train.max_epochs = std::atoi(e);
        options.train.patience = std::min(options.train.patience, options.train.max_epochs - 1);
    }
    options.log = [](const std::string& line) { std::cerr << line << '\n'; };

    std::map<int, std::vector<CriterionResult>> by_criterion;
    try {
        for (const auto& [path, id] : {std::pair{dk, "denmark"}, std::pair{nl, "netherlands"}}) {
            const Dataset data = load_dataset(path, id);
            for (auto& r : run_repro(data, options)) by_criterion[r.criterion].push_back(std::move(r));
        }
    } catch (const std::exception& e) {
        std::cout << "FAIL  [-] data acceptance aborted  " << e.what() << '\n';
        return 1;
    }

    const std::map<int, std::string> labels{{1, "persistence exactness (denmark)"},
                                            {2, "persistence exactness (netherlands)"},
                                            {3, "multidim quality (denmark)"},
                                            {4, "multidim quality (netherlands)"},
                                            {5, "every model beats persistence"}};
    bool all = true;
    for (const auto& [id, label] : labels) {
        const auto it = by_criterion.find(id);
        if (it == by_criterion.end()) {
            std::cout << "SKIP  [" << id << "] " << label << "  WINDCAST_PERSISTENCE_ONLY is set\n";
            continue;
        }
        const auto passed = std::count_if(it->second.begin(), it->second.end(), [](const auto& r) { return r.pass; });
        const bool ok = passed == static_cast<std::ptrdiff_t>(it->second.size());
        all = all && ok;
        std::cout << format_criterion({id, label, ok, std::to_string(passed) + "/" + std::to_string(it->second.size()) +
                                                          " checks"})
                  << '\n';
        for (const auto& r : it->second) std::cout << "        " << format_criterion(r) << '\n';
    }
    return all ? 0 : 1;
}
