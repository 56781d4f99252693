#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "fixtures.hpp"

namespace fs = std::filesystem;
using windcast::make_timestamp;

namespace {

struct Result {
    int code = -1;
    std::string out;
    std::string err;
};

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

void spit(const fs::path& p, const std::string& text)
{
    std::ofstream(p, std::ios::binary) << text;
}

class Sandbox {
public:
    Sandbox()
    {
        dir_ = fs::temp_directory_path() / ("windcast_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter_++));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    ~Sandbox() { fs::remove_all(dir_); }

    const fs::path& dir() const { return dir_; }
    fs::path operator/(const std::string& name) const { return dir_ / name; }

    Result run(const std::string& args) const
    {
        const fs::path out = dir_ / "stdout.txt", err = dir_ / "stderr.txt";
        const std::string cmd = std::string(WINDCAST_CLI) + " " + args + " >" + out.string() + " 2>" + err.string();
        const int status = std::system(cmd.c_str());
        Result r;
        r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
        r.out = slurp(out);
        r.err = slurp(err);
        return r;
    }

private:
    fs::path dir_;
    static inline int counter_ = 0;
};

/// Denmark-shaped data for January 2009 with splits narrowed to match.
void write_small_denmark(const Sandbox& box)
{
    spit(box / "dk.csv", fixture::synthetic_csv(windcast::denmark_schema(), make_timestamp(2009, 1, 1), 24 * 25, 17));
    spit(box / "run.ini", "schema = denmark\n"
                          "horizons = 6\n"
                          "train_range = 2009-01-01/2009-01-15\n"
                          "validation_range = 2009-01-15/2009-01-20\n"
                          "test_range = 2009-01-20/2009-01-26\n"
                          "[train]\n"
                          "max_epochs = 2\n"
                          "patience = 1\n"
                          "batch_size = 32\n");
}

std::string data_args(const Sandbox& box)
{
    return "--config " + (box / "run.ini").string() + " --dataset " + (box / "dk.csv").string();
}

} // namespace

TEST_CASE("help and usage errors")
{
    Sandbox box;
    CHECK(box.run("--help").code == 0);
    CHECK(box.run("").code == 2);
    CHECK(box.run("fly").code == 2);
    CHECK(box.run("train --no-such-flag").code == 2);
    const Result missing = box.run("train --dataset " + (box / "absent.csv").string() + " --epochs 3 --patience 1");
    CHECK(missing.code == 2);
    CHECK(missing.err.find("absent.csv") != std::string::npos);
    CHECK(box.run("evaluate --dataset x.csv --format xml").code == 2);
}

TEST_CASE("convert")
{
    Sandbox box;
    SUBCASE("canonical input is copied byte for byte")
    {
        const std::string text = "timestamp,a_wind_speed,b_wind_speed\n2000-01-01T00:00,1.50,\n2000-01-01T02:00,2,3\n";
        spit(box / "in.csv", text);
        const Result r = box.run("convert " + (box / "in.csv").string() + " " + (box / "out.csv").string() + " --schema custom");
        CHECK(r.code == 0);
        CHECK(slurp(box / "out.csv") == text);
        CHECK(r.out.find("layout canonical") != std::string::npos);
        CHECK(r.out.find("1 inserted rows") != std::string::npos);
        CHECK(r.out.find("3 filled cells") != std::string::npos);
    }
    SUBCASE("an unknown KNMI station is a usage error")
    {
        spit(box / "knmi.txt", "# STN,YYYYMMDD,   HH,   DD,   FH,    T,   TD,   RH,    P\n"
                               "  123,20190101,    1,  240,   80,   75,   60,   -1,10245\n");
        const Result r = box.run("convert " + (box / "knmi.txt").string() + " " + (box / "out.csv").string());
        CHECK(r.code == 2);
        CHECK(r.err.find("unknown KNMI station code 123") != std::string::npos);
        CHECK_FALSE(fs::exists(box / "out.csv"));
    }
}

TEST_CASE("train writes named artifacts and is reproducible")
{
    Sandbox box;
    write_small_denmark(box);
    const Result a = box.run("train " + data_args(box) + " --models multidim,conv2d --out " + (box / "a").string());
    REQUIRE(a.code == 0);
    for (const char* f : {"multidim_dk_h6_s42.wndc", "multidim_dk_h6_s42.trace.jsonl", "conv2d_dk_h6_s42.wndc",
                          "train_report.md"})
        CHECK(fs::exists(box / "a" / f));
    const std::string trace = slurp(box / "a" / "multidim_dk_h6_s42.trace.jsonl");
    CHECK(std::count(trace.begin(), trace.end(), '\n') == 2);
    CHECK(trace.find("\"val_loss\"") != std::string::npos);
    CHECK(trace.find("\"elapsed_s\"") != std::string::npos);

    const Result b = box.run("train " + data_args(box) + " --models multidim,conv2d --threads 2 --out " +
                             (box / "b").string());
    REQUIRE(b.code == 0);
    CHECK(slurp(box / "a" / "multidim_dk_h6_s42.wndc") == slurp(box / "b" / "multidim_dk_h6_s42.wndc"));
    CHECK(slurp(box / "a" / "conv2d_dk_h6_s42.wndc") == slurp(box / "b" / "conv2d_dk_h6_s42.wndc"));

    SUBCASE("evaluate reads the weights back")
    {
        const Result e = box.run("evaluate " + data_args(box) + " --models multidim --weights " + (box / "a").string() +
                                 " --format csv --dump-predictions " + (box / "preds").string());
        REQUIRE(e.code == 0);
        CHECK(e.out.starts_with("model,dataset,horizon,city,mae,mse,params,seed,epochs\n"));
        CHECK(e.out.find("persistence,denmark,6,esbjerg,") != std::string::npos);
        CHECK(e.out.find("multidim,denmark,6,roskilde,") != std::string::npos);
        CHECK(e.out.find(",33704,42,") != std::string::npos);
        CHECK(fs::exists(box / "preds" / "multidim_dk_h6_s42.predictions.csv"));
        CHECK(fs::exists(box / "preds" / "persistence_dk_h6.predictions.csv"));
    }
    SUBCASE("missing or corrupt weights are usage errors")
    {
        CHECK(box.run("evaluate " + data_args(box) + " --models conv3d --weights " + (box / "a").string()).code == 2);
        std::string bytes = slurp(box / "a" / "conv2d_dk_h6_s42.wndc");
        bytes[bytes.size() / 2] ^= 0x11;
        spit(box / "a" / "conv2d_dk_h6_s42.wndc", bytes);
        const Result r = box.run("evaluate " + data_args(box) + " --models conv2d --weights " + (box / "a").string());
        CHECK(r.code == 2);
    }
}

TEST_CASE("evaluate with the persistence baseline only")
{
    Sandbox box;
    write_small_denmark(box);
    const Result md = box.run("evaluate " + data_args(box) + " --models persistence");
    REQUIRE(md.code == 0);
    CHECK(md.out.find("| Model | MAE 6h | MSE 6h |") != std::string::npos);
    CHECK(md.out.find("| persistence |") != std::string::npos);
    CHECK(md.out.find("Denmark (published)") != std::string::npos);

    const Result again = box.run("evaluate " + data_args(box) + " --models persistence --format json");
    const Result twice = box.run("evaluate " + data_args(box) + " --models persistence --format json");
    REQUIRE(again.code == 0);
    CHECK(again.out == twice.out);
    CHECK(again.out.find("\"config_digest\"") != std::string::npos);
    CHECK(again.out.find("\"filled_cells\": 0") != std::string::npos);
}

TEST_CASE("repro rejects schemas without published baselines")
{
    Sandbox box;
    spit(box / "c.csv", "timestamp,a_wind_speed\n2000-01-01T00:00,1\n2000-01-01T01:00,2\n");
    const Result r = box.run("repro --persistence-only --schema custom --dataset " + (box / "c.csv").string() +
                             " --horizons 1 --epochs 3 --patience 1");
    CHECK(r.code == 2);
}
