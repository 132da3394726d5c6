#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"
#include "migrant/trace.hpp"

namespace fs = std::filesystem;

namespace {

const std::string kBinary = MIGRANTSIM_BINARY;
const fs::path kConfigs = MIGRANTSIM_EXAMPLES;

int run(const std::string& args) {
    const std::string cmd = kBinary + " " + args + " >/dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void spit(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() / ("migrantsim_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    // Writes a small config; `extra` is spliced into the top-level object.
    fs::path config(const std::string& extra = "", const std::string& trace = "") {
        const std::string t = trace.empty() ? R"({"synthetic": {"footprint_pages": 512, "records": 3000, "num_cores": 2}})" : trace;
        const fs::path p = dir_ / "cfg.json";
        spit(p, "{\"trace\": " + t + ", \"migrantstore\": {\"capacity_bytes\": 1048576}, \"hw_cache\": {\"capacity_bytes\": 1048576}" +
                    (extra.empty() ? "" : ", " + extra) + "}");
        return p;
    }

    fs::path dir_;
};

}  // namespace

TEST_F(Cli, RunWritesReports) {
    const auto out = dir_ / "out";
    ASSERT_EQ(run("run --config " + config().string() + " --out " + out.string()), 0);
    const auto j = nlohmann::json::parse(slurp(out / "report.json"));
    EXPECT_EQ(j["schemes"].size(), 8u);
    EXPECT_TRUE(j["normalized"].get<bool>());
    EXPECT_TRUE(fs::exists(out / "report.csv"));
}

TEST_F(Cli, RerunIsByteIdentical) {
    const auto cfg = config();
    // Same --out both times: the resolved output_dir is part of the report.
    const std::string out = " --out " + (dir_ / "o").string();
    ASSERT_EQ(run("run --config " + cfg.string() + out + " --jobs 4"), 0);
    fs::rename(dir_ / "o", dir_ / "first");
    ASSERT_EQ(run("run --config " + cfg.string() + out + " --jobs 1"), 0);
    EXPECT_EQ(slurp(dir_ / "first" / "report.json"), slurp(dir_ / "o" / "report.json"));
    EXPECT_EQ(slurp(dir_ / "first" / "report.csv"), slurp(dir_ / "o" / "report.csv"));
}

TEST_F(Cli, ConfigErrorsExitOne) {
    EXPECT_EQ(run("run --config " + config("\"bogus\": 1").string() + " --out " + dir_.string()), 1);
    EXPECT_EQ(run("run --config " + (dir_ / "missing.json").string()), 1);
    spit(dir_ / "broken.json", "{ not json");
    EXPECT_EQ(run("run --config " + (dir_ / "broken.json").string()), 1);
    EXPECT_EQ(run("run"), 1);
    EXPECT_EQ(run("frobnicate"), 1);
}

TEST_F(Cli, TraceErrorsExitTwo) {
    spit(dir_ / "bad.trace", "0 0 R 0x0\n100 0 R 0x1001\n");
    const auto cfg = config("", "{\"file\": \"" + (dir_ / "bad.trace").string() + "\"}");
    EXPECT_EQ(run("run --config " + cfg.string() + " --out " + (dir_ / "o").string()), 2);
    const auto missing = config("", "{\"file\": \"" + (dir_ / "nope.trace").string() + "\"}");
    EXPECT_EQ(run("run --config " + missing.string() + " --out " + (dir_ / "o").string()), 2);
}

TEST_F(Cli, GenRoundTripsThroughRun) {
    const auto tr = dir_ / "z.trace";
    ASSERT_EQ(run("gen --out " + tr.string() + " --footprint 256 --records 1234 --seed 5"), 0);
    std::ifstream in(tr);
    const auto t = migrant::parse_trace(in, migrant::Addr{8} << 30);
    EXPECT_EQ(t.size(), 1234u);
    ASSERT_EQ(run("gen --out " + (dir_ / "z2.trace").string() + " --footprint 256 --records 1234 --seed 5"), 0);
    EXPECT_EQ(slurp(tr), slurp(dir_ / "z2.trace"));
    ASSERT_EQ(run("gen --out " + (dir_ / "z3.trace").string() + " --footprint 256 --records 1234 --seed 6"), 0);
    EXPECT_NE(slurp(tr), slurp(dir_ / "z3.trace"));

    const auto cfg = config("\"schemes\": [\"pcm_base\", \"migrantstore\"]", "{\"file\": \"" + tr.string() + "\"}");
    ASSERT_EQ(run("run --config " + cfg.string() + " --out " + (dir_ / "o").string()), 0);
    const auto j = nlohmann::json::parse(slurp(dir_ / "o" / "report.json"));
    EXPECT_EQ(j["schemes"][1]["l2_misses"], 1234);
}

TEST_F(Cli, GenErrors) {
    EXPECT_EQ(run("gen --out " + (dir_ / "no" / "such" / "dir" / "t.trace").string()), 1);
    EXPECT_EQ(run("gen --generator spiral --out " + (dir_ / "t").string()), 1);
    EXPECT_EQ(run("gen --footprint 0 --out " + (dir_ / "t").string()), 1);
}

TEST_F(Cli, SeedsGetTheirOwnDirectories) {
    const auto cfg = config("\"schemes\": [\"pcm_base\", \"pcm_only\"], \"seeds\": [1, 2]");
    ASSERT_EQ(run("run --config " + cfg.string() + " --out " + (dir_ / "o").string()), 0);
    EXPECT_TRUE(fs::exists(dir_ / "o" / "seed_1" / "report.json"));
    EXPECT_TRUE(fs::exists(dir_ / "o" / "seed_2" / "report.json"));
    EXPECT_NE(slurp(dir_ / "o" / "seed_1" / "report.json"), slurp(dir_ / "o" / "seed_2" / "report.json"));
    ASSERT_EQ(run("run --config " + cfg.string() + " --seed 2 --out " + (dir_ / "s").string()), 0);
    auto single = nlohmann::ordered_json::parse(slurp(dir_ / "s" / "report.json"));
    auto listed = nlohmann::ordered_json::parse(slurp(dir_ / "o" / "seed_2" / "report.json"));
    single["config"].erase("output_dir");
    listed["config"].erase("output_dir");
    EXPECT_EQ(single, listed);
    EXPECT_EQ(slurp(dir_ / "s" / "report.csv"), slurp(dir_ / "o" / "seed_2" / "report.csv"));
}

TEST_F(Cli, ReportReproducesFromEmbeddedConfig) {
    ASSERT_EQ(run("run --config " + config().string() + " --out " + (dir_ / "a").string()), 0);
    auto j = nlohmann::ordered_json::parse(slurp(dir_ / "a" / "report.json"));
    auto embedded = j["config"];
    embedded["output_dir"] = (dir_ / "b").string();
    spit(dir_ / "embedded.json", embedded.dump());
    ASSERT_EQ(run("run --config " + (dir_ / "embedded.json").string()), 0);
    auto k = nlohmann::ordered_json::parse(slurp(dir_ / "b" / "report.json"));
    k["config"]["output_dir"] = j["config"]["output_dir"];
    EXPECT_EQ(j, k);
}

TEST_F(Cli, AblateWritesOneReportPerCell) {
    const auto cfg = config(R"("ablate": {"threshold": [0, 16], "subblock_bytes": ["none", 512], "replacement": ["rapid_lru", "random"],
                                 "migrate_on": ["all"]})");
    ASSERT_EQ(run("ablate --config " + cfg.string() + " --out " + (dir_ / "ab").string() + " --jobs 3"), 0);
    std::ifstream in(dir_ / "ab" / "ablation.csv");
    std::string line;
    int rows = -1;
    while (std::getline(in, line)) ++rows;
    EXPECT_EQ(rows, 8);
    for (int i = 0; i < 8; ++i) {
        char name[16];
        std::snprintf(name, sizeof name, "cell_%03d", i);
        EXPECT_TRUE(fs::exists(dir_ / "ab" / name / "report.json")) << name;
    }
}

TEST_F(Cli, ShippedConfigsParse) {
    for (const auto& e : fs::directory_iterator(kConfigs)) {
        if (e.path().extension() != ".json") continue;
        // gen reads the synthetic section, which validates the whole config.
        EXPECT_EQ(run("gen --config " + e.path().string() + " --out " + (dir_ / "t").string()), 0) << e.path();
    }
}
