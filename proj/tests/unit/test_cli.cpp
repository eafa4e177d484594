#include <gtest/gtest.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"
#include "paflab/checkpoint.hpp"

namespace paflab {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

const std::string kSmoke = PAFLAB_SOURCE_DIR "/configs/smoke.json";
const std::string kGradCheck = PAFLAB_SOURCE_DIR "/configs/gradcheck.json";

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() /
               ("paflab_cli_" + std::to_string(::getpid()) + "_" +
                ::testing::UnitTest::GetInstance()->current_test_info()->name());
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    int run(const std::string& args, const std::string& env = "SOURCE_DATE_EPOCH=1700000000") {
        const std::string cmd = "env " + env + " '" + std::string(PAF_LAB_BINARY) + "' " + args + " > '" +
                                (dir_ / "stdout.txt").string() + "' 2> '" + (dir_ / "stderr.txt").string() + "'";
        const int status = std::system(cmd.c_str());
        return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    }
    std::string err() const { return slurp(dir_ / "stderr.txt"); }
    std::string out() const { return slurp(dir_ / "stdout.txt"); }
    std::string p(const std::string& name) const { return (dir_ / name).string(); }

    fs::path dir_;
};

TEST_F(Cli, MissingConfigExitsTwoNamingPath) {
    EXPECT_EQ(run("train --config /no/such/file.json --out " + p("m.ckpt")), 2);
    EXPECT_NE(err().find("/no/such/file.json"), std::string::npos);
}

TEST_F(Cli, UnknownKeyExitsTwoWithLine) {
    std::ofstream(p("bad.json")) << "{\n  \"train\": {\n    \"stepz\": 4\n  }\n}\n";
    EXPECT_EQ(run("train --config " + p("bad.json") + " --out " + p("m.ckpt")), 2);
    EXPECT_NE(err().find("bad.json:3:"), std::string::npos) << err();
}

TEST_F(Cli, UnknownSubcommandExitsTwo) {
    EXPECT_EQ(run("frobnicate"), 2);
}

TEST_F(Cli, BenchRejectsTooFewRepeats) {
    EXPECT_EQ(run("bench --config " + kSmoke + " --repeats 1 --out " + p("b.json")), 2);
    EXPECT_FALSE(fs::exists(p("b.json")));
}

TEST_F(Cli, TrainWritesCheckpointCurvesAndReport) {
    ASSERT_EQ(run("train --config " + kSmoke + " --out " + p("m.ckpt")), 0) << err();
    const Model m = load_checkpoint(p("m.ckpt"));
    save_checkpoint(m, p("again.ckpt"));
    EXPECT_EQ(slurp(p("m.ckpt")), slurp(p("again.ckpt")));
    const std::string csv = slurp(p("m.curves.csv"));
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "step,loss,eval_accuracy");
    const json r = json::parse(slurp(p("m.report.json")));
    EXPECT_EQ(r["command"], "train");
    EXPECT_EQ(r["schema_version"], 1);
}

TEST_F(Cli, TrainIsIdempotentWithFixedEpoch) {
    ASSERT_EQ(run("train --config " + kSmoke + " --out " + p("a.ckpt")), 0);
    ASSERT_EQ(run("train --config " + kSmoke + " --out " + p("b.ckpt")), 0);
    EXPECT_EQ(slurp(p("a.ckpt")), slurp(p("b.ckpt")));
    EXPECT_EQ(slurp(p("a.curves.csv")), slurp(p("b.curves.csv")));
    json a = json::parse(slurp(p("a.report.json")));
    json b = json::parse(slurp(p("b.report.json")));
    a.erase("checkpoint");
    b.erase("checkpoint");
    EXPECT_EQ(a, b);
}

TEST_F(Cli, ReportsMatchWithoutEpochAfterDroppingTimestamp) {
    ASSERT_EQ(run("grad-check --config " + kGradCheck + " --out " + p("a.json"), "-u SOURCE_DATE_EPOCH"), 0);
    ASSERT_EQ(run("grad-check --config " + kGradCheck + " --out " + p("b.json"), "-u SOURCE_DATE_EPOCH"), 0);
    json a = json::parse(slurp(p("a.json")));
    json b = json::parse(slurp(p("b.json")));
    a.erase("created_at");
    b.erase("created_at");
    EXPECT_EQ(a, b);
}

TEST_F(Cli, ProbeIsByteIdenticalAndSeedable) {
    ASSERT_EQ(run("train --config " + kSmoke + " --out " + p("m.ckpt")), 0);
    ASSERT_EQ(run("probe " + p("m.ckpt") + " --out " + p("a.csv")), 0) << err();
    ASSERT_EQ(run("probe --checkpoint " + p("m.ckpt") + " --out " + p("b.csv")), 0) << err();
    EXPECT_EQ(slurp(p("a.csv")), slurp(p("b.csv")));
    EXPECT_EQ(slurp(p("a.report.json")), slurp(p("b.report.json")));
    ASSERT_EQ(run("probe " + p("m.ckpt") + " --seed 99 --out " + p("c.csv")), 0);
    EXPECT_NE(slurp(p("a.csv")), slurp(p("c.csv")));
    ASSERT_EQ(run("probe " + p("m.ckpt")), 0);
    EXPECT_EQ(out(), slurp(p("a.csv")));
}

TEST_F(Cli, CorruptCheckpointExitsFour) {
    ASSERT_EQ(run("train --config " + kSmoke + " --out " + p("m.ckpt")), 0);
    std::string bytes = slurp(p("m.ckpt"));
    std::ofstream(p("trunc.ckpt"), std::ios::binary) << bytes.substr(0, bytes.size() / 2);
    EXPECT_EQ(run("probe " + p("trunc.ckpt")), 4);
    bytes[0] = 'X';
    std::ofstream(p("magic.ckpt"), std::ios::binary) << bytes;
    EXPECT_EQ(run("probe " + p("magic.ckpt")), 4);
    EXPECT_EQ(run("probe " + p("absent.ckpt")), 3);
}

TEST_F(Cli, UnwritableOutputExitsThree) {
    EXPECT_EQ(run("grad-check --config " + kGradCheck + " --out /proc/paflab/x.json"), 3);
}

TEST_F(Cli, GradCheckPassesOnShippedConfig) {
    ASSERT_EQ(run("grad-check --config " + kGradCheck + " --out " + p("g.json")), 0) << err();
    const json r = json::parse(slurp(p("g.json")));
    EXPECT_EQ(r["grad_check"].size(), 4u);
}

TEST_F(Cli, CompareReportHasThreeTracesAndParity) {
    const int code = run("compare --config " + kSmoke + " --out " + p("c.json"));
    ASSERT_TRUE(code == 0 || code == 5) << err();
    const json r = json::parse(slurp(p("c.json")));
    ASSERT_EQ(r["traces"].size(), 3u);
    const double saf = r["summary"]["saf_accuracy"];
    const double paf = r["summary"]["paf_accuracy"];
    EXPECT_DOUBLE_EQ(r["summary"]["parity_delta"].get<double>(), std::abs(saf - paf));
    EXPECT_TRUE(fs::exists(p("c.trace.csv")));
    EXPECT_EQ(code == 0, r["summary"]["passed"].get<bool>());
}

TEST_F(Cli, BenchReportsIdenticalParallelOutput) {
    ASSERT_EQ(run("bench --config " + kSmoke + " --out " + p("b.json")), 0) << err();
    const json r = json::parse(slurp(p("b.json")));
    EXPECT_TRUE(r["summary"]["paf_outputs_identical"].get<bool>());
    EXPECT_EQ(r["timing"].size(), 3u);
    ASSERT_EQ(run("bench --config " + kSmoke + " --mode paf-seq --threads 3 --out " + p("c.json")), 0);
    const json c = json::parse(slurp(p("c.json")));
    EXPECT_EQ(c["timing"].size(), 1u);
    EXPECT_EQ(c["config"]["bench"]["threads"], 3);
}

}  // namespace
}  // namespace paflab
