#include <gtest/gtest.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "anteriseg/cli.hpp"
#include "anteriseg/synth.hpp"

using namespace anteriseg;
namespace fs = std::filesystem;

namespace {

struct Result {
    int code;
    std::string out, err;
};

Result invoke(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    const int code = cli::run_cli(args, out, err);
    return {code, out.str(), err.str()};
}

class TempDir {
public:
    TempDir() {
        static int counter = 0;
        path_ = fs::temp_directory_path() /
                ("anteriseg_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~TempDir() { fs::remove_all(path_); }
    std::string operator/(const std::string& name) const { return (path_ / name).string(); }

private:
    fs::path path_;
};

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& text) { std::ofstream(path, std::ios::binary) << text; }

void write_cohort_manifest(const std::string& path) {
    std::vector<Label> labels;
    labels.insert(labels.end(), 1311, Label::Normal);
    labels.insert(labels.end(), 465, Label::Controlled);
    labels.insert(labels.end(), 864, Label::Uncontrolled);
    write_manifest(synth::synthetic_manifest(labels.size(), labels), path);
}

std::size_t count_split(const std::string& manifest_path, Split s) {
    const auto m = read_manifest(manifest_path);
    return static_cast<std::size_t>(
        std::count_if(m.records.begin(), m.records.end(), [&](const auto& r) { return r.split == s; }));
}

}  // namespace

TEST(Cli, UsageAndExitCodes) {
    const auto none = invoke({});
    EXPECT_EQ(none.code, 1);
    EXPECT_NE(none.err.find("Usage"), std::string::npos);

    const auto help = invoke({"--help"});
    EXPECT_EQ(help.code, 0);
    EXPECT_NE(help.out.find("split"), std::string::npos);

    EXPECT_EQ(invoke({"split", "--bogus"}).code, 1);
    EXPECT_EQ(invoke({"--version"}).out, std::string(cli::kToolVersion) + "\n");
    EXPECT_EQ(invoke({"stats", "nope", "--groups", "x.csv"}).code, 1);
}

TEST(Cli, MissingInputIsIoError) {
    TempDir dir;
    const auto r = invoke({"split", "--manifest", dir / "absent.csv"});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("absent.csv"), std::string::npos);
}

TEST(Cli, SplitCohortGivesExpectedValidationSize) {
    TempDir dir;
    write_cohort_manifest(dir / "m.csv");
    const auto r = invoke({"split", "--manifest", dir / "m.csv", "--out", dir / "s.csv", "--train-frac", "0.85",
                        "--seed", "7"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(count_split(dir / "s.csv", Split::Val), 396u);
    EXPECT_EQ(count_split(dir / "s.csv", Split::Train), 2244u);
}

TEST(Cli, RepeatedRunsAreByteIdentical) {
    TempDir dir;
    write_cohort_manifest(dir / "m.csv");
    ASSERT_EQ(invoke({"split", "--manifest", dir / "m.csv", "--out", dir / "a.csv", "--seed", "3"}).code, 0);
    ASSERT_EQ(invoke({"split", "--manifest", dir / "m.csv", "--out", dir / "b.csv", "--seed", "3"}).code, 0);
    EXPECT_EQ(slurp(dir / "a.csv"), slurp(dir / "b.csv"));
    ASSERT_EQ(invoke({"split", "--manifest", dir / "m.csv", "--out", dir / "c.csv", "--seed", "4"}).code, 0);
    EXPECT_NE(slurp(dir / "a.csv"), slurp(dir / "c.csv"));
}

TEST(Cli, FlagsOverrideConfigOverrideDefaults) {
    TempDir dir;
    write_cohort_manifest(dir / "m.csv");
    write_file(dir / "cfg.json", R"({"seed": 7, "split": {"train_frac": 0.5}})");

    ASSERT_EQ(invoke({"split", "--manifest", dir / "m.csv", "--out", dir / "d.csv"}).code, 0);
    EXPECT_EQ(count_split(dir / "d.csv", Split::Val), 396u);

    ASSERT_EQ(invoke({"--config", dir / "cfg.json", "split", "--manifest", dir / "m.csv", "--out", dir / "c.csv"}).code,
              0);
    EXPECT_EQ(count_split(dir / "c.csv", Split::Val), 1320u);

    ASSERT_EQ(invoke({"--config", dir / "cfg.json", "split", "--manifest", dir / "m.csv", "--out", dir / "f.csv",
                   "--train-frac", "0.85"})
                  .code,
              0);
    EXPECT_EQ(count_split(dir / "f.csv", Split::Val), 396u);
}

TEST(Cli, ConfigErrors) {
    TempDir dir;
    write_file(dir / "bad.json", R"({"split": {"train_fraction": 0.5}})");
    const auto r = invoke({"--config", dir / "bad.json", "loss", "weights", "--counts", "1,2,3"});
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("train_fraction"), std::string::npos);
    EXPECT_EQ(invoke({"--config", dir / "missing.json", "loss", "weights", "--counts", "1"}).code, 2);
}

TEST(Cli, LossWeights) {
    const auto r = invoke({"loss", "weights", "--counts", "10,10,10"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = nlohmann::json::parse(r.out);
    for (double w : j["weights"]) EXPECT_DOUBLE_EQ(w, 1.0);
    EXPECT_EQ(invoke({"loss", "weights", "--counts", "3,0,2"}).code, 1);
    EXPECT_EQ(invoke({"loss", "weights", "--counts", "3,x"}).code, 1);
}

TEST(Cli, StatsKruskalWallis) {
    TempDir dir;
    write_file(dir / "g.csv", "group,value\na,1\na,2\na,3\nb,4\nb,5\nb,6\nc,7\nc,8\nc,9\n");
    const auto r = invoke({"stats", "kw", "--groups", dir / "g.csv"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = nlohmann::json::parse(r.out);
    EXPECT_NEAR(j["statistic"].get<double>(), 7.2, 1e-12);
    EXPECT_NEAR(j["p_value"].get<double>(), std::exp(-3.6), 1e-12);
    EXPECT_EQ(invoke({"stats", "kw"}).code, 1);
}

TEST(Cli, ReportListsMissingArtifacts) {
    TempDir dir;
    const auto r = invoke({"report", "--artifacts", dir / "", "--out", dir / "r.json"});
    EXPECT_EQ(r.code, 2);
    for (const char* name : {"scores.csv", "relabel.json", "manifest.csv"})
        EXPECT_NE(r.err.find(name), std::string::npos) << name;
}

TEST(Cli, MapFileName) {
    EXPECT_EQ(cli::map_file_name("img/a.png"), "img_a.atns");
    EXPECT_EQ(cli::map_file_name("b.jpg"), "b.atns");
}
