#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "dispatch.hpp"
#include "geoact/homeloc.hpp"
#include "test_support.hpp"

namespace fs = std::filesystem;
using geoact::testing::slurp;
using geoact::testing::spit;
using geoact::testing::TempDir;

namespace {

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run run(std::vector<std::string> args) {
    args.insert(args.begin(), "geoact");
    std::ostringstream out, err;
    const int code = geoact::cli::dispatch(args, out, err);
    return {code, out.str(), err.str()};
}

std::string field(const std::string& report, const std::string& key) {
    std::istringstream in(report);
    std::string line;
    while (std::getline(in, line))
        if (line.rfind(key + "\t", 0) == 0) return line.substr(key.size() + 1);
    return {};
}

class Pipeline : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        dir_ = new TempDir();
        spit(dir_->path() / "world.spec",
             "n_users = 120\n"
             "days = 28\n"
             "tweets_per_day = 2.0\n"
             "seed = 4\n");
        const auto r = run({"--log-level", "off", "synth", "generate", "--spec", (dir_->path() / "world.spec").string(),
                            "--out", world().string()});
        ASSERT_EQ(r.code, 0) << r.err;
        origin_ = field(r.out, "grid_origin");
        ASSERT_FALSE(origin_.empty());
    }
    static void TearDownTestSuite() {
        delete dir_;
        dir_ = nullptr;
    }

    static fs::path world() { return dir_->path() / "world"; }
    static std::string corpus() { return (world() / "corpus.jsonl").string(); }
    static std::string at(const std::string& name) { return (dir_->path() / name).string(); }

    static std::vector<std::string> with_globals(std::vector<std::string> args) {
        args.insert(args.begin(), {"--log-level", "off", "--grid-origin", origin_});
        return args;
    }

    static TempDir* dir_;
    static std::string origin_;
};

TempDir* Pipeline::dir_ = nullptr;
std::string Pipeline::origin_;

}  // namespace

TEST(Cli, NoArgumentsIsUsageError) {
    const auto r = run({});
    EXPECT_EQ(r.code, geoact::cli::kExitUsage);
    EXPECT_NE(r.err.find("ingest"), std::string::npos);
}

TEST(Cli, UnknownSubcommandIsUsageError) {
    EXPECT_EQ(run({"frobnicate"}).code, geoact::cli::kExitUsage);
}

TEST(Cli, HelpExitsZero) {
    const auto r = run({"--help"});
    EXPECT_EQ(r.code, 0);
    EXPECT_NE(r.out.find("train-activity"), std::string::npos);
}

TEST(Cli, MissingRequiredOptionIsUsageError) {
    EXPECT_EQ(run({"classify", "--model", "."}).code, geoact::cli::kExitUsage);
}

TEST(Cli, UnknownConfigKeyIsUsageError) {
    TempDir dir;
    spit(dir.path() / "bad.ini", "seed = 3\nno_such_key = 1\n");
    const auto r = run({"--config", (dir.path() / "bad.ini").string(), "synth", "generate", "--out",
                        (dir.path() / "w").string()});
    EXPECT_EQ(r.code, geoact::cli::kExitUsage);
    EXPECT_FALSE(fs::exists(dir.path() / "w"));
}

TEST(Cli, BadLogLevelIsUsageError) {
    TempDir dir;
    EXPECT_EQ(run({"--log-level", "loud", "synth", "generate", "--out", (dir.path() / "w").string()}).code,
              geoact::cli::kExitUsage);
}

TEST(Cli, MostlyMalformedInputIsDataError) {
    TempDir dir;
    spit(dir.path() / "bad.jsonl", "{not json\n{\"user\":1}\n");
    const auto r = run({"--log-level", "off", "--grid-origin", "40,-75", "ingest", "--input",
                        (dir.path() / "bad.jsonl").string()});
    EXPECT_EQ(r.code, geoact::cli::kExitData);
    EXPECT_NE(r.err.find("malformed"), std::string::npos);
}

TEST(Cli, ConfigFileSuppliesDefaultsAndFlagsWin) {
    TempDir dir;
    spit(dir.path() / "run.ini", "seed = 9\n");
    const auto spec = dir.path() / "tiny.spec";
    spit(spec, "n_users = 5\ndays = 7\n");
    const auto a = run({"--log-level", "off", "--config", (dir.path() / "run.ini").string(), "synth", "generate",
                        "--spec", spec.string(), "--out", (dir.path() / "a").string()});
    const auto b = run({"--log-level", "off", "--seed", "9", "synth", "generate", "--spec", spec.string(), "--out",
                        (dir.path() / "b").string()});
    const auto c = run({"--log-level", "off", "--config", (dir.path() / "run.ini").string(), "--seed", "10", "synth",
                        "generate", "--spec", spec.string(), "--out", (dir.path() / "c").string()});
    ASSERT_EQ(a.code, 0) << a.err;
    ASSERT_EQ(b.code, 0) << b.err;
    ASSERT_EQ(c.code, 0) << c.err;
    EXPECT_EQ(slurp(dir.path() / "a" / "corpus.jsonl"), slurp(dir.path() / "b" / "corpus.jsonl"));
    EXPECT_NE(slurp(dir.path() / "a" / "corpus.jsonl"), slurp(dir.path() / "c" / "corpus.jsonl"));
}

TEST(Cli, SidecarRecordsResolvedConfig) {
    TempDir dir;
    const auto spec = dir.path() / "tiny.spec";
    spit(spec, "n_users = 5\ndays = 7\n");
    ASSERT_EQ(run({"--log-level", "off", "--seed", "21", "synth", "generate", "--spec", spec.string(), "--out",
                   (dir.path() / "w").string()})
                  .code,
              0);
    const auto side = slurp(dir.path() / "w" / "run.ini");
    EXPECT_NE(side.find("seed=21"), std::string::npos) << side;
}

TEST_F(Pipeline, IngestReportsCounts) {
    const auto r = run(with_globals({"ingest", "--input", corpus()}));
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(field(r.out, "malformed"), "0");
    EXPECT_EQ(field(r.out, "users"), "120");
}

TEST_F(Pipeline, EndToEnd) {
    const auto models = at("cascade");
    auto r = run(with_globals({"train-activity", "--labels", corpus(), "--out", models}));
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_TRUE(fs::exists(fs::path(models) / "report.tsv"));

    r = run(with_globals({"classify", "--in", corpus(), "--model", models, "--out", at("classified.jsonl")}));
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_GT(std::stoul(field(r.out, "user_drinking_now")), 0u);

    r = run(with_globals({"extract-features", "--input", corpus(), "--output", at("features.csv"), "--with-labels"}));
    ASSERT_EQ(r.code, 0) << r.err;

    r = run(with_globals({"train-home", "--features", at("features.csv"), "--out", at("home.model")}));
    ASSERT_EQ(r.code, 0) << r.err;

    r = run(with_globals({"train-home", "--input", corpus(), "--out", at("home2.model")}));
    ASSERT_EQ(r.code, 0) << r.err;
    // The feature CSV is rounded to decimal text, so the two routes agree closely but not bitwise.
    const auto via_csv = geoact::home::HomeModel::load(at("home.model"));
    const auto direct = geoact::home::HomeModel::load(at("home2.model"));
    EXPECT_NEAR(via_csv.linear.bias, direct.linear.bias, 1e-6);
    ASSERT_EQ(via_csv.linear.weights.size(), direct.linear.weights.size());
    for (std::size_t i = 0; i < direct.linear.weights.size(); ++i)
        EXPECT_NEAR(via_csv.linear.weights[i], direct.linear.weights[i], 1e-6) << i;

    r = run(with_globals({"infer-home", "--in", corpus(), "--model", at("home.model"), "--out", at("homes.csv")}));
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(slurp(at("homes.csv")).rfind("user,cell_id,score,lat,lon\n", 0), 0u);

    r = run(with_globals({"home-curve", "--input", corpus(), "--model", at("home.model"), "--output", at("curve.csv")}));
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_GE(std::stod(field(r.out, "svm")), 0.8);

    r = run(with_globals({"analyze", "heatmap", "--classified", at("classified.jsonl"), "--min-pos", "1", "--geojson",
                          at("heat.geojson"), "--csv", at("heat.csv")}));
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(slurp(at("heat.geojson")).find("FeatureCollection"), std::string::npos);

    r = run(with_globals({"analyze", "correlate", "--classified", at("classified.jsonl"), "--outlets",
                          (world() / "outlets.csv").string(), "--output", at("corr.csv")}));
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_FALSE(field(r.out, "r").empty());

    r = run(with_globals({"analyze", "distances", "--classified", at("classified.jsonl"), "--homes", at("homes.csv"),
                          "--output", at("dist.csv")}));
    ASSERT_EQ(r.code, 0) << r.err;
}

TEST_F(Pipeline, RerunsAreByteIdentical) {
    const auto train = [&](const std::string& name) {
        const auto r = run(with_globals({"train-home", "--input", corpus(), "--out", at(name)}));
        EXPECT_EQ(r.code, 0) << r.err;
        return slurp(at(name));
    };
    EXPECT_EQ(train("x.model"), train("y.model"));
    const auto infer = [&](const std::string& name) {
        const auto r = run(with_globals({"infer-home", "--in", corpus(), "--model", at("x.model"), "--out", at(name)}));
        EXPECT_EQ(r.code, 0) << r.err;
        return slurp(at(name));
    };
    EXPECT_EQ(infer("h1.csv"), infer("h2.csv"));
}

TEST_F(Pipeline, ThreadCountDoesNotChangeOutput) {
    const auto infer = [&](const std::string& threads, const std::string& name) {
        auto args = with_globals({"infer-home", "--in", corpus(), "--model", at("t.model"), "--out", at(name)});
        args.insert(args.begin(), {"--threads", threads});
        const auto r = run(args);
        EXPECT_EQ(r.code, 0) << r.err;
        return slurp(at(name));
    };
    ASSERT_EQ(run(with_globals({"train-home", "--input", corpus(), "--out", at("t.model")})).code, 0);
    EXPECT_EQ(infer("1", "t1.csv"), infer("3", "t3.csv"));
}

TEST_F(Pipeline, MissingModelIsUsageOrDataError) {
    const auto r = run(with_globals({"infer-home", "--in", corpus(), "--model", at("nope.model"), "--out", at("o.csv")}));
    EXPECT_NE(r.code, 0);
}
