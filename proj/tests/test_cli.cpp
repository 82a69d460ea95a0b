#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path kRoot = fs::temp_directory_path() / "mmseg_cli_tests";

int run(const std::string& args, const fs::path& err = {}) {
    std::string cmd = std::string(MMSEG_CLI) + " " + args + " > /dev/null";
    cmd += err.empty() ? " 2>/dev/null" : " 2>" + err.string();
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json load(const fs::path& p) { return json::parse(slurp(p)); }

// A small two-season world, generated once for the whole suite.
class Cli : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        fs::remove_all(kRoot);
        fs::create_directories(kRoot);
        std::ofstream(kRoot / "spec.json") << json{{"cluster_count", 3},
                                                   {"map_length", 300.0},
                                                   {"features_per_frame", 300},
                                                   {"seasons", {"WI", "SU"}}}
                                                  .dump();
        ASSERT_EQ(run("synth --spec " + (kRoot / "spec.json").string() + " --out " + (kRoot / "world").string()), 0);
    }
    static fs::path season(const std::string& s) { return kRoot / "world" / s; }
    static fs::path fresh(const std::string& name) {
        const auto d = kRoot / name;
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }
};

TEST_F(Cli, UsageErrorsExitTwo) {
    EXPECT_EQ(run(""), 2);
    EXPECT_EQ(run("frobnicate"), 2);
    EXPECT_EQ(run("segment"), 2);
    EXPECT_EQ(run("segment --data " + season("WI").string() + " --bias-fraction 0"), 2);
    EXPECT_EQ(run("segment --data " + season("WI").string() + " --baseline thirds"), 2);
    EXPECT_EQ(run("segment --data " + season("WI").string() + " --affinity magic"), 2);
    EXPECT_EQ(run("eval --map a --query b --method guess"), 2);
}

TEST_F(Cli, MissingInputExitsThree) {
    EXPECT_EQ(run("segment --data " + (kRoot / "nowhere").string()), 3);
}

TEST_F(Cli, MalformedRecordNamesLine) {
    const auto dir = fresh("malformed");
    fs::copy(season("WI"), dir, fs::copy_options::recursive | fs::copy_options::overwrite_existing);
    {
        std::ofstream out(dir / "boxes.jsonl");
        out << R"({"id":0,"frame":0,"x_min":1,"y_min":1,"x_max":50,"y_max":50})" << '\n';
        out << R"({"id":1,"frame":1,"x_min":1,)" << '\n';
    }
    const auto err = dir / "stderr.txt";
    EXPECT_EQ(run("segment --data " + dir.string(), err), 3);
    EXPECT_NE(slurp(err).find("boxes.jsonl:2"), std::string::npos) << slurp(err);
}

TEST_F(Cli, SegmentIsIdempotent) {
    const auto a = fresh("seg_a"), b = fresh("seg_b");
    ASSERT_EQ(run("segment --data " + season("WI").string() + " --out " + a.string()), 0);
    ASSERT_EQ(run("segment --data " + season("WI").string() + " --out " + b.string()), 0);
    for (const char* f : {"segments.json", "stats.json", "graph.json", "annotations.jsonl"})
        EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
    const auto stats = load(a / "stats.json");
    EXPECT_GE(stats.at("planted_ari").get<double>(), 0.9);
    EXPECT_LE(stats.at("R_p").get<double>(), stats.at("R_i").get<double>());
    EXPECT_EQ(load(a / "segments.json").at("class_count"), 3);
}

TEST_F(Cli, NoBoxesMeansNoSegments) {
    const auto dir = fresh("noboxes");
    fs::copy(season("WI"), dir, fs::copy_options::recursive | fs::copy_options::overwrite_existing);
    std::ofstream(dir / "boxes.jsonl", std::ios::trunc);
    ASSERT_EQ(run("segment --data " + dir.string()), 0);
    EXPECT_EQ(load(dir / "segments.json").at("segments").size(), 0u);
    EXPECT_EQ(load(dir / "stats.json").at("R_i").get<double>(), 0.0);
}

TEST_F(Cli, EqualLengthBaseline) {
    const auto out = fresh("baseline");
    ASSERT_EQ(run("segment --data " + season("WI").string() + " --out " + out.string() +
                  " --baseline equal-length=100"),
              0);
    EXPECT_EQ(load(out / "segments.json").at("class_count"), 3);
    EXPECT_DOUBLE_EQ(load(out / "stats.json").at("R_i").get<double>(), 1.0);
}

TEST_F(Cli, OracleEvaluationIsPerfect) {
    const auto seg = fresh("oracle_seg"), out = fresh("oracle_eval");
    ASSERT_EQ(run("segment --data " + season("WI").string() + " --out " + seg.string()), 0);
    ASSERT_EQ(run("eval --map " + season("WI").string() + " --query " + season("SU").string() + " --segments " +
                  (seg / "segments.json").string() + " --method oracle --out " + out.string()),
              0);
    const auto report = load(out / "eval.json");
    ASSERT_GT(report.at("retained_runs").get<int>(), 0);
    EXPECT_EQ(load(out / "topx.json").at("10").get<double>(), 100.0);
}

TEST_F(Cli, BowEvaluationWritesAllLevels) {
    const auto seg = fresh("bow_seg"), out = fresh("bow_eval");
    ASSERT_EQ(run("segment --data " + season("WI").string() + " --out " + seg.string()), 0);
    ASSERT_EQ(run("eval --map " + season("WI").string() + " --query " + season("SU").string() + " --segments " +
                  (seg / "segments.json").string() + " --out " + out.string()),
              0);
    const auto topx = load(out / "topx.json");
    double last = 0.0;
    for (const char* x : {"10", "20", "50", "100", "200"}) {
        const double v = topx.at(x).get<double>();
        EXPECT_GE(v, last);
        last = v;
    }
}

// Segments over one straight 40 m stretch, frame f at x = f.
void write_metrics_inputs(const fs::path& dir, double shift_b) {
    std::ofstream pa(dir / "poses_a.jsonl"), pb(dir / "poses_b.jsonl");
    for (int f = 0; f < 40; ++f) {
        pa << json{{"frame", f}, {"s", f}, {"x", f}, {"y", 0}}.dump() << '\n';
        pb << json{{"frame", f}, {"s", f}, {"x", f + shift_b}, {"y", 0}}.dump() << '\n';
    }
    json boxes = json::array();
    std::vector<double> span;
    for (int f = 0; f < 20; ++f) {
        boxes.push_back({{"frame", f}, {"x_min", 0}, {"y_min", 0}, {"x_max", 10}, {"y_max", 10}});
        span.push_back(f);
    }
    json seg = {{"segments",
                 {{{"id", 0}, {"trajectory_ids", {1}}, {"frame_boxes", boxes}, {"viewpoint_span", span}}}}};
    std::ofstream(dir / "segments.json") << seg.dump();
}

double metrics_zero_ratio(const fs::path& dir, json* report) {
    const auto out = dir / "jaccard.json";
    const std::string args = "metrics --segments-a " + (dir / "segments.json").string() + " --poses-a " +
                             (dir / "poses_a.jsonl").string() + " --segments-b " + (dir / "segments.json").string() +
                             " --poses-b " + (dir / "poses_b.jsonl").string() + " --out " + out.string();
    if (run(args) != 0) return -1;
    *report = load(out);
    return report->at("zero_ratio").get<double>();
}

TEST_F(Cli, MetricsSelfDisjointAndShift) {
    json r;
    const auto self = fresh("metrics_self");
    write_metrics_inputs(self, 0.0);
    EXPECT_EQ(metrics_zero_ratio(self, &r), 0.0);
    EXPECT_EQ(r.at("nonzero").at("median").get<double>(), 1.0);

    const auto disjoint = fresh("metrics_disjoint");
    write_metrics_inputs(disjoint, 1000.0);
    EXPECT_EQ(metrics_zero_ratio(disjoint, &r), 1.0);

    const auto shifted = fresh("metrics_shift");
    write_metrics_inputs(shifted, 10.0);
    EXPECT_EQ(metrics_zero_ratio(shifted, &r), 0.0);
    const double j = r.at("best").at(0).get<double>();
    EXPECT_GT(j, 0.0);
    EXPECT_LT(j, 1.0);
}

}  // namespace
