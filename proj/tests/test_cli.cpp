#include <gtest/gtest.h>

#include <sys/wait.h>

#include <fstream>
#include <sstream>

#include "json.hpp"
#include "support/temp_dir.hpp"

using json = nlohmann::json;
namespace fs = std::filesystem;
using vigil::testing::TempDir;

namespace {

const fs::path kData = VIGIL_TEST_DATA;
const std::string kMini = (kData / "mini").string();
const std::string kReplay = "replay:" + (kData / "replay").string();

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Result {
  int code = -1;
  std::string out;
};

Result vigil_cli(const std::string& args, const TempDir& scratch) {
  const auto out = scratch / "stdout.txt";
  const std::string cmd = std::string(VIGIL_CLI) + " " + args + " > " + out.string() + " 2> " +
                          (scratch / "stderr.txt").string();
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out)};
}

}  // namespace

TEST(Cli, ReplayRunMatchesGoldenReports) {
  TempDir tmp;
  for (const char* workers : {"1", "4"}) {
    const auto out = tmp / (std::string("run") + workers);
    const auto r = vigil_cli("run --dataset " + kMini + " --config " + (kData / "run_config.json").string() +
                                 " --backend " + kReplay + " --out " + out.string() + " --workers " + workers,
                             tmp);
    ASSERT_EQ(r.code, 0) << slurp(tmp / "stderr.txt");
    std::size_t n = 0;
    for (const auto& golden : fs::directory_iterator(kData / "golden" / "reports")) {
      EXPECT_EQ(slurp(out / golden.path().filename()), slurp(golden.path())) << golden.path().filename();
      ++n;
    }
    EXPECT_EQ(n, 12u);
    const auto summary = json::parse(slurp(out / "run_summary.json"));
    EXPECT_EQ(summary["succeeded"], 12);
    EXPECT_EQ(summary["failed"], 0);
  }
}

TEST(Cli, Stats) {
  TempDir tmp;
  const auto r = vigil_cli("stats --dataset " + kMini, tmp);
  ASSERT_EQ(r.code, 0);
  const auto j = json::parse(r.out);
  EXPECT_EQ(j["total"], 12);
  EXPECT_EQ(j["clean"], 3);
  EXPECT_EQ(j["per_hallucination_type"]["physical"], 2);
}

TEST(Cli, EvaluateAndJudgeGoldenReports) {
  TempDir tmp;
  const auto reports = (kData / "golden" / "reports").string();
  auto r = vigil_cli("evaluate --reports " + reports + " --dataset " + kMini + " --out " + (tmp / "m.json").string(), tmp);
  ASSERT_EQ(r.code, 0) << slurp(tmp / "stderr.txt");
  auto m = json::parse(slurp(tmp / "m.json"));
  EXPECT_EQ(m["samples_scored"], 12);
  EXPECT_EQ(m["multilabel"]["macro_f1"], 1.0);

  r = vigil_cli("evaluate --reports " + reports + " --dataset " + kMini + " --category cars --out " +
                    (tmp / "c.json").string(),
                tmp);
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(json::parse(slurp(tmp / "c.json"))["samples_scored"], 2);

  r = vigil_cli("judge --reports " + reports + " --dataset " + kMini + " --backend " + kReplay + " --out " +
                    (tmp / "j.json").string(),
                tmp);
  ASSERT_EQ(r.code, 0) << slurp(tmp / "stderr.txt");
  const auto j = json::parse(slurp(tmp / "j.json"));
  EXPECT_EQ(j["per_sample"].size(), 36u);
  EXPECT_EQ(j["aggregate"]["macro_f1"], 1.0);
}

TEST(Cli, EvaluateListsMissingReports) {
  TempDir tmp;
  fs::create_directories(tmp / "reports");
  for (const auto& f : fs::directory_iterator(kData / "golden" / "reports"))
    if (f.path().filename() != "ele-02.report.json") fs::copy_file(f.path(), tmp / "reports" / f.path().filename());
  const auto r = vigil_cli("evaluate --reports " + (tmp / "reports").string() + " --dataset " + kMini + " --out " +
                               (tmp / "m.json").string(),
                           tmp);
  ASSERT_EQ(r.code, 0);
  const auto m = json::parse(slurp(tmp / "m.json"));
  EXPECT_EQ(m["samples_scored"], 11);
  EXPECT_EQ(m["missing_reports"], json::array({"ele-02"}));
}

TEST(Cli, EvaluateRejectsMalformedReports) {
  TempDir tmp;
  fs::create_directories(tmp / "reports");
  std::ofstream(tmp / "reports" / "clo-01.report.json")
      << R"({"sample_id":"clo-01","hallucination":{"objects":""}})";
  const auto r = vigil_cli("evaluate --reports " + (tmp / "reports").string() + " --dataset " + kMini + " --out " +
                               (tmp / "m.json").string(),
                           tmp);
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(slurp(tmp / "stderr.txt").find("missing key"), std::string::npos);
}

TEST(Cli, CalibrateFromScores) {
  TempDir tmp;
  const auto table = (kData / "published_scores.csv").string();
  auto r = vigil_cli("calibrate --scores " + table, tmp);
  ASSERT_EQ(r.code, 0);
  const auto all = json::parse(r.out);
  ASSERT_EQ(all.size(), 5u);
  r = vigil_cli("calibrate --scores " + table + " --heldout Cosmetics", tmp);
  ASSERT_EQ(r.code, 0);
  const auto one = json::parse(r.out);
  EXPECT_EQ(one["tau"], 0.1);
  EXPECT_EQ(one["delta"], 0.1);
  EXPECT_EQ(one["boxes"], true);
  EXPECT_EQ(one["score"], 0.3488);
}

TEST(Cli, CalibrateComputesGoldenGrid) {
  TempDir tmp;
  const auto r = vigil_cli("calibrate --dataset " + kMini + " --backend " + kReplay + " --grid " +
                               (kData / "grid_golden.json").string() + " --out " + (tmp / "g.csv").string() +
                               " --workers 4",
                           tmp);
  ASSERT_EQ(r.code, 0) << slurp(tmp / "stderr.txt");
  EXPECT_EQ(slurp(tmp / "g.csv"), slurp(kData / "golden" / "grid_table.csv"));
}

TEST(Cli, BaselineRun) {
  TempDir tmp;
  const auto r = vigil_cli("run --baseline --dataset " + kMini + " --backend " + kReplay + " --out " +
                               (tmp / "base").string(),
                           tmp);
  ASSERT_EQ(r.code, 0) << slurp(tmp / "stderr.txt");
  const auto rep = json::parse(slurp(tmp / "base" / "ele-01.report.json"));
  EXPECT_EQ(rep["mode"], "baseline");
  EXPECT_NE(rep["hallucination"]["background"], "");
}

TEST(Cli, RecordedRunReplays) {
  TempDir tmp;
  auto r = vigil_cli("run --dataset " + kMini + " --backend " + kReplay + " --out " + (tmp / "a").string() +
                         " --record " + (tmp / "rec").string(),
                     tmp);
  ASSERT_EQ(r.code, 0);
  r = vigil_cli("run --dataset " + kMini + " --backend replay:" + (tmp / "rec").string() + " --out " +
                    (tmp / "b").string(),
                tmp);
  ASSERT_EQ(r.code, 0) << slurp(tmp / "stderr.txt");
  const auto a = json::parse(slurp(tmp / "a" / "fur-01.report.json"));
  const auto b = json::parse(slurp(tmp / "b" / "fur-01.report.json"));
  EXPECT_EQ(a["hallucination"], b["hallucination"]);
  EXPECT_EQ(a["match"], b["match"]);
}

TEST(Cli, ConfigErrorsExitTwo) {
  TempDir tmp;
  std::ofstream(tmp / "bad.json") << R"({"tau":0.1,"bogus":1})";
  EXPECT_EQ(vigil_cli("run --dataset " + kMini + " --config " + (tmp / "bad.json").string() + " --backend " + kReplay +
                          " --out " + (tmp / "o").string(),
                      tmp)
                .code,
            2);
  EXPECT_NE(slurp(tmp / "stderr.txt").find("unknown config key: bogus"), std::string::npos);
  EXPECT_EQ(vigil_cli("run --dataset " + (tmp / "nowhere").string() + " --backend " + kReplay + " --out " +
                          (tmp / "o").string(),
                      tmp)
                .code,
            2);
  EXPECT_EQ(vigil_cli("run --dataset " + kMini + " --backend ftp://x --out " + (tmp / "o").string(), tmp).code, 2);
  EXPECT_EQ(vigil_cli("run --dataset " + kMini, tmp).code, 2);
  EXPECT_EQ(vigil_cli("stats", tmp).code, 2);
  std::ofstream(tmp / "grid.json") << R"({"tau":[0.1,0.1]})";
  EXPECT_EQ(vigil_cli("calibrate --dataset " + kMini + " --backend " + kReplay + " --grid " +
                          (tmp / "grid.json").string() + " --out " + (tmp / "g.csv").string(),
                      tmp)
                .code,
            2);
  EXPECT_EQ(vigil_cli("calibrate --scores " + (tmp / "none.csv").string(), tmp).code, 2);
}

TEST(Cli, UnreachableBackendExitsThree) {
  TempDir tmp;
  // Nothing listens on port 1.
  const auto r = vigil_cli("run --dataset " + kMini + " --backend http://127.0.0.1:1 --workers 12 --out " +
                               (tmp / "o").string(),
                           tmp);
  EXPECT_EQ(r.code, 3) << slurp(tmp / "stderr.txt");
  EXPECT_EQ(json::parse(slurp(tmp / "o" / "run_summary.json"))["failed"], 12);
}

TEST(Cli, FailedSamplesExitFour) {
  TempDir tmp;
  fs::copy(kData / "replay", tmp / "replay", fs::copy_options::recursive);
  fs::remove_all(tmp / "replay" / "reason");
  const auto r = vigil_cli("run --dataset " + kMini + " --backend replay:" + (tmp / "replay").string() + " --out " +
                               (tmp / "o").string(),
                           tmp);
  EXPECT_EQ(r.code, 4);
  const auto summary = json::parse(slurp(tmp / "o" / "run_summary.json"));
  EXPECT_EQ(summary["failed"], 12);
  EXPECT_NE(summary["samples"][0]["error"].get<std::string>().find("no replay fixture"), std::string::npos);

  const auto c = vigil_cli("calibrate --dataset " + kMini + " --backend replay:" + (tmp / "replay").string() +
                               " --grid " + (kData / "grid_golden.json").string() + " --out " +
                               (tmp / "g.csv").string(),
                           tmp);
  EXPECT_EQ(c.code, 4);
  EXPECT_NE(slurp(tmp / "stderr.txt").find("missing: "), std::string::npos);
}
