#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "asmvlm/error.hpp"
#include "asmvlm/harness.hpp"
#include "asmvlm/scenario.hpp"

using namespace asmvlm;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("asmvlm_test_" + name);
  fs::remove_all(p);
  return p;
}

BackendConfig faulty(double pick, double insert, std::uint64_t seed = 1) {
  BackendConfig b;
  b.kind = BackendKind::Faulty;
  b.faults = {pick, insert, seed};
  return b;
}

TrialOptions quiet() {
  TrialOptions o;
  o.episode.hash_images = false;
  return o;
}

}  // namespace

TEST(Report, CellStrings) {
  EXPECT_EQ(format_cell(3, 10), "3/10 (30%)");
  EXPECT_EQ(format_cell(10, 10), "10/10 (100%)");
  EXPECT_EQ(format_cell(0, 10), "0/10 (0%)");
  EXPECT_EQ(format_cell(8, 10), "8/10 (80%)");
  EXPECT_EQ(format_cell(2, 3), "2/3 (67%)");
  EXPECT_EQ(format_cell(1, 8), "1/8 (13%)");
}

TEST(Report, TableLayout) {
  const std::vector<EvalReport> reports{{"sim", "oracle", {10, 10}, {10, 10}, 10},
                                        {"real1", "oracle", {10, 10}, {8, 10}, 8},
                                        {"real1", "faulty", {9, 10}, {3, 10}, 3}};
  const std::string t = format_report(reports);
  std::istringstream in(t);
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "| Environment | oracle Pick | oracle Insert | faulty Pick | faulty Insert |");
  EXPECT_NE(t.find("| sim | 10/10 (100%) | 10/10 (100%) | - | - |"), std::string::npos);
  EXPECT_NE(t.find("| real1 | 10/10 (100%) | 8/10 (80%) | 9/10 (90%) | 3/10 (30%) |"), std::string::npos);
}

TEST(Trials, ZeroTrialsIsConfigError) {
  try {
    run_trials(builtin_scenario("sim"), {}, {}, 0, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ConfigError);
  }
}

TEST(Trials, OracleScoresPerfect) {
  const TrialsResult r = run_trials(builtin_scenario("sim"), {}, {}, 5, 1, quiet());
  EXPECT_EQ(r.report.pick.successes, 5);
  EXPECT_EQ(r.report.insert.successes, 5);
  EXPECT_EQ(r.report.completed, 5);
  for (std::size_t i = 0; i < r.records.size(); ++i) {
    const TrialScore s = score_trial(r.records[i], r.records[i].initial_world);
    EXPECT_TRUE(s.pick_correct && s.insert_correct);
    EXPECT_EQ(s.outcome, OutcomeKind::Completed);
  }
}

TEST(Trials, CertainFaultsFailTheirStage) {
  const TrialsResult insert = run_trials(builtin_scenario("real1"), faulty(0.0, 1.0), {}, 10, 1, quiet());
  EXPECT_EQ(insert.report.insert.successes, 0);
  EXPECT_EQ(insert.report.pick.successes, 10);
  // real1 has no ordering, so a swapped pick can still be a correct one; sim admits only gear 1 first.
  const TrialsResult pick = run_trials(builtin_scenario("sim"), faulty(1.0, 0.0), {}, 10, 1, quiet());
  EXPECT_EQ(pick.report.pick.successes, 0);
}

TEST(Trials, Reproducible) {
  const auto a = run_trials(builtin_scenario("sim"), faulty(0.3, 0.3), {}, 6, 9, quiet());
  const auto b = run_trials(builtin_scenario("sim"), faulty(0.3, 0.3), {}, 6, 9, quiet());
  ASSERT_EQ(a.records.size(), b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    EXPECT_EQ(episode_to_jsonl(a.records[i]), episode_to_jsonl(b.records[i]));
  }
  EXPECT_EQ(format_report({a.report}), format_report({b.report}));
}

TEST(Trials, LowerErrorRateNeverScoresWorse) {
  int previous = -1;
  for (double rate : {0.9, 0.6, 0.3, 0.0}) {
    const auto r = run_trials(builtin_scenario("real1"), faulty(0.0, rate, 17), {}, 120, 1, quiet());
    EXPECT_GE(r.report.insert.successes, previous) << rate;
    previous = r.report.insert.successes;
  }
  EXPECT_EQ(previous, 120);
}

TEST(Trials, NoVlmBaselineRuns) {
  TrialOptions o = quiet();
  o.no_vlm = true;
  const TrialsResult r = run_trials(builtin_scenario("sim"), {}, {}, 3, 1, o);
  EXPECT_EQ(r.report.backend, "no-vlm");
  for (const auto& rec : r.records) EXPECT_EQ(rec.outcome.kind, OutcomeKind::Completed);
}

TEST(RunConfig, JsonKeysAndErrors) {
  const RunOptions o = apply_run_config_json(
      {}, R"({"scenario":"real2","backend":"faulty","trials":7,"seed":3,"insert_error":0.5,
              "policy_noise":0.0002,"http":{"model_name":"m","max_retries":4}})");
  EXPECT_EQ(o.scenario, "real2");
  EXPECT_EQ(o.backend.kind, BackendKind::Faulty);
  EXPECT_EQ(o.trials, 7);
  EXPECT_EQ(o.seed, 3u);
  EXPECT_DOUBLE_EQ(o.backend.faults.insert_error_rate, 0.5);
  EXPECT_DOUBLE_EQ(o.policy_noise, 0.0002);
  EXPECT_EQ(o.backend.http.model_name, "m");
  EXPECT_EQ(o.backend.http.max_retries, 4);
  EXPECT_THROW(apply_run_config_json({}, R"({"tirals":3})"), Error);
  EXPECT_THROW(apply_run_config_json({}, R"({"trials":"three"})"), Error);
  EXPECT_THROW(apply_run_config_json({}, R"({"backend":"gpt"})"), Error);
  EXPECT_THROW(apply_run_config_json({}, "not json"), Error);
}

TEST(ExecuteRun, ExitCodesAndByteIdenticalReports) {
  const fs::path a = fresh_dir("run_a");
  const fs::path b = fresh_dir("run_b");
  RunOptions o;
  o.scenario = "sim";
  o.backend = faulty(0.2, 0.2);
  o.trials = 4;
  o.seed = 2;
  o.out_dir = a;
  std::ostringstream out_a, out_b, err;
  EXPECT_EQ(execute_run(o, out_a, err), kExitOk);
  o.out_dir = b;
  EXPECT_EQ(execute_run(o, out_b, err), kExitOk);
  EXPECT_EQ(out_a.str(), out_b.str());
  for (const auto& name : {"report.md", "episodes/trial_000.jsonl", "episodes/trial_003.jsonl"}) {
    std::ifstream fa(a / name), fb(b / name);
    std::stringstream sa, sb;
    sa << fa.rdbuf();
    sb << fb.rdbuf();
    EXPECT_FALSE(sa.str().empty()) << name;
    EXPECT_EQ(sa.str(), sb.str()) << name;
  }
  EXPECT_TRUE(fs::is_directory(a / "images"));

  const auto reports = load_reports(a);
  ASSERT_EQ(reports.size(), 1u);
  std::ifstream report(a / "report.md");
  std::stringstream rs;
  rs << report.rdbuf();
  EXPECT_EQ(format_report(reports), rs.str());

  RunOptions bad = o;
  bad.scenario = "atlantis";
  EXPECT_EQ(execute_run(bad, out_a, err), kExitConfigError);

  RunOptions http = o;
  http.out_dir.clear();
  http.trials = 1;
  http.backend = {};
  http.backend.kind = BackendKind::Http;
  http.backend.http.base_url = "http://127.0.0.1:9/v1";
  http.backend.http.model_name = "m";
  http.backend.http.max_retries = 0;
  http.backend.http.timeout_s = 1;
  EXPECT_EQ(execute_run(http, out_a, err), kExitBackendError);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Playback, RecordedEpisodeReproducesHashes) {
  const fs::path dir = fresh_dir("replay");
  RunOptions o;
  o.scenario = "real2";
  o.backend = faulty(0.4, 0.4, 5);
  o.trials = 3;
  o.seed = 11;
  o.out_dir = dir;
  o.record_replay = true;
  std::ostringstream out, err;
  ASSERT_EQ(execute_run(o, out, err), kExitOk) << err.str();
  for (int i = 0; i < 3; ++i) {
    const fs::path file = dir / "replay" / ("trial_00" + std::to_string(i) + ".jsonl");
    const PlaybackResult r = playback_episode(file);
    EXPECT_TRUE(r.identical) << file;
    EXPECT_FALSE(r.actual_hashes.empty());
  }

  // The directory of logs also serves as a replay backend for a whole run.
  RunOptions again = o;
  again.backend = {};
  again.backend.kind = BackendKind::Replay;
  again.backend.replay_path = dir / "replay";
  again.out_dir.clear();
  again.record_replay = false;
  std::ostringstream out2;
  EXPECT_EQ(execute_run(again, out2, err), kExitOk) << err.str();
  fs::remove_all(dir);
}
