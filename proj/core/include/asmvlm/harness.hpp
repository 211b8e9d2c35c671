#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "asmvlm/backend.hpp"
#include "asmvlm/orchestrator.hpp"
#include "asmvlm/scenario.hpp"
#include "asmvlm/skills.hpp"

namespace asmvlm {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfigError = 2;
inline constexpr int kExitBackendError = 3;

// Binary per-stage judgement of the first pick and first insert decisions.
struct TrialScore {
  bool pick_correct = false;
  bool insert_correct = false;
  OutcomeKind outcome = OutcomeKind::MaxIterations;
  std::string error_kind;
};

/// `world_truth` is the episode's initial world; per-decision state comes from
/// the step snapshots in the record.
TrialScore score_trial(const EpisodeRecord& record, const WorldState& world_truth);

/// Gear ids that may be picked next: in an unsatisfied pair whose ordering
/// predecessors are all satisfied.
std::vector<int> eligible_pick_gears(const WorldState& world);

struct StageTally {
  int successes = 0;
  int trials = 0;
};

/// "s/n (p%)" with p = round(100 s / n).
std::string format_cell(int successes, int trials);

struct EvalReport {
  std::string environment;
  std::string backend;
  StageTally pick;
  StageTally insert;
  int completed = 0;  // episodes ending in Completed with the assembly done

  std::string pick_cell() const { return format_cell(pick.successes, pick.trials); }
  std::string insert_cell() const { return format_cell(insert.successes, insert.trials); }
};

/// Markdown table: one row per environment, a Pick / Insert column pair per backend.
std::string format_report(const std::vector<EvalReport>& reports);

struct TrialOptions {
  EpisodeConfig episode;  // per-trial seed and index are filled in
  std::filesystem::path out_dir;  // empty: nothing written
  int max_image_trials = 10;      // side-car images only for the first N trials
  bool record_replay = false;     // wrap backends and keep per-trial call logs
  bool no_vlm = false;            // monolithic scripted baseline instead of the VLM loop
  PromptTemplate prompt_template = default_template();
  unsigned threads = 0;           // 0: hardware concurrency
};

struct TrialsResult {
  EvalReport report;
  std::vector<EpisodeRecord> records;
  std::vector<TrialScore> scores;
  std::vector<std::vector<ReplayRecord>> replay_logs;  // record_replay only
  bool backend_failure = false;  // some trial ended in a backend fatal error
};

/// Spawns worlds with seeds seed+i and runs one episode per trial. Throws
/// ConfigError for n_trials < 1 or invalid configs.
TrialsResult run_trials(const ScenarioConfig& scenario, const BackendConfig& backend, const PolicyConfig& policy,
                        int n_trials, std::uint64_t seed, const TrialOptions& options = {});

/// Without the VLM loop: one scripted routine detects parts in the top image and
/// tries to insert each gear on the nearest shaft.
EpisodeRecord run_monolithic_episode(const WorldState& world, const PolicySet& policies, const EpisodeConfig& config);

/// Writes report.md and episodes/trial_NNN.jsonl (and replay/ logs if recorded).
void write_trial_outputs(const std::filesystem::path& dir, const ScenarioConfig& scenario,
                         const BackendConfig& backend, const PolicyConfig& policy, std::uint64_t seed,
                         const TrialsResult& result);

/// Rebuilds reports from the episode headers under dir/episodes.
std::vector<EvalReport> load_reports(const std::filesystem::path& dir);

// Options shared by the CLI flags and the JSON config file.
struct RunOptions {
  std::string scenario = "sim";
  BackendConfig backend;
  int trials = 10;
  std::uint64_t seed = 1;
  std::filesystem::path out_dir;
  double policy_noise = 0.0;
  int parse_retries = 2;
  int max_image_trials = 10;
  std::filesystem::path template_path;
  bool no_vlm = false;
  bool record_replay = false;
};

/// Applies the keys present in a JSON config over `base`.
RunOptions apply_run_config_json(RunOptions base, std::string_view json_text);

/// Runs the trials, writes outputs, prints the table. Returns an exit code.
int execute_run(const RunOptions& options, std::ostream& out, std::ostream& err);

struct PlaybackResult {
  bool identical = false;
  std::vector<std::string> expected_hashes;
  std::vector<std::string> actual_hashes;
  EpisodeRecord record;
};

/// Re-runs a recorded episode against its replay log and compares step hashes.
/// The episode JSONL defaults to ../episodes/<same file name>.
PlaybackResult playback_episode(const std::filesystem::path& replay_file,
                                const std::filesystem::path& episode_file = {});

}  // namespace asmvlm
