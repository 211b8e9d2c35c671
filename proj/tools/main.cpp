#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "asmvlm/error.hpp"
#include "asmvlm/harness.hpp"

namespace {

using namespace asmvlm;

// Flags are registered against scratch values and copied over the config file
// only when given on the command line.
struct RunFlags {
  std::string config_file;
  std::string scenario;
  std::string backend;
  std::string wrapped;
  int trials = 0;
  std::uint64_t seed = 0;
  std::string out;
  double pick_error = 0.0;
  double insert_error = 0.0;
  std::uint64_t fault_seed = 0;
  double policy_noise = 0.0;
  int parse_retries = 0;
  int max_image_trials = 0;
  std::string template_path;
  std::string replay_file;
  std::string base_url;
  std::string model;
  std::string api_key_env;
  bool no_vlm = false;

  std::map<std::string, CLI::Option*> opts;

  void add_to(CLI::App& app) {
    opts["config"] = app.add_option("--config", config_file, "JSON file mirroring the flags")->check(CLI::ExistingFile);
    opts["scenario"] = app.add_option("--scenario", scenario, "builtin name (sim, real1, real2, single_gear) or JSON path");
    opts["backend"] = app.add_option("--backend", backend, "oracle | faulty | replay | http");
    opts["wrapped"] = app.add_option("--wrapped", wrapped, "backend wrapped by faulty (default oracle)");
    opts["trials"] = app.add_option("--trials", trials, "number of trials");
    opts["seed"] = app.add_option("--seed", seed, "base world seed; trial i uses seed+i");
    opts["out"] = app.add_option("--out", out, "output directory");
    opts["pick_error"] = app.add_option("--pick-error", pick_error, "faulty backend pick error rate");
    opts["insert_error"] = app.add_option("--insert-error", insert_error, "faulty backend insert error rate");
    opts["fault_seed"] = app.add_option("--fault-seed", fault_seed, "fault RNG seed (default: --seed)");
    opts["policy_noise"] = app.add_option("--policy-noise", policy_noise, "policy target noise sigma in metres");
    opts["parse_retries"] = app.add_option("--parse-retries", parse_retries, "extra reasoning calls on unparseable replies");
    opts["max_image_trials"] = app.add_option("--max-image-trials", max_image_trials, "write images for the first N trials");
    opts["template"] = app.add_option("--template", template_path, "reasoning prompt template file");
    opts["replay_file"] = app.add_option("--replay-file", replay_file, "replay log for --backend replay");
    opts["base_url"] = app.add_option("--base-url", base_url, "http backend endpoint, e.g. http://localhost:8000/v1");
    opts["model"] = app.add_option("--model", model, "http backend model name");
    opts["api_key_env"] = app.add_option("--api-key-env", api_key_env, "environment variable holding the API key");
    opts["no_vlm"] = app.add_flag("--no-vlm", no_vlm, "monolithic scripted baseline without the VLM loop");
  }

  bool given(const std::string& key) const { return opts.at(key)->count() > 0; }

  RunOptions resolve() const {
    RunOptions o;
    if (given("config")) {
      std::ifstream in(config_file, std::ios::binary);
      std::stringstream buf;
      buf << in.rdbuf();
      o = apply_run_config_json(o, buf.str());
    }
    const auto kind = [](const std::string& s) {
      const auto k = backend_kind_from_string(s);
      if (!k) throw Error(ErrorCode::ConfigError, "unknown backend '" + s + "'");
      return *k;
    };
    if (given("scenario")) o.scenario = scenario;
    if (given("backend")) o.backend.kind = kind(backend);
    if (given("wrapped")) o.backend.wrapped = kind(wrapped);
    if (given("trials")) o.trials = trials;
    if (given("seed")) o.seed = seed;
    if (given("out")) o.out_dir = out;
    if (given("pick_error")) o.backend.faults.pick_error_rate = pick_error;
    if (given("insert_error")) o.backend.faults.insert_error_rate = insert_error;
    if (given("fault_seed")) o.backend.faults.seed = fault_seed;
    if (given("policy_noise")) o.policy_noise = policy_noise;
    if (given("parse_retries")) o.parse_retries = parse_retries;
    if (given("max_image_trials")) o.max_image_trials = max_image_trials;
    if (given("template")) o.template_path = template_path;
    if (given("replay_file")) o.backend.replay_path = replay_file;
    if (given("base_url")) o.backend.http.base_url = base_url;
    if (given("model")) o.backend.http.model_name = model;
    if (given("api_key_env")) o.backend.http.api_key_env_var = api_key_env;
    if (given("no_vlm")) o.no_vlm = no_vlm;
    return o;
  }
};

int run_command(const RunFlags& flags, bool record) {
  try {
    RunOptions options = flags.resolve();
    if (record) options.record_replay = true;
    return execute_run(options, std::cout, std::cerr);
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    return kExitConfigError;
  }
}

int report_command(const std::string& dir) {
  try {
    const auto reports = load_reports(dir);
    if (reports.empty()) {
      std::cerr << "no episodes under " << dir << "\n";
      return kExitConfigError;
    }
    std::cout << format_report(reports);
    return kExitOk;
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    return kExitConfigError;
  }
}

int playback_command(const std::string& file, const std::string& episode) {
  try {
    const PlaybackResult r = playback_episode(file, episode);
    std::cout << "steps: " << r.actual_hashes.size() << " (recorded " << r.expected_hashes.size() << ")\n";
    std::cout << (r.identical ? "identical step hashes\n" : "step hashes differ\n");
    return r.identical ? kExitOk : kExitBackendError;
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    return e.code() == ErrorCode::ReplayMismatch ? kExitBackendError : kExitConfigError;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Marker-prompted VLM skill selection for gear assembly"};
  app.require_subcommand(1);

  RunFlags run_flags;
  CLI::App* run = app.add_subcommand("run", "run trials and print the success table");
  run_flags.add_to(*run);

  std::string report_dir;
  CLI::App* report = app.add_subcommand("report", "rebuild the table from a run directory");
  report->add_option("--in", report_dir, "run output directory")->required();

  RunFlags record_flags;
  std::string record_dir;
  std::string playback_file;
  std::string playback_episode_file;
  CLI::App* replay = app.add_subcommand("replay", "record a run with call logs, or play one episode back");
  auto* rec = replay->add_option("--record", record_dir, "output directory of a recorded run");
  auto* play = replay->add_option("--playback", playback_file, "replay/trial_NNN.jsonl to play back");
  replay->add_option("--episode", playback_episode_file, "episode file (default: ../episodes/<same name>)");
  rec->excludes(play);
  record_flags.add_to(*replay);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfigError;
  }

  if (run->parsed()) return run_command(run_flags, false);
  if (report->parsed()) return report_command(report_dir);
  if (play->count() > 0) return playback_command(playback_file, playback_episode_file);
  if (rec->count() > 0) {
    record_flags.out = record_dir;
    record_flags.opts["out"] = rec;
    return run_command(record_flags, true);
  }
  std::cerr << "replay needs --record DIR or --playback FILE\n";
  return kExitConfigError;
}
