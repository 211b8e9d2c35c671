#include "asmvlm/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <ostream>
#include <queue>
#include <sstream>
#include <thread>

#include "asmvlm/error.hpp"
#include "asmvlm/render.hpp"
#include "json_util.hpp"

namespace asmvlm {

using detail::Json;
namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Scoring

std::vector<int> eligible_pick_gears(const WorldState& world) {
  std::vector<int> out;
  const auto satisfied = [&](int gear, int shaft) {
    const SceneObject* g = world.find(gear);
    return g != nullptr && g->status == ObjectStatus::inserted(shaft);
  };
  for (const auto& [gear, shaft] : world.goal.required_insertions) {
    if (satisfied(gear, shaft)) continue;
    bool ready = true;
    for (const auto& [before, after] : world.goal.ordering_constraints) {
      if (after != gear) continue;
      for (const auto& [g2, s2] : world.goal.required_insertions) {
        if (g2 == before && !satisfied(g2, s2)) ready = false;
      }
    }
    if (ready) out.push_back(gear);
  }
  return out;
}

TrialScore score_trial(const EpisodeRecord& record, const WorldState& world_truth) {
  TrialScore score;
  score.outcome = record.outcome.kind;
  score.error_kind = record.outcome.error_kind;
  const Camera top = world_truth.top_camera.with_view(CameraView::TopCurrent);
  bool pick_seen = false;
  bool insert_seen = false;
  for (const auto& step : record.steps) {
    const auto* d = std::get_if<SkillDecision>(&step.decision);
    if (d == nullptr) continue;
    const auto annotation = find_marker(step.annotations.current, d->skill.marker);
    const WorldState& before = step.world_before;
    if (d->skill.name == SkillName::Pick && !pick_seen) {
      pick_seen = true;
      const auto gear = annotation ? resolve_marker(before, top, *annotation) : std::nullopt;
      const auto eligible = eligible_pick_gears(before);
      score.pick_correct = gear && std::find(eligible.begin(), eligible.end(), *gear) != eligible.end();
    } else if (d->skill.name == SkillName::Insert && !insert_seen) {
      insert_seen = true;
      const auto shaft = annotation ? resolve_marker(before, top, *annotation) : std::nullopt;
      const auto& pairs = before.goal.required_insertions;
      score.insert_correct = shaft && before.robot.holding &&
                             std::find(pairs.begin(), pairs.end(), std::make_pair(*before.robot.holding, *shaft)) !=
                                 pairs.end();
    }
  }
  return score;
}

std::string format_cell(int successes, int trials) {
  const long pct = trials > 0 ? std::lround(100.0 * successes / trials) : 0;
  return std::to_string(successes) + "/" + std::to_string(trials) + " (" + std::to_string(pct) + "%)";
}

std::string format_report(const std::vector<EvalReport>& reports) {
  std::vector<std::string> environments;
  std::vector<std::string> backends;
  std::map<std::pair<std::string, std::string>, const EvalReport*> cells;
  for (const auto& r : reports) {
    if (std::find(environments.begin(), environments.end(), r.environment) == environments.end()) {
      environments.push_back(r.environment);
    }
    if (std::find(backends.begin(), backends.end(), r.backend) == backends.end()) backends.push_back(r.backend);
    cells[{r.environment, r.backend}] = &r;
  }
  std::string out = "| Environment |";
  std::string rule = "|---|";
  for (const auto& b : backends) {
    out += " " + b + " Pick | " + b + " Insert |";
    rule += "---|---|";
  }
  out += "\n" + rule + "\n";
  for (const auto& env : environments) {
    out += "| " + env + " |";
    for (const auto& b : backends) {
      auto it = cells.find({env, b});
      if (it == cells.end()) {
        out += " - | - |";
      } else {
        out += " " + it->second->pick_cell() + " | " + it->second->insert_cell() + " |";
      }
    }
    out += "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// No-VLM baseline

namespace {

struct Blob {
  double u = 0.0;  // centroid, continuous image coordinates
  double v = 0.0;
  long area = 0;
};

std::vector<Blob> find_blobs(const RasterImage& image) {
  std::vector<char> seen(static_cast<std::size_t>(image.width()) * image.height(), 0);
  std::vector<Blob> blobs;
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x) {
      const std::size_t idx = static_cast<std::size_t>(y) * image.width() + x;
      if (seen[idx]) continue;
      const Rgb color = image.at(x, y);
      seen[idx] = 1;
      if (color == kTableColor || color == kPlateColor) continue;
      Blob b;
      std::queue<PixelCoord> frontier;
      frontier.push({x, y});
      while (!frontier.empty()) {
        const PixelCoord p = frontier.front();
        frontier.pop();
        b.u += p.x + 0.5;
        b.v += p.y + 0.5;
        ++b.area;
        for (const PixelCoord n : {PixelCoord{p.x + 1, p.y}, PixelCoord{p.x - 1, p.y}, PixelCoord{p.x, p.y + 1},
                                   PixelCoord{p.x, p.y - 1}}) {
          if (!image.contains(n.x, n.y)) continue;
          const std::size_t j = static_cast<std::size_t>(n.y) * image.width() + n.x;
          if (seen[j] || !(image.at(n.x, n.y) == color)) continue;
          seen[j] = 1;
          frontier.push(n);
        }
      }
      b.u /= b.area;
      b.v /= b.area;
      blobs.push_back(b);
    }
  }
  return blobs;
}

// Blob areas at 1 mm/px: gear rings are several hundred pixels, shaft tops
// well under a hundred, tooth ticks a dozen or so.
constexpr long kGearMinArea = 300;
constexpr long kShaftMinArea = 40;

}  // namespace

EpisodeRecord run_monolithic_episode(const WorldState& world, const PolicySet& policies, const EpisodeConfig& config) {
  config.validate();
  EpisodeRecord record;
  record.config = config;
  record.initial_world = world;
  ExecutorConfig exec;
  exec.z_offset = config.z_offset;
  exec.step_budget = config.step_budget_per_skill;
  exec.chunk_length = config.chunk_length;
  const Camera top = world.top_camera.with_view(CameraView::TopCurrent);

  std::mt19937_64 rng = iteration_rng(config.seed, config.episode_index, 0);
  record.init_result = execute_skill(world, Skill::init(), {}, top, policies, exec, rng);
  WorldState current = record.init_result->world_after;

  // One look at the scene, then a fixed plan: every gear onto the nearest unused shaft.
  AnnotationSet gears;
  AnnotationSet shafts;
  for (const Blob& b : find_blobs(render(current, top))) {
    const PixelCoord px{static_cast<int>(std::floor(b.u)), static_cast<int>(std::floor(b.v))};
    if (b.area >= kGearMinArea) {
      gears.push_back({static_cast<int>(gears.size()) + 1, px, "part"});
    } else if (b.area >= kShaftMinArea) {
      shafts.push_back({kLocationMarkerMin + static_cast<int>(shafts.size()), px, "site"});
    }
  }
  std::sort(gears.begin(), gears.end(), [](const auto& a, const auto& b) {
    return std::tie(a.pixel.x, a.pixel.y) < std::tie(b.pixel.x, b.pixel.y);
  });
  AnnotationSet all = gears;
  all.insert(all.end(), shafts.begin(), shafts.end());

  const auto px_distance = [](const PointAnnotation& a, const PointAnnotation& b) {
    return std::hypot(a.pixel.x - b.pixel.x, a.pixel.y - b.pixel.y);
  };
  std::vector<int> used;
  std::vector<Skill> plan;
  for (const auto& g : gears) {
    const PointAnnotation* best = nullptr;
    for (const auto& s : shafts) {
      if (px_distance(g, s) < 3.0) {  // already sitting on a shaft
        best = nullptr;
        used.push_back(s.marker_id);
        break;
      }
    }
    for (const auto& s : shafts) {
      if (std::find(used.begin(), used.end(), s.marker_id) != used.end()) continue;
      if (best == nullptr || px_distance(g, s) < px_distance(g, *best)) best = &s;
    }
    if (best == nullptr) continue;
    used.push_back(best->marker_id);
    plan.push_back(Skill::pick(g.marker_id));
    plan.push_back(Skill::insert(best->marker_id));
  }
  plan.push_back(Skill::done());

  int iteration = 0;
  for (const Skill& skill : plan) {
    EpisodeStep step;
    step.iteration = ++iteration;
    step.world_before = current;
    step.annotations.current = all;
    step.decision = SkillDecision{skill, format_decision(skill), ExtractionMode::Strict};
    std::mt19937_64 step_rng = iteration_rng(config.seed, config.episode_index, iteration);
    SkillResult r = execute_skill(current, skill, all, top, policies, exec, step_rng);
    current = r.world_after;
    step.skill_result = std::move(r);
    step.world_hash = world_hash(current);
    record.steps.push_back(std::move(step));
  }
  record.max_iterations = static_cast<int>(plan.size());
  record.outcome = {OutcomeKind::Completed, "", "scripted plan finished"};
  record.final_world = current;
  record.assembly_complete = assembly_complete(current);
  return record;
}

// ---------------------------------------------------------------------------
// Trials

namespace {

std::string trial_name(int index) {
  char buffer[32];
  std::snprintf(buffer, sizeof buffer, "trial_%03d.jsonl", index);
  return buffer;
}

bool is_backend_failure(const EpisodeOutcome& outcome) {
  return outcome.kind == OutcomeKind::FatalError && outcome.error_kind != "UnparseableReply";
}

}  // namespace

TrialsResult run_trials(const ScenarioConfig& scenario, const BackendConfig& backend, const PolicyConfig& policy,
                        int n_trials, std::uint64_t seed, const TrialOptions& options) {
  if (n_trials < 1) throw Error(ErrorCode::ConfigError, "n_trials must be >= 1");
  validate_scenario(scenario);
  backend.validate();
  options.episode.validate();
  options.prompt_template.validate();
  const PolicySet policies = PolicyRegistry::with_builtins().make_policies(policy);

  // A replay directory holds one log per trial; a single file serves every trial.
  const bool replay_dir = backend.kind == BackendKind::Replay && fs::is_directory(backend.replay_path);
  BackendPair shared;
  if (!replay_dir && !options.no_vlm) shared = make_backends(backend);

  const fs::path image_dir = options.out_dir.empty() ? fs::path() : options.out_dir / "images";
  if (!image_dir.empty()) fs::create_directories(image_dir);
  std::mutex image_mutex;

  TrialsResult result;
  result.records.resize(static_cast<std::size_t>(n_trials));
  result.scores.resize(static_cast<std::size_t>(n_trials));
  if (options.record_replay) result.replay_logs.resize(static_cast<std::size_t>(n_trials));

  const auto run_one = [&](int i) {
    const WorldState world = spawn_world(scenario, seed + static_cast<std::uint64_t>(i));
    EpisodeConfig ep = options.episode;
    ep.seed = seed;
    ep.episode_index = static_cast<std::uint64_t>(i);
    EpisodeRecord record;
    if (options.no_vlm) {
      record = run_monolithic_episode(world, policies, ep);
    } else {
      BackendPair pair = shared;
      if (replay_dir) {
        BackendConfig per_trial = backend;
        per_trial.replay_path = backend.replay_path / trial_name(i);
        pair = make_backends(per_trial);
      }
      std::shared_ptr<RecordingBackend> recorder;
      if (options.record_replay) {
        recorder = std::make_shared<RecordingBackend>(pair);
        pair = {recorder, recorder};
      }
      EpisodeComponents components{pair.recognition.get(), pair.reasoning.get(), &policies, &options.prompt_template,
                                   {}};
      if (!image_dir.empty() && i < options.max_image_trials) {
        components.image_sink = [&](const std::string& hash, const RasterImage& image) {
          const fs::path path = image_dir / (hash + ".ppm");
          std::lock_guard lock(image_mutex);
          if (!fs::exists(path)) write_ppm(image, path);
        };
      }
      record = run_episode(world, components, ep);
      if (recorder) result.replay_logs[static_cast<std::size_t>(i)] = recorder->records();
    }
    result.scores[static_cast<std::size_t>(i)] = score_trial(record, world);
    result.records[static_cast<std::size_t>(i)] = std::move(record);
  };

  unsigned threads = options.threads != 0 ? options.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(n_trials));
  if (threads <= 1) {
    for (int i = 0; i < n_trials; ++i) run_one(i);
  } else {
    std::atomic<int> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        for (int i = next++; i < n_trials; i = next++) {
          try {
            run_one(i);
          } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    }
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
  }

  EvalReport& report = result.report;
  report.environment = scenario.name;
  report.backend = options.no_vlm ? "no-vlm" : std::string(to_string(backend.kind));
  report.pick.trials = n_trials;
  report.insert.trials = n_trials;
  for (int i = 0; i < n_trials; ++i) {
    const TrialScore& s = result.scores[static_cast<std::size_t>(i)];
    const EpisodeRecord& r = result.records[static_cast<std::size_t>(i)];
    report.pick.successes += s.pick_correct ? 1 : 0;
    report.insert.successes += s.insert_correct ? 1 : 0;
    if (r.outcome.kind == OutcomeKind::Completed && r.assembly_complete) ++report.completed;
    if (is_backend_failure(r.outcome)) result.backend_failure = true;
  }
  return result;
}

// ---------------------------------------------------------------------------
// Output files

namespace {

Json episode_config_from_header(const Json& c, EpisodeConfig& ep) {
  ep.max_iterations = c.value("max_iterations", 0);
  ep.parse_retries = c.value("parse_retries", 2);
  ep.step_budget_per_skill = c.value("step_budget_per_skill", ep.step_budget_per_skill);
  ep.chunk_length = c.value("chunk_length", ep.chunk_length);
  ep.z_offset = c.value("z_offset", ep.z_offset);
  ep.seed = c.value("seed", std::uint64_t{0});
  ep.episode_index = c.value("episode_index", std::uint64_t{0});
  ep.object_labels = c.value("object_labels", std::vector<std::string>{});
  ep.location_labels = c.value("location_labels", std::vector<std::string>{});
  return c;
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << text;
}

}  // namespace

void write_trial_outputs(const fs::path& dir, const ScenarioConfig& scenario, const BackendConfig& backend,
                         const PolicyConfig& policy, std::uint64_t seed, const TrialsResult& result) {
  fs::create_directories(dir / "episodes");
  write_text(dir / "report.md", format_report({result.report}));
  const Json scenario_json = detail::parse_json(scenario_to_json(scenario), "scenario");
  for (std::size_t i = 0; i < result.records.size(); ++i) {
    const TrialScore& s = result.scores[i];
    Json extra{{"environment", result.report.environment},
               {"backend", result.report.backend},
               {"trial", i},
               {"world_seed", seed + i},
               {"scenario_json", scenario_json},
               {"policy_noise", policy.noise_sigma},
               {"faults",
                {{"pick_error_rate", backend.faults.pick_error_rate},
                 {"insert_error_rate", backend.faults.insert_error_rate},
                 {"seed", backend.faults.seed}}},
               {"score", {{"pick_correct", s.pick_correct}, {"insert_correct", s.insert_correct}}}};
    write_text(dir / "episodes" / trial_name(static_cast<int>(i)), episode_to_jsonl(result.records[i], extra.dump()));
  }
  for (std::size_t i = 0; i < result.replay_logs.size(); ++i) {
    write_replay_file(dir / "replay" / trial_name(static_cast<int>(i)), result.replay_logs[i]);
  }
}

std::vector<EvalReport> load_reports(const fs::path& dir) {
  const fs::path episodes = dir / "episodes";
  if (!fs::is_directory(episodes)) throw Error(ErrorCode::IoError, "no episodes directory under " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(episodes)) {
    if (entry.path().extension() == ".jsonl") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<EvalReport> reports;
  for (const auto& f : files) {
    const auto lines = read_lines(f);
    if (lines.empty()) continue;
    const Json h = detail::parse_json(lines.front(), "episode header");
    const std::string env = h.value("environment", h.value("scenario", std::string("unknown")));
    const std::string backend = h.value("backend", std::string("unknown"));
    auto it = std::find_if(reports.begin(), reports.end(),
                           [&](const EvalReport& r) { return r.environment == env && r.backend == backend; });
    if (it == reports.end()) {
      reports.push_back({env, backend, {}, {}, 0});
      it = std::prev(reports.end());
    }
    const Json score = h.value("score", Json::object());
    ++it->pick.trials;
    ++it->insert.trials;
    it->pick.successes += score.value("pick_correct", false) ? 1 : 0;
    it->insert.successes += score.value("insert_correct", false) ? 1 : 0;
    const Json outcome = h.value("outcome", Json::object());
    if (outcome.value("kind", std::string()) == "Completed" && h.value("assembly_complete", false)) ++it->completed;
  }
  return reports;
}

// ---------------------------------------------------------------------------
// Run configuration

RunOptions apply_run_config_json(RunOptions base, std::string_view json_text) {
  const Json doc = detail::parse_json(json_text, "run config");
  if (!doc.is_object()) throw Error(ErrorCode::ConfigError, "run config must be a JSON object");
  const auto kind = [](const Json& v) {
    const auto k = backend_kind_from_string(v.get<std::string>());
    if (!k) throw Error(ErrorCode::ConfigError, "unknown backend '" + v.get<std::string>() + "'");
    return *k;
  };
  try {
    for (const auto& [key, v] : doc.items()) {
      if (key == "scenario") base.scenario = v.get<std::string>();
      else if (key == "backend") base.backend.kind = kind(v);
      else if (key == "wrapped") base.backend.wrapped = kind(v);
      else if (key == "trials") base.trials = v.get<int>();
      else if (key == "seed") base.seed = v.get<std::uint64_t>();
      else if (key == "out") base.out_dir = v.get<std::string>();
      else if (key == "pick_error") base.backend.faults.pick_error_rate = v.get<double>();
      else if (key == "insert_error") base.backend.faults.insert_error_rate = v.get<double>();
      else if (key == "fault_seed") base.backend.faults.seed = v.get<std::uint64_t>();
      else if (key == "policy_noise") base.policy_noise = v.get<double>();
      else if (key == "parse_retries") base.parse_retries = v.get<int>();
      else if (key == "max_image_trials") base.max_image_trials = v.get<int>();
      else if (key == "template") base.template_path = v.get<std::string>();
      else if (key == "no_vlm") base.no_vlm = v.get<bool>();
      else if (key == "record_replay") base.record_replay = v.get<bool>();
      else if (key == "replay_path") base.backend.replay_path = v.get<std::string>();
      else if (key == "http") {
        HttpConfig& h = base.backend.http;
        for (const auto& [hk, hv] : v.items()) {
          if (hk == "base_url") h.base_url = hv.get<std::string>();
          else if (hk == "model_name") h.model_name = hv.get<std::string>();
          else if (hk == "api_key_env_var") h.api_key_env_var = hv.get<std::string>();
          else if (hk == "timeout_s") h.timeout_s = hv.get<double>();
          else if (hk == "max_retries") h.max_retries = hv.get<int>();
          else if (hk == "backoff_initial_ms") h.backoff_initial_ms = hv.get<int>();
          else throw Error(ErrorCode::ConfigError, "unknown http key '" + hk + "'");
        }
      } else {
        throw Error(ErrorCode::ConfigError, "unknown config key '" + key + "'");
      }
    }
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::ConfigError, std::string("bad value in run config: ") + e.what());
  }
  return base;
}

int execute_run(const RunOptions& options, std::ostream& out, std::ostream& err) {
  try {
    const ScenarioConfig scenario = load_scenario(options.scenario);
    BackendConfig backend = options.backend;
    if (backend.faults.seed == 0) backend.faults.seed = options.seed;
    PolicyConfig policy;
    policy.noise_sigma = options.policy_noise;

    TrialOptions trial;
    trial.episode.parse_retries = options.parse_retries;
    trial.episode.hash_images = !options.out_dir.empty();
    trial.out_dir = options.out_dir;
    trial.max_image_trials = options.max_image_trials;
    trial.record_replay = options.record_replay;
    trial.no_vlm = options.no_vlm;
    if (!options.template_path.empty()) trial.prompt_template = load_template(options.template_path);

    const TrialsResult result = run_trials(scenario, backend, policy, options.trials, options.seed, trial);
    if (!options.out_dir.empty()) write_trial_outputs(options.out_dir, scenario, backend, policy, options.seed, result);
    out << format_report({result.report});
    out << "completed assemblies: " << result.report.completed << "/" << options.trials << "\n";
    if (result.backend_failure) {
      err << "at least one trial ended in a backend error\n";
      return kExitBackendError;
    }
    return kExitOk;
  } catch (const Error& e) {
    err << e.what() << "\n";
    switch (e.code()) {
      case ErrorCode::BackendUnavailable:
      case ErrorCode::EmptyReply:
      case ErrorCode::MalformedPoints:
      case ErrorCode::ReplayMismatch:
        return kExitBackendError;
      default:
        return kExitConfigError;
    }
  } catch (const fs::filesystem_error& e) {
    err << e.what() << "\n";
    return kExitConfigError;
  }
}

// ---------------------------------------------------------------------------
// Playback

PlaybackResult playback_episode(const fs::path& replay_file, const fs::path& episode_file) {
  const fs::path episode_path =
      episode_file.empty() ? replay_file.parent_path().parent_path() / "episodes" / replay_file.filename() : episode_file;
  const auto lines = read_lines(episode_path);
  if (lines.empty()) throw Error(ErrorCode::ConfigError, "empty episode file " + episode_path.string());
  const Json header = detail::parse_json(lines.front(), "episode header");
  if (!header.contains("scenario_json") || !header.contains("world_seed")) {
    throw Error(ErrorCode::ConfigError, "episode header lacks scenario_json / world_seed");
  }

  const ScenarioConfig scenario = scenario_from_json(header["scenario_json"].dump());
  const WorldState world = spawn_world(scenario, header["world_seed"].get<std::uint64_t>());
  EpisodeConfig ep;
  episode_config_from_header(header.value("config", Json::object()), ep);
  ep.hash_images = false;
  PolicyConfig policy;
  policy.noise_sigma = header.value("policy_noise", 0.0);
  const PolicySet policies = PolicyRegistry::with_builtins().make_policies(policy);
  const PromptTemplate tmpl = default_template();

  auto replay = ReplayBackend::from_file(replay_file);
  EpisodeComponents components{replay.get(), replay.get(), &policies, &tmpl, {}};

  PlaybackResult result;
  result.record = run_episode(world, components, ep);
  result.actual_hashes = step_hashes(result.record);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const Json step = detail::parse_json(lines[i], "episode step");
    result.expected_hashes.push_back(step.value("world_hash", std::string()));
  }
  result.identical = result.expected_hashes == result.actual_hashes;
  return result;
}

}  // namespace asmvlm
