// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
// Usage: asmvlm_acceptance [path-to-asmvlm-cli]

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "asmvlm/annotation.hpp"
#include "asmvlm/error.hpp"
#include "asmvlm/harness.hpp"
#include "asmvlm/marking.hpp"
#include "asmvlm/prompting.hpp"
#include "asmvlm/render.hpp"
#include "asmvlm/scenario.hpp"
#include "test_support.hpp"

using namespace asmvlm;
namespace fs = std::filesystem;

namespace {

struct Check {
  bool ok = true;
  std::string detail;

  void require(bool cond, const std::string& what) {
    if (!cond && ok) detail = what;
    ok = ok && cond;
  }
};

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string cli_path;

// 1. Oracle on the simulated bench.
Check sim_oracle() {
  Check c;
  TrialOptions o;
  o.episode.hash_images = false;
  const auto t0 = std::chrono::steady_clock::now();
  const TrialsResult r = run_trials(builtin_scenario("sim"), {}, {}, 10, 1, o);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  c.require(r.report.pick_cell() == "10/10 (100%)", "pick " + r.report.pick_cell());
  c.require(r.report.insert_cell() == "10/10 (100%)", "insert " + r.report.insert_cell());
  for (const auto& rec : r.records) {
    c.require(rec.outcome.kind == OutcomeKind::Completed, "episode not completed");
    c.require(rec.decision_count() <= 7, "decisions " + std::to_string(rec.decision_count()));
  }
  c.require(secs < 30.0, "wall " + std::to_string(secs) + " s");
  if (!cli_path.empty()) {
    const std::string cmd = "\"" + cli_path + "\" run --scenario sim --backend oracle --trials 10 --seed 1 > " +
                            (fs::temp_directory_path() / "asmvlm_accept_cli.txt").string() + " 2>&1";
    c.require(std::system(cmd.c_str()) == 0, "cli exit code");
    const std::string out = read_file(fs::temp_directory_path() / "asmvlm_accept_cli.txt");
    c.require(out.find("10/10 (100%) | 10/10 (100%)") != std::string::npos, "cli table");
  }
  return c;
}

// 2. Faulty insert stage at 0.7 error over 1000 trials.
Check faulty_insert_rate() {
  Check c;
  BackendConfig b;
  b.kind = BackendKind::Faulty;
  b.faults = {0.0, 0.7, 1};
  TrialOptions o;
  o.episode.hash_images = false;
  const TrialsResult r = run_trials(builtin_scenario("real1"), b, {}, 1000, 1, o);
  const double rate = r.report.insert.successes / 1000.0;
  c.require(rate >= 0.26 && rate <= 0.34, "insert " + r.report.insert_cell());
  c.require(r.report.pick.successes == 1000, "pick " + r.report.pick_cell());
  if (c.ok) c.detail = "insert " + r.report.insert_cell();
  return c;
}

// 3. Parser totality, soundness and round-trip.
Check parser() {
  Check c;
  std::set<int> all;
  for (int i = kObjectMarkerMin; i <= kObjectMarkerMax; ++i) all.insert(i);
  for (int i = kLocationMarkerMin; i <= kLocationMarkerMax; ++i) all.insert(i);
  for (const auto& sig : kSkillTable) {
    std::vector<int> ids;
    if (sig.param == MarkerParam::Object) {
      for (int i = kObjectMarkerMin; i <= kObjectMarkerMax; ++i) ids.push_back(i);
    } else if (sig.param == MarkerParam::Location) {
      for (int i = kLocationMarkerMin; i <= kLocationMarkerMax; ++i) ids.push_back(i);
    } else {
      ids.push_back(0);
    }
    for (int id : ids) {
      const Skill s{sig.name, id};
      const ParseResult r = parse_decision(format_decision(s), all);
      const auto* d = std::get_if<SkillDecision>(&r);
      c.require(d != nullptr && d->skill == s, "round-trip " + format_decision(s));
    }
  }
  const std::set<int> known{1, 2, 3, 101, 102, 103};
  std::mt19937_64 rng(4242);
  for (int i = 0; i < 10000; ++i) {
    std::string text(std::uniform_int_distribution<int>(0, 96)(rng), '\0');
    for (char& ch : text) ch = static_cast<char>(std::uniform_int_distribution<int>(0, 255)(rng));
    if (i % 3 == 0) text = "DECISION: pick(" + std::to_string(i % 120) + ")" + text;
    try {
      const ParseResult r = parse_decision(text, known);
      if (const auto* d = std::get_if<SkillDecision>(&r)) {
        c.require(d->skill.valid(), "invalid skill accepted");
        c.require(d->skill.marker == 0 || known.count(d->skill.marker) > 0, "unknown marker accepted");
      }
    } catch (...) {
      c.require(false, "parser threw");
    }
  }
  return c;
}

// 4. Adversarial reasoning never breaks termination or the gripper invariant.
Check adversarial() {
  Check c;
  const PolicySet policies = PolicyRegistry::with_builtins().make_policies({});
  const PromptTemplate tmpl = default_template();
  using Mode = testkit::AdversarialBackend::Mode;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const WorldState w = spawn_world(testkit::random_scenario(seed), seed);
    for (Mode mode : {Mode::Garbage, Mode::RepeatPick, Mode::RandomValid}) {
      const testkit::AdversarialBackend adv(mode, seed);
      EpisodeComponents comp{&adv, &adv, &policies, &tmpl, {}};
      EpisodeConfig cfg;
      cfg.episode_index = seed;
      cfg.hash_images = false;
      try {
        const EpisodeRecord r = run_episode(w, comp, cfg);
        c.require(static_cast<int>(r.steps.size()) <= r.max_iterations, "iteration cap exceeded");
        const std::string v = testkit::episode_gripper_violation(r);
        c.require(v.empty(), adv.name() + " seed " + std::to_string(seed) + ": " + v);
      } catch (const std::exception& e) {
        c.require(false, std::string("episode threw: ") + e.what());
      }
    }
  }
  return c;
}

// 5. Clearance against the sampled annulus, and pixel round-trips.
Check geometry() {
  Check c;
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    Gear g;
    g.bore_radius_m = 0.002 + 0.006 * unit(rng);
    g.outer_radius_m = g.bore_radius_m + 0.01;
    Shaft s;
    s.radius_m = g.bore_radius_m * (0.9 + 0.15 * unit(rng));
    const double offset = 0.0005 * unit(rng);
    c.require(insertion_allowed(g, s, offset, 0.0) == testkit::annulus_oracle(g, s, offset), "clearance mismatch");
  }
  const WorldState w = spawn_world(builtin_scenario("sim"), 5);
  const Camera& cam = w.top_camera;
  int tested = 0;
  while (tested < 1000) {
    const double x = w.workspace.x_min + (w.workspace.x_max - w.workspace.x_min) * unit(rng);
    const double y = w.workspace.y_min + (w.workspace.y_max - w.workspace.y_min) * unit(rng);
    if (!cam.in_frame(x, y)) continue;
    ++tested;
    const WorldPoint back = cam.pixel_center(cam.pixel_of(x, y));
    c.require(std::hypot(back.x - x, back.y - y) < cam.meters_per_pixel, "round-trip beyond one pixel");
  }
  return c;
}

// 6. Frozen artefacts, determinism and record/playback.
Check determinism() {
  Check c;
  const fs::path golden(ASMVLM_GOLDEN_DIR);

  std::string hashes;
  for (const auto& name : builtin_scenario_names()) {
    const WorldState w = spawn_world(builtin_scenario(name), 1);
    hashes += name + " top " + render(w, w.top_camera).content_hash() + "\n";
    hashes += name + " goal " + render(w, w.top_camera.with_view(CameraView::TopGoal)).content_hash() + "\n";
    const int first = w.goal.required_insertions.front().first;
    hashes += name + " object " + render(w, object_closeup_camera(w, first)).content_hash() + "\n";
  }
  c.require(hashes == read_file(golden / "render_hashes.txt"), "render hashes");

  const WorldState w = spawn_world(builtin_scenario("sim"), 1);
  std::vector<std::string> labels = builtin_scenario("sim").recognition_labels();
  for (const auto& l : builtin_scenario("sim").location_labels()) labels.push_back(l);
  const AnnotationSet top = ground_truth_points(w, w.top_camera, labels);
  c.require(mark_image(render(w, w.top_camera), top).content_hash() + "\n" ==
                read_file(golden / "marked_sim_top.txt"),
            "marked image");

  c.require(build_recognition_prompt({"red gear", "green gear", "blue gear", "shaft A", "shaft B"}) ==
                read_file(golden / "recognition_prompt.txt"),
            "recognition prompt");

  const Camera goal = w.top_camera.with_view(CameraView::TopGoal);
  const Camera object = object_closeup_camera(w, 1);
  const std::vector<std::string> sim_labels{"red gear", "green gear", "blue gear", "shaft A", "shaft B", "shaft C"};
  TripletAnnotations a;
  a.object = ground_truth_points(w, object, {"red gear"});
  a.current = ground_truth_points(w, w.top_camera, sim_labels);
  a.goal = ground_truth_points(goal_world(w), goal, sim_labels);
  const MarkedTriplet m = mark_triplet({render(w, object), render(w, w.top_camera), render(w, goal)}, a);
  c.require(build_reasoning_prompt(default_template(), m, {Skill::pick(1), Skill::insert(101)}).serialize() ==
                read_file(golden / "reasoning_prompt.txt"),
            "reasoning prompt");

  const PolicySet policies = PolicyRegistry::with_builtins().make_policies({});
  const PromptTemplate tmpl = default_template();
  const OracleBackend oracle;
  EpisodeComponents comp{&oracle, &oracle, &policies, &tmpl, {}};
  c.require(episode_to_jsonl(run_episode(w, comp, {})) == episode_to_jsonl(run_episode(w, comp, {})),
            "episode log differs between runs");

  const fs::path dir = fs::temp_directory_path() / "asmvlm_accept_replay";
  fs::remove_all(dir);
  RunOptions o;
  o.scenario = "real2";
  o.backend.kind = BackendKind::Faulty;
  o.backend.faults = {0.3, 0.3, 3};
  o.trials = 3;
  o.seed = 5;
  o.out_dir = dir;
  o.record_replay = true;
  std::ostringstream out, err;
  c.require(execute_run(o, out, err) == kExitOk, "record run failed: " + err.str());
  for (int i = 0; i < 3; ++i) {
    const PlaybackResult p = playback_episode(dir / "replay" / ("trial_00" + std::to_string(i) + ".jsonl"));
    c.require(p.identical && !p.actual_hashes.empty(), "playback hashes differ");
  }
  fs::remove_all(dir);
  return c;
}

// 7. Every skill consumes its policy output in chunks of 16 commands.
Check chunking() {
  Check c;
  const WorldState w = spawn_world(builtin_scenario("real1"), 1);
  std::vector<std::string> labels = builtin_scenario("real1").recognition_labels();
  for (const auto& l : builtin_scenario("real1").location_labels()) labels.push_back(l);
  const AnnotationSet markers = ground_truth_points(w, w.top_camera, labels);
  const PolicySet policies = PolicyRegistry::with_builtins().make_policies({});
  const ExecutorConfig exec;
  const auto run = [&](const WorldState& from, const Skill& s) {
    testkit::ChunkCounter counter;
    const RolloutHooks hooks = counter.hooks();
    std::mt19937_64 rng(0);
    const SkillResult r = execute_skill(from, s, markers, w.top_camera, policies, exec, rng, &hooks);
    c.require(!counter.per_query.empty(), format_decision(s) + " made no policy query");
    for (int n : counter.per_query) c.require(n == 16, format_decision(s) + " chunk of " + std::to_string(n));
    return r;
  };
  const SkillResult pick = run(w, Skill::pick(1));
  const SkillResult insert = run(pick.world_after, Skill::insert(101));
  const SkillResult pick2 = run(insert.world_after, Skill::pick(2));
  run(pick2.world_after, Skill::place(102));
  return c;
}

// 8. Report cell formatting.
Check cells() {
  Check c;
  c.require(format_cell(3, 10) == "3/10 (30%)", format_cell(3, 10));
  c.require(format_cell(10, 10) == "10/10 (100%)", format_cell(10, 10));
  c.require(format_cell(0, 10) == "0/10 (0%)", format_cell(0, 10));
  c.require(format_cell(8, 10) == "8/10 (80%)", format_cell(8, 10));
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc > 1) cli_path = argv[1];
  const std::vector<std::pair<std::string, std::function<Check()>>> criteria{
      {"oracle on sim: 10/10 pick and insert, all completed, <= 7 decisions, < 30 s", sim_oracle},
      {"faulty insert error 0.7 over 1000 trials: insert rate in [0.26, 0.34]", faulty_insert_rate},
      {"parser round-trips every skill and is total and sound on 10k fuzz inputs", parser},
      {"100 random scenarios x 3 adversarial backends terminate with gripper invariant", adversarial},
      {"clearance matches sampled oracle and camera round-trips within one pixel", geometry},
      {"goldens, deterministic episode logs, record/playback identical hashes", determinism},
      {"every skill executes policy output in chunks of 16", chunking},
      {"report cells format as s/n (p%)", cells},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Check c;
    try {
      c = criteria[i].second();
    } catch (const std::exception& e) {
      c.ok = false;
      c.detail = std::string("exception: ") + e.what();
    }
    std::cout << (c.ok ? "PASS " : "FAIL ") << i + 1 << ": " << criteria[i].first;
    if (!c.detail.empty()) std::cout << " [" << c.detail << "]";
    std::cout << std::endl;
    failures += c.ok ? 0 : 1;
  }
  return failures == 0 ? 0 : 1;
}
