#include "asmvlm/orchestrator.hpp"

#include <algorithm>

#include "asmvlm/error.hpp"
#include "asmvlm/render.hpp"
#include "json_util.hpp"

namespace asmvlm {

using detail::Json;

void EpisodeConfig::validate() const {
  if (max_iterations < 0) throw Error(ErrorCode::ConfigError, "max_iterations must be >= 0 (0 selects the default)");
  if (parse_retries < 0) throw Error(ErrorCode::ConfigError, "parse_retries must be >= 0");
  if (chunk_length < 1) throw Error(ErrorCode::ConfigError, "chunk_length must be >= 1");
  if (step_budget_per_skill < chunk_length) throw Error(ErrorCode::ConfigError, "step budget below one chunk");
  if (!(z_offset >= 0.0)) throw Error(ErrorCode::ConfigError, "z_offset must be >= 0");
  try {
    mark_style.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::ConfigError, e.what());
  }
}

std::mt19937_64 iteration_rng(std::uint64_t seed, std::uint64_t episode_index, int iteration) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(episode_index), static_cast<std::uint32_t>(episode_index >> 32),
                    static_cast<std::uint32_t>(iteration)};
  return std::mt19937_64(seq);
}

int default_max_iterations(const GoalSpec& goal) { return 4 * static_cast<int>(goal.required_insertions.size()) + 2; }

std::string_view to_string(OutcomeKind kind) {
  switch (kind) {
    case OutcomeKind::Completed:
      return "Completed";
    case OutcomeKind::MaxIterations:
      return "MaxIterations";
    case OutcomeKind::FatalError:
      return "FatalError";
  }
  return "Unknown";
}

int EpisodeRecord::decision_count() const {
  return static_cast<int>(std::count_if(steps.begin(), steps.end(), [](const EpisodeStep& s) {
    return std::holds_alternative<SkillDecision>(s.decision);
  }));
}

namespace {

std::vector<std::string> labels_of(const WorldState& world, bool gears) {
  std::vector<std::string> out;
  for (const auto& o : world.objects) {
    if (gears ? !o.is_gear() : !o.is_shaft()) continue;
    if (std::find(out.begin(), out.end(), o.label) == out.end()) out.push_back(o.label);
  }
  return out;
}

// The task-object view shows the first gear the goal asks for.
int task_object_id(const WorldState& world) {
  if (!world.goal.required_insertions.empty()) return world.goal.required_insertions.front().first;
  for (const auto& o : world.objects) {
    if (o.markable()) return o.object_id;
  }
  return 0;
}

std::string error_name(const std::exception& e) {
  if (const auto* err = dynamic_cast<const Error*>(&e)) return std::string(to_string(err->code()));
  return std::string(to_string(ErrorCode::BackendUnavailable));
}

}  // namespace

EpisodeRecord run_episode(const WorldState& world, const EpisodeComponents& components, const EpisodeConfig& config) {
  if (!components.recognition || !components.reasoning || !components.policies || !components.prompt_template) {
    throw Error(ErrorCode::ConfigError, "episode components incomplete");
  }
  config.validate();
  components.prompt_template->validate();

  EpisodeRecord record;
  record.config = config;
  record.max_iterations = config.max_iterations > 0 ? config.max_iterations : default_max_iterations(world.goal);
  record.initial_world = world;

  ExecutorConfig exec;
  exec.z_offset = config.z_offset;
  exec.step_budget = config.step_budget_per_skill;
  exec.chunk_length = config.chunk_length;

  const Camera top = world.top_camera.with_view(CameraView::TopCurrent);
  const Camera goal_cam = top.with_view(CameraView::TopGoal);
  std::mt19937_64 init_rng = iteration_rng(config.seed, config.episode_index, 0);
  record.init_result = execute_skill(world, Skill::init(), {}, top, *components.policies, exec, init_rng);
  WorldState current = record.init_result->world_after;

  const std::vector<std::string> object_labels =
      config.object_labels.empty() ? labels_of(world, true) : config.object_labels;
  const std::vector<std::string> location_labels =
      config.location_labels.empty() ? labels_of(world, false) : config.location_labels;

  std::vector<Skill> history;
  int call_index = 0;
  bool finished = false;
  for (int iteration = 1; iteration <= record.max_iterations && !finished; ++iteration) {
    EpisodeStep step;
    step.iteration = iteration;
    step.world_before = current;
    const auto fatal = [&](std::string kind, std::string detail) {
      record.outcome = {OutcomeKind::FatalError, std::move(kind), std::move(detail)};
      step.world_hash = world_hash(current);
      record.steps.push_back(std::move(step));
      finished = true;
    };

    MarkedTriplet marked;
    GroundTruth truth;
    truth.world = &current;
    truth.current_camera = top;
    truth.goal_camera = goal_cam;
    try {
      const int object_id = task_object_id(current);
      if (object_id == 0) throw Error(ErrorCode::InvalidScenario, "world has no markable object");
      truth.object_camera = object_closeup_camera(current, object_id);
      ImageTriplet triplet{render(current, truth.object_camera), render(current, top), render(current, goal_cam)};
      RecognitionRequest rec{triplet, object_labels, location_labels, build_recognition_prompt(object_labels),
                             {config.episode_index, call_index, &truth}};
      step.annotations = components.recognition->recognize(rec);
      marked = mark_triplet(triplet, step.annotations, config.mark_style);
    } catch (const std::exception& e) {
      fatal(error_name(e), e.what());
      break;
    }

    if (config.hash_images || components.image_sink) {
      step.images = {marked.images.object_img.content_hash(), marked.images.current_img.content_hash(),
                     marked.images.goal_img.content_hash()};
      if (components.image_sink) {
        components.image_sink(step.images.object, marked.images.object_img);
        components.image_sink(step.images.current, marked.images.current_img);
        components.image_sink(step.images.goal, marked.images.goal_img);
      }
    }

    std::optional<SkillDecision> decision;
    try {
      ReasoningRequest req{marked, build_reasoning_prompt(*components.prompt_template, marked, history),
                           {config.episode_index, 0, &truth}};
      const std::set<int> known = req.known_markers();
      for (int attempt = 0; attempt <= config.parse_retries; ++attempt) {
        req.context.call_index = call_index++;
        ++step.reasoning_calls;
        ParseResult parsed = parse_decision(components.reasoning->decide(req), known);
        if (auto* d = std::get_if<SkillDecision>(&parsed)) {
          decision = std::move(*d);
          break;
        }
        step.decision = std::get<ParseError>(parsed);
      }
    } catch (const std::exception& e) {
      fatal(error_name(e), e.what());
      break;
    }
    if (!decision) {
      fatal("UnparseableReply", "no valid decision after " + std::to_string(step.reasoning_calls) + " call(s)");
      break;
    }

    step.decision = *decision;
    history.push_back(decision->skill);
    std::mt19937_64 rng = iteration_rng(config.seed, config.episode_index, iteration);
    SkillResult result =
        execute_skill(current, decision->skill, marked.annotations.current, top, *components.policies, exec, rng);
    current = result.world_after;
    step.skill_result = std::move(result);
    step.world_hash = world_hash(current);
    record.steps.push_back(std::move(step));
    if (decision->skill.name == SkillName::Done) {
      record.outcome = {OutcomeKind::Completed, "", ""};
      finished = true;
    }
  }
  if (!finished) record.outcome = {OutcomeKind::MaxIterations, "", "no done decision within the iteration cap"};

  record.final_world = current;
  record.assembly_complete = assembly_complete(current);
  return record;
}

namespace {

Json skill_result_json(const SkillResult& r) {
  Json j{{"status", to_string(r.status)},
         {"reason", r.reason},
         {"steps_used", r.steps_used},
         {"policy_queries", r.policy_queries},
         {"world_hash", world_hash(r.world_after)}};
  j["error"] = r.error ? Json(std::string(to_string(*r.error))) : Json();
  return j;
}

Json decision_json(const StepDecision& d) {
  if (const auto* s = std::get_if<SkillDecision>(&d)) {
    return {{"kind", "skill"},
            {"skill", signature(s->skill.name).keyword},
            {"marker", s->skill.marker},
            {"extraction_mode", s->extraction_mode == ExtractionMode::Strict ? "strict" : "tolerant"},
            {"raw_text", s->raw_text}};
  }
  if (const auto* e = std::get_if<ParseError>(&d)) {
    Json j{{"kind", "parse_error"}, {"error", to_string(e->kind)}, {"message", e->message}};
    j["span"] = e->span ? Json::array({e->span->first, e->span->second}) : Json();
    return j;
  }
  return Json();
}

Json config_json(const EpisodeConfig& c) {
  return {{"max_iterations", c.max_iterations},
          {"parse_retries", c.parse_retries},
          {"step_budget_per_skill", c.step_budget_per_skill},
          {"chunk_length", c.chunk_length},
          {"z_offset", c.z_offset},
          {"seed", c.seed},
          {"episode_index", c.episode_index},
          {"object_labels", c.object_labels},
          {"location_labels", c.location_labels}};
}

}  // namespace

std::string episode_to_jsonl(const EpisodeRecord& record, const std::string& extra_header_json) {
  Json header{{"type", "header"},
              {"scenario", record.initial_world.scenario},
              {"config", config_json(record.config)},
              {"max_iterations", record.max_iterations},
              {"outcome",
               {{"kind", to_string(record.outcome.kind)},
                {"error_kind", record.outcome.error_kind},
                {"detail", record.outcome.detail}}},
              {"assembly_complete", record.assembly_complete},
              {"initial_world_hash", world_hash(record.initial_world)},
              {"final_world_hash", world_hash(record.final_world)},
              {"steps", record.steps.size()},
              {"decisions", record.decision_count()}};
  header["init_result"] = record.init_result ? skill_result_json(*record.init_result) : Json();
  const Json extra = detail::parse_json(extra_header_json, "extra header");
  if (!extra.is_object()) throw Error(ErrorCode::ConfigError, "extra header must be a JSON object");
  for (const auto& [key, value] : extra.items()) header[key] = value;

  std::string out = detail::canonical_dump(header) + "\n";
  for (const auto& s : record.steps) {
    Json line{{"type", "step"},
              {"iteration", s.iteration},
              {"annotations", detail::parse_json(triplet_annotations_to_json(s.annotations), "annotations")},
              {"decision", decision_json(s.decision)},
              {"reasoning_calls", s.reasoning_calls},
              {"world_before_hash", world_hash(s.world_before)},
              {"world_hash", s.world_hash}};
    line["skill_result"] = s.skill_result ? skill_result_json(*s.skill_result) : Json();
    if (!s.images.current.empty()) {
      line["images"] = {{"object", s.images.object}, {"current", s.images.current}, {"goal", s.images.goal}};
    }
    out += detail::canonical_dump(line) + "\n";
  }
  return out;
}

std::vector<std::string> step_hashes(const EpisodeRecord& record) {
  std::vector<std::string> out;
  out.reserve(record.steps.size());
  for (const auto& s : record.steps) out.push_back(s.world_hash);
  return out;
}

}  // namespace asmvlm
