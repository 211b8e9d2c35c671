#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "asmvlm/backend.hpp"
#include "asmvlm/marking.hpp"
#include "asmvlm/prompting.hpp"
#include "asmvlm/skill.hpp"
#include "asmvlm/skills.hpp"
#include "asmvlm/world.hpp"

namespace asmvlm {

struct EpisodeConfig {
  int max_iterations = 0;  // 0 selects default_max_iterations(goal)
  int parse_retries = 2;
  int step_budget_per_skill = 12 * kDefaultChunkLength;
  int chunk_length = kDefaultChunkLength;
  double z_offset = 0.05;
  std::uint64_t seed = 0;  // policy noise stream
  std::uint64_t episode_index = 0;
  bool hash_images = true;
  std::vector<std::string> object_labels;    // empty: gear labels of the world
  std::vector<std::string> location_labels;  // empty: shaft labels of the world
  MarkStyle mark_style;

  void validate() const;  // throws ConfigError
};

/// Independent stream per (seed, episode, iteration); iteration 0 is init.
std::mt19937_64 iteration_rng(std::uint64_t seed, std::uint64_t episode_index, int iteration);

/// 4 * |required_insertions| + 2.
int default_max_iterations(const GoalSpec& goal);

enum class OutcomeKind { Completed, MaxIterations, FatalError };
std::string_view to_string(OutcomeKind kind);

struct EpisodeOutcome {
  OutcomeKind kind = OutcomeKind::MaxIterations;
  std::string error_kind;  // FatalError only: UnparseableReply, BackendUnavailable, ...
  std::string detail;
};

struct ImageHashes {
  std::string object;
  std::string current;
  std::string goal;
};

using StepDecision = std::variant<std::monostate, SkillDecision, ParseError>;

// One loop body: recognise, mark, reason, parse, execute.
struct EpisodeStep {
  int iteration = 0;
  TripletAnnotations annotations;
  StepDecision decision;  // monostate when a backend failed before a reply existed
  int reasoning_calls = 0;
  std::optional<SkillResult> skill_result;
  WorldState world_before;
  std::string world_hash;  // canonical serialisation of the world after the step
  ImageHashes images;      // marked images; empty unless hash_images
};

struct EpisodeRecord {
  EpisodeConfig config;
  int max_iterations = 0;  // resolved cap
  WorldState initial_world;
  std::optional<SkillResult> init_result;
  std::vector<EpisodeStep> steps;
  EpisodeOutcome outcome;
  WorldState final_world;
  bool assembly_complete = false;

  int decision_count() const;
};

using ImageSink = std::function<void(const std::string& hash, const RasterImage& image)>;

struct EpisodeComponents {
  const RecognitionBackend* recognition = nullptr;
  const ReasoningBackend* reasoning = nullptr;
  const PolicySet* policies = nullptr;
  const PromptTemplate* prompt_template = nullptr;
  ImageSink image_sink;  // receives marked images when set
};

/// Runs init once, then iterates until Done, the iteration cap or a fatal
/// backend error. Failures are reported in the outcome, never thrown, except
/// for ConfigError on invalid components.
EpisodeRecord run_episode(const WorldState& world, const EpisodeComponents& components, const EpisodeConfig& config);

/// JSONL: one header line (config, outcome, hashes, plus `extra_header` keys),
/// then one line per step.
std::string episode_to_jsonl(const EpisodeRecord& record, const std::string& extra_header_json = "{}");

/// Step world hashes in order, the replay comparison key.
std::vector<std::string> step_hashes(const EpisodeRecord& record);

}  // namespace asmvlm
