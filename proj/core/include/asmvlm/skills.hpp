#pragma once

#include <functional>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "asmvlm/annotation.hpp"
#include "asmvlm/camera.hpp"
#include "asmvlm/error.hpp"
#include "asmvlm/image.hpp"
#include "asmvlm/skill.hpp"
#include "asmvlm/world.hpp"

namespace asmvlm {

inline constexpr int kDefaultChunkLength = 16;

struct Trajectory {
  std::vector<Command> commands;
};

// Observation handed to a policy on every query.
struct PolicyInput {
  RasterImage camera_image;  // wrist view, re-rendered between chunks
  Camera camera;             // calibration of camera_image
  RobotState robot_state;
  Pose target_pose;  // resolved from the decision's marker
  int chunk_length = kDefaultChunkLength;
};

struct PolicyStep {
  Trajectory chunk;       // exactly chunk_length commands
  bool terminal = false;  // the policy considers its skill finished after this chunk
};

/// Maps an observation to a fixed-length command chunk. Implementations must be
/// callable concurrently; any per-episode randomness comes in through `rng`.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual std::string name() const = 0;
  virtual PolicyStep act(const PolicyInput& input, std::mt19937_64& rng) const = 0;
};

struct ScriptedPolicyParams {
  double noise_sigma = 0.0;  // m, per-chunk Gaussian offset on the target estimate
  double travel_z = 0.05;    // height the tool returns to after grasp / release
  double grasp_z = 0.001;
  double release_z = 0.005;
};

// Closed-loop stand-ins for learned skills. Every chunk is recomputed from the
// current observation.
class ScriptedPickPolicy final : public Policy {
 public:
  explicit ScriptedPickPolicy(ScriptedPolicyParams params = {}) : params_(params) {}
  std::string name() const override { return "scripted_pick"; }
  PolicyStep act(const PolicyInput& input, std::mt19937_64& rng) const override;

 private:
  ScriptedPolicyParams params_;
};

class ScriptedPlacePolicy final : public Policy {
 public:
  explicit ScriptedPlacePolicy(ScriptedPolicyParams params = {}) : params_(params) {}
  std::string name() const override { return "scripted_place"; }
  PolicyStep act(const PolicyInput& input, std::mt19937_64& rng) const override;

 private:
  ScriptedPolicyParams params_;
};

/// Localises the shaft under the tool from the wrist image, aligns, descends,
/// and releases once below the shaft top. A jammed descent is retried with a
/// fresh estimate on the next chunk.
class ScriptedInsertPolicy final : public Policy {
 public:
  explicit ScriptedInsertPolicy(ScriptedPolicyParams params = {}) : params_(params) {}
  std::string name() const override { return "scripted_insert"; }
  PolicyStep act(const PolicyInput& input, std::mt19937_64& rng) const override;

 private:
  ScriptedPolicyParams params_;
};

/// Centroid (world x, y) of the connected same-colour region under the image centre.
std::optional<WorldPoint> locate_center_blob(const RasterImage& image, const Camera& camera);

struct PolicySet {
  std::shared_ptr<const Policy> pick;
  std::shared_ptr<const Policy> place;
  std::shared_ptr<const Policy> insert;

  const Policy* for_skill(SkillName name) const;
};

struct PolicyConfig {
  double noise_sigma = 0.0;
  // skill keyword -> registered policy name; missing entries use scripted_<skill>
  std::map<std::string, std::string> assignments;
};

/// Named policy factories; the plug-in boundary for non-scripted policies.
class PolicyRegistry {
 public:
  using Factory = std::function<std::shared_ptr<const Policy>(const PolicyConfig&)>;

  /// Registry pre-populated with the scripted policies.
  static PolicyRegistry with_builtins();

  void add(const std::string& name, Factory factory);
  bool contains(const std::string& name) const;
  std::shared_ptr<const Policy> create(const std::string& name, const PolicyConfig& config) const;
  PolicySet make_policies(const PolicyConfig& config) const;

 private:
  std::map<std::string, Factory> factories_;
};

struct ExecutorConfig {
  double z_offset = 0.05;
  double approach_plane_z = 0.0;
  int step_budget = 12 * kDefaultChunkLength;
  int chunk_length = kDefaultChunkLength;
  double wrist_meters_per_pixel = 0.0001;
  int wrist_width_px = 256;
  int wrist_height_px = 256;
};

enum class SkillStatus { Succeeded, Failed, Aborted };
std::string_view to_string(SkillStatus status);

struct SkillResult {
  SkillStatus status = SkillStatus::Succeeded;
  std::string reason;               // Failed / Aborted detail
  std::optional<ErrorCode> error;   // Aborted only
  int steps_used = 0;               // policy commands applied
  int policy_queries = 0;
  WorldState world_after;
};

struct RolloutHooks {
  std::function<void(int query_index)> on_query;
  std::function<void(const Command&, const StepResult&)> on_command;
};

/// Inverse camera map of the marker pixel, at the approach plane with yaw 0.
/// Throws UnknownMarker.
Pose marker_to_workspace(int marker_id, const AnnotationSet& annotations, const Camera& camera,
                         double approach_plane_z = 0.0);

/// In-limit command sequence (rise, translate, descend) that brings the tool to
/// `target` without touching the gripper.
std::vector<Command> plan_move(const Pose& from, const Pose& to);

/// Tool to (target.x, target.y, target.z + z_offset). Throws UnreachableTarget.
WorldState approach_move(const WorldState& world, const Pose& target, double z_offset);

/// Queries the policy chunk by chunk until it reports completion or the
/// budget runs out. Throws ConfigError if the budget is below one chunk.
SkillResult rollout_policy(const WorldState& world, const Policy& policy, const Pose& target,
                           const ExecutorConfig& config, std::mt19937_64& rng, const RolloutHooks* hooks = nullptr);

/// Runs one decided skill. Precondition and marker problems come back as an
/// Aborted result with the world unchanged.
SkillResult execute_skill(const WorldState& world, const Skill& skill, const AnnotationSet& annotations,
                          const Camera& camera, const PolicySet& policies, const ExecutorConfig& config,
                          std::mt19937_64& rng, const RolloutHooks* hooks = nullptr);

}  // namespace asmvlm
