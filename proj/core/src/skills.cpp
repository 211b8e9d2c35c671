#include "asmvlm/skills.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

#include "asmvlm/render.hpp"

namespace asmvlm {

namespace {

constexpr double kReachTol = 1e-9;

double clamp_step(double delta, double limit) { return std::clamp(delta, -limit, limit); }

// Emits in-limit commands against a predicted tool pose until the chunk is full.
class ChunkBuilder {
 public:
  ChunkBuilder(const Pose& start, int length) : pose_(start), length_(static_cast<std::size_t>(length)) {}

  bool full() const { return commands_.size() >= length_; }

  /// Moves all axes at once; returns true when the goal was reached.
  bool move_to(double x, double y, double z) {
    while (!full()) {
      const double dx = x - pose_.x;
      const double dy = y - pose_.y;
      const double dz = z - pose_.z;
      if (std::abs(dx) <= kReachTol && std::abs(dy) <= kReachTol && std::abs(dz) <= kReachTol) return true;
      Command c{clamp_step(dx, kMaxStepTranslation), clamp_step(dy, kMaxStepTranslation),
                clamp_step(dz, kMaxStepTranslation), 0.0, Grip::Hold};
      push(c);
    }
    return std::abs(x - pose_.x) <= kReachTol && std::abs(y - pose_.y) <= kReachTol &&
           std::abs(z - pose_.z) <= kReachTol;
  }

  bool grip(Grip g) {
    if (full()) return false;
    push({0.0, 0.0, 0.0, 0.0, g});
    return true;
  }

  const Pose& pose() const { return pose_; }

  Trajectory finish() {
    while (!full()) commands_.push_back({});
    return {std::move(commands_)};
  }

 private:
  void push(const Command& c) {
    commands_.push_back(c);
    pose_.x += c.dx;
    pose_.y += c.dy;
    pose_.z += c.dz;
  }

  Pose pose_;
  std::size_t length_;
  std::vector<Command> commands_;
};

WorldPoint noisy(WorldPoint p, double sigma, std::mt19937_64& rng) {
  std::normal_distribution<double> unit(0.0, 1.0);
  const double ex = unit(rng);
  const double ey = unit(rng);
  return {p.x + sigma * ex, p.y + sigma * ey};
}

// Shared tail of every policy: back to travel height, finished once there.
PolicyStep retreat(const PolicyInput& input, double travel_z) {
  ChunkBuilder b(input.robot_state.tool_pose, input.chunk_length);
  const Pose& t = input.robot_state.tool_pose;
  const bool reached = b.move_to(t.x, t.y, std::max(t.z, travel_z));
  return {b.finish(), reached};
}

}  // namespace

std::optional<WorldPoint> locate_center_blob(const RasterImage& image, const Camera& camera) {
  if (image.empty()) return std::nullopt;
  const int cx = image.width() / 2;
  const int cy = image.height() / 2;
  const Rgb color = image.at(cx, cy);
  if (color == kTableColor || color == kPlateColor) return std::nullopt;

  std::vector<char> seen(static_cast<std::size_t>(image.width()) * image.height(), 0);
  std::queue<PixelCoord> frontier;
  frontier.push({cx, cy});
  seen[static_cast<std::size_t>(cy) * image.width() + cx] = 1;
  double sum_u = 0.0;
  double sum_v = 0.0;
  long count = 0;
  while (!frontier.empty()) {
    const PixelCoord p = frontier.front();
    frontier.pop();
    if (p.x == 0 || p.y == 0 || p.x == image.width() - 1 || p.y == image.height() - 1) return std::nullopt;
    sum_u += p.x + 0.5;
    sum_v += p.y + 0.5;
    ++count;
    for (const PixelCoord n : {PixelCoord{p.x + 1, p.y}, PixelCoord{p.x - 1, p.y}, PixelCoord{p.x, p.y + 1},
                               PixelCoord{p.x, p.y - 1}}) {
      const std::size_t idx = static_cast<std::size_t>(n.y) * image.width() + n.x;
      if (seen[idx] || !(image.at(n.x, n.y) == color)) continue;
      seen[idx] = 1;
      frontier.push(n);
    }
  }
  return camera.unproject(sum_u / count, sum_v / count);
}

PolicyStep ScriptedPickPolicy::act(const PolicyInput& input, std::mt19937_64& rng) const {
  const RobotState& rs = input.robot_state;
  if (rs.holding) return retreat(input, params_.travel_z);

  const WorldPoint goal = noisy({input.target_pose.x, input.target_pose.y}, params_.noise_sigma, rng);
  ChunkBuilder b(rs.tool_pose, input.chunk_length);
  if (rs.gripper_aperture < kMaxAperture) b.grip(Grip::Open);
  if (b.move_to(goal.x, goal.y, params_.grasp_z) && b.grip(Grip::Close)) {
    b.move_to(goal.x, goal.y, params_.travel_z);
  }
  return {b.finish(), false};
}

PolicyStep ScriptedPlacePolicy::act(const PolicyInput& input, std::mt19937_64& rng) const {
  const RobotState& rs = input.robot_state;
  if (!rs.holding) return retreat(input, params_.travel_z);

  const WorldPoint goal = noisy({input.target_pose.x, input.target_pose.y}, params_.noise_sigma, rng);
  const Pose& t = rs.tool_pose;
  ChunkBuilder b(t, input.chunk_length);
  const double arrived = std::max(0.001, 3.0 * params_.noise_sigma);
  if (planar_distance(t.x, t.y, goal.x, goal.y) <= arrived) {
    // Released wherever the descent ended; a jam over a shaft leaves it higher.
    b.grip(Grip::Open);
    const bool reached = b.move_to(t.x, t.y, std::max(t.z, params_.travel_z));
    return {b.finish(), reached};
  }
  if (b.move_to(goal.x, goal.y, t.z)) b.move_to(goal.x, goal.y, params_.release_z);
  return {b.finish(), false};
}

PolicyStep ScriptedInsertPolicy::act(const PolicyInput& input, std::mt19937_64& rng) const {
  const RobotState& rs = input.robot_state;
  if (!rs.holding) return retreat(input, params_.travel_z);

  const Pose& t = rs.tool_pose;
  ChunkBuilder b(t, input.chunk_length);
  if (t.z <= params_.release_z + kReachTol) {
    b.grip(Grip::Open);
    const bool reached = b.move_to(t.x, t.y, params_.travel_z);
    return {b.finish(), reached};
  }
  WorldPoint estimate{input.target_pose.x, input.target_pose.y};
  if (auto blob = locate_center_blob(input.camera_image, input.camera)) estimate = *blob;
  estimate = noisy(estimate, params_.noise_sigma, rng);
  // Lateral correction happens at the current height: a jammed gear sits at or
  // above the shaft top, where sideways motion is free.
  if (b.move_to(estimate.x, estimate.y, t.z)) b.move_to(estimate.x, estimate.y, params_.release_z);
  return {b.finish(), false};
}

const Policy* PolicySet::for_skill(SkillName name) const {
  switch (name) {
    case SkillName::Pick:
      return pick.get();
    case SkillName::Place:
      return place.get();
    case SkillName::Insert:
      return insert.get();
    case SkillName::Done:
    case SkillName::Init:
      break;
  }
  return nullptr;
}

PolicyRegistry PolicyRegistry::with_builtins() {
  PolicyRegistry r;
  r.add("scripted_pick", [](const PolicyConfig& c) {
    return std::make_shared<ScriptedPickPolicy>(ScriptedPolicyParams{c.noise_sigma});
  });
  r.add("scripted_place", [](const PolicyConfig& c) {
    return std::make_shared<ScriptedPlacePolicy>(ScriptedPolicyParams{c.noise_sigma});
  });
  r.add("scripted_insert", [](const PolicyConfig& c) {
    return std::make_shared<ScriptedInsertPolicy>(ScriptedPolicyParams{c.noise_sigma});
  });
  return r;
}

void PolicyRegistry::add(const std::string& name, Factory factory) { factories_[name] = std::move(factory); }

bool PolicyRegistry::contains(const std::string& name) const { return factories_.count(name) > 0; }

std::shared_ptr<const Policy> PolicyRegistry::create(const std::string& name, const PolicyConfig& config) const {
  auto it = factories_.find(name);
  if (it == factories_.end()) throw Error(ErrorCode::ConfigError, "no policy registered as '" + name + "'");
  if (!(config.noise_sigma >= 0.0)) throw Error(ErrorCode::ConfigError, "policy noise must be >= 0");
  return it->second(config);
}

PolicySet PolicyRegistry::make_policies(const PolicyConfig& config) const {
  for (const auto& [skill, name] : config.assignments) {
    const auto s = skill_from_keyword(skill);
    if (!s || signature(*s).param == MarkerParam::None) {
      throw Error(ErrorCode::ConfigError, "policies can only be assigned to pick, place or insert, not '" + skill + "'");
    }
  }
  const auto resolve = [&](const std::string& skill) {
    auto it = config.assignments.find(skill);
    return create(it == config.assignments.end() ? "scripted_" + skill : it->second, config);
  };
  return {resolve("pick"), resolve("place"), resolve("insert")};
}

std::string_view to_string(SkillStatus status) {
  switch (status) {
    case SkillStatus::Succeeded:
      return "Succeeded";
    case SkillStatus::Failed:
      return "Failed";
    case SkillStatus::Aborted:
      return "Aborted";
  }
  return "Unknown";
}

Pose marker_to_workspace(int marker_id, const AnnotationSet& annotations, const Camera& camera,
                         double approach_plane_z) {
  const auto a = find_marker(annotations, marker_id);
  if (!a) throw Error(ErrorCode::UnknownMarker, "marker " + std::to_string(marker_id) + " not annotated");
  const WorldPoint p = camera.pixel_center(a->pixel);
  return {p.x, p.y, approach_plane_z, 0.0};
}

std::vector<Command> plan_move(const Pose& from, const Pose& to) {
  std::vector<Command> out;
  const auto axis = [&](double delta, auto make) {
    if (std::abs(delta) <= kReachTol) return;
    const int n = static_cast<int>(std::ceil(std::abs(delta) / kMaxStepTranslation - 1e-9));
    for (int i = 0; i < std::max(n, 1); ++i) out.push_back(make(delta / std::max(n, 1)));
  };
  const double travel_z = std::max(from.z, to.z);
  axis(travel_z - from.z, [](double d) { return Command{0.0, 0.0, d, 0.0, Grip::Hold}; });
  const double dx = to.x - from.x;
  const double dy = to.y - from.y;
  const double span = std::max(std::abs(dx), std::abs(dy));
  if (span > kReachTol) {
    const int n = static_cast<int>(std::ceil(span / kMaxStepTranslation - 1e-9));
    for (int i = 0; i < std::max(n, 1); ++i) out.push_back({dx / std::max(n, 1), dy / std::max(n, 1), 0.0, 0.0, Grip::Hold});
  }
  axis(to.z - travel_z, [](double d) { return Command{0.0, 0.0, d, 0.0, Grip::Hold}; });
  return out;
}

WorldState approach_move(const WorldState& world, const Pose& target, double z_offset) {
  const Pose dest{target.x, target.y, target.z + z_offset, world.robot.tool_pose.yaw};
  if (!world.workspace.contains(dest.x, dest.y, dest.z)) {
    throw Error(ErrorCode::UnreachableTarget, "approach pose outside the workspace");
  }
  WorldState w = world;
  for (const Command& c : plan_move(w.robot.tool_pose, dest)) {
    StepResult r = apply_command(w, c);
    if (r.rejected) throw Error(ErrorCode::UnreachableTarget, "approach blocked: " + *r.rejected);
    w = std::move(r.world);
  }
  return w;
}

SkillResult rollout_policy(const WorldState& world, const Policy& policy, const Pose& target,
                           const ExecutorConfig& config, std::mt19937_64& rng, const RolloutHooks* hooks) {
  if (config.chunk_length < 1 || config.step_budget < config.chunk_length) {
    throw Error(ErrorCode::ConfigError, "step budget must cover at least one chunk");
  }
  SkillResult result;
  result.world_after = world;
  WorldState& w = result.world_after;
  bool terminal = false;
  while (!terminal && result.steps_used + config.chunk_length <= config.step_budget) {
    PolicyInput input;
    input.camera = wrist_camera(w, config.wrist_meters_per_pixel, config.wrist_width_px, config.wrist_height_px);
    input.camera_image = render(w, input.camera);
    input.robot_state = w.robot;
    input.target_pose = target;
    input.chunk_length = config.chunk_length;
    if (hooks && hooks->on_query) hooks->on_query(result.policy_queries);
    PolicyStep step;
    try {
      step = policy.act(input, rng);
    } catch (const std::exception& e) {
      result.status = SkillStatus::Aborted;
      result.error = ErrorCode::PolicyFailure;
      result.reason = policy.name() + " raised: " + e.what();
      return result;
    }
    ++result.policy_queries;
    const auto bad = std::find_if(step.chunk.commands.begin(), step.chunk.commands.end(),
                                  [](const Command& c) { return !c.within_limits(); });
    if (step.chunk.commands.size() != static_cast<std::size_t>(config.chunk_length) ||
        bad != step.chunk.commands.end()) {
      result.status = SkillStatus::Aborted;
      result.error = ErrorCode::PolicyFailure;
      result.reason = policy.name() + " returned a malformed chunk";
      return result;
    }
    for (const Command& c : step.chunk.commands) {
      StepResult r = apply_command(w, c);
      if (hooks && hooks->on_command) hooks->on_command(c, r);
      w = std::move(r.world);
      ++result.steps_used;
    }
    terminal = step.terminal;
  }
  if (!terminal) {
    result.status = SkillStatus::Failed;
    result.reason = "step budget exhausted";
  }
  return result;
}

namespace {

SkillResult aborted(const WorldState& world, ErrorCode code, std::string reason) {
  SkillResult r;
  r.status = SkillStatus::Aborted;
  r.error = code;
  r.reason = std::move(reason);
  r.world_after = world;
  return r;
}

SkillResult run_init(const WorldState& world) {
  SkillResult r;
  r.world_after = world;
  std::vector<Command> commands = plan_move(world.robot.tool_pose, world.home);
  commands.push_back({0.0, 0.0, 0.0, 0.0, Grip::Open});
  for (const Command& c : commands) {
    StepResult s = apply_command(r.world_after, c);
    if (s.rejected) {
      r.status = SkillStatus::Failed;
      r.reason = "init blocked: " + *s.rejected;
      r.world_after = std::move(s.world);
      return r;
    }
    r.world_after = std::move(s.world);
  }
  return r;
}

}  // namespace

SkillResult execute_skill(const WorldState& world, const Skill& skill, const AnnotationSet& annotations,
                          const Camera& camera, const PolicySet& policies, const ExecutorConfig& config,
                          std::mt19937_64& rng, const RolloutHooks* hooks) {
  if (!skill.valid()) return aborted(world, ErrorCode::UnknownMarker, "marker outside the skill's namespace");
  switch (skill.name) {
    case SkillName::Done: {
      SkillResult r;
      r.world_after = world;
      return r;
    }
    case SkillName::Init:
      return run_init(world);
    case SkillName::Pick:
      if (world.robot.holding) return aborted(world, ErrorCode::PreconditionViolated, "pick with an occupied gripper");
      break;
    case SkillName::Place:
    case SkillName::Insert:
      if (!world.robot.holding) return aborted(world, ErrorCode::PreconditionViolated, "nothing held");
      break;
  }

  const Policy* policy = policies.for_skill(skill.name);
  if (policy == nullptr) return aborted(world, ErrorCode::ConfigError, "no policy for the skill");

  WorldState staged;
  Pose target;
  try {
    target = marker_to_workspace(skill.marker, annotations, camera, config.approach_plane_z);
    staged = approach_move(world, target, config.z_offset);
  } catch (const Error& e) {
    return aborted(world, e.code(), e.what());
  }

  const std::optional<int> held_before = world.robot.holding;
  SkillResult r = rollout_policy(staged, *policy, target, config, rng, hooks);
  if (r.status == SkillStatus::Aborted) return r;

  const WorldState& after = r.world_after;
  bool achieved = false;
  std::string missing;
  switch (skill.name) {
    case SkillName::Pick:
      achieved = after.robot.holding.has_value();
      missing = "no object grasped";
      break;
    case SkillName::Place:
      achieved = !after.robot.holding.has_value();
      missing = "object still held";
      break;
    case SkillName::Insert: {
      const SceneObject* gear = held_before ? after.find(*held_before) : nullptr;
      achieved = !after.robot.holding && gear != nullptr && gear->status.state == ObjectStatus::State::Inserted;
      missing = "gear not inserted";
      break;
    }
    case SkillName::Done:
    case SkillName::Init:
      achieved = true;
      break;
  }
  if (!achieved) {
    r.status = SkillStatus::Failed;
    r.reason = r.reason.empty() ? missing : r.reason + "; " + missing;
  } else {
    r.status = SkillStatus::Succeeded;
    r.reason.clear();
  }
  return r;
}

}  // namespace asmvlm
