#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "asmvlm/annotation.hpp"
#include "asmvlm/camera.hpp"
#include "asmvlm/geometry.hpp"

namespace asmvlm {

// Per-step command limits and contact constants of the kinematic world.
inline constexpr double kMaxStepTranslation = 0.005;  // m
inline constexpr double kMaxStepYaw = 0.1;            // rad
inline constexpr double kGraspRadius = 0.010;         // m, around the gear centre
inline constexpr double kMaxAperture = 0.08;          // m

struct Gear {
  double outer_radius_m = 0.02;
  double bore_radius_m = 0.005;
  int tooth_count = 12;

  friend bool operator==(const Gear&, const Gear&) = default;
};

struct Shaft {
  double radius_m = 0.0049;
  double height_m = 0.03;

  friend bool operator==(const Shaft&, const Shaft&) = default;
};

struct BasePlate {
  double width_m = 0.2;  // along x
  double depth_m = 0.2;  // along y

  friend bool operator==(const BasePlate&, const BasePlate&) = default;
};

using ObjectKind = std::variant<Gear, Shaft, BasePlate>;

/// Radius of the planar disc used for overlap tests; zero for plates.
double footprint_radius(const ObjectKind& kind);

struct ObjectStatus {
  enum class State { Free, Grasped, Inserted };
  State state = State::Free;
  int shaft_id = 0;  // Inserted only

  static ObjectStatus free() { return {}; }
  static ObjectStatus grasped() { return {State::Grasped, 0}; }
  static ObjectStatus inserted(int shaft) { return {State::Inserted, shaft}; }

  friend bool operator==(const ObjectStatus&, const ObjectStatus&) = default;
};

struct SceneObject {
  int object_id = 0;
  std::string label;
  ObjectKind kind;
  Pose pose;
  ObjectStatus status;

  bool is_gear() const noexcept { return std::holds_alternative<Gear>(kind); }
  bool is_shaft() const noexcept { return std::holds_alternative<Shaft>(kind); }
  bool is_plate() const noexcept { return std::holds_alternative<BasePlate>(kind); }
  /// Gears and shafts carry markers; plates never do.
  bool markable() const noexcept { return !is_plate(); }

  friend bool operator==(const SceneObject&, const SceneObject&) = default;
};

struct RobotState {
  Pose tool_pose;
  double gripper_aperture = kMaxAperture;
  std::optional<int> holding;

  friend bool operator==(const RobotState&, const RobotState&) = default;
};

struct GoalSpec {
  std::vector<std::pair<int, int>> required_insertions;   // (gear_id, shaft_id)
  std::vector<std::pair<int, int>> ordering_constraints;  // (before_gear_id, after_gear_id)

  friend bool operator==(const GoalSpec&, const GoalSpec&) = default;
};

struct Workspace {
  double x_min = 0.0;
  double x_max = 0.5;
  double y_min = 0.0;
  double y_max = 0.3;
  double z_max = 0.3;

  bool contains(double x, double y, double z) const noexcept {
    return x >= x_min && x <= x_max && y >= y_min && y <= y_max && z >= 0.0 && z <= z_max;
  }

  friend bool operator==(const Workspace&, const Workspace&) = default;
};

struct InsertionEvent {
  int gear_id = 0;
  int shaft_id = 0;
  std::int64_t step = 0;

  friend bool operator==(const InsertionEvent&, const InsertionEvent&) = default;
};

struct WorldState {
  std::string scenario;
  std::vector<SceneObject> objects;  // ascending object_id
  RobotState robot;
  GoalSpec goal;
  Workspace workspace;
  Camera top_camera;
  Pose home;
  std::uint64_t rng_seed = 0;
  std::int64_t step_count = 0;
  std::vector<InsertionEvent> insertion_log;

  const SceneObject* find(int object_id) const;
  SceneObject* find(int object_id);
  const SceneObject& get(int object_id) const;  // throws UnknownObject

  friend bool operator==(const WorldState&, const WorldState&) = default;
};

enum class Grip { Hold, Open, Close };

// One control step: translation and yaw increments plus a gripper channel.
struct Command {
  double dx = 0.0;
  double dy = 0.0;
  double dz = 0.0;
  double dyaw = 0.0;
  Grip grip = Grip::Hold;

  bool within_limits() const noexcept;

  friend bool operator==(const Command&, const Command&) = default;
};

struct StepResult {
  WorldState world;
  std::optional<std::string> rejected;  // CollisionRejected reason; world then differs only in step_count
};

/// Integrates one command. Throws CommandOutOfRange on limit violations.
StepResult apply_command(const WorldState& world, const Command& u);

/// True iff the gear is currently Inserted on that shaft. Throws WrongKind.
bool check_insertion(const WorldState& world, int gear_id, int shaft_id);

/// Every required pair holds and the last insertion of each constrained gear
/// respects the ordering DAG.
bool assembly_complete(const WorldState& world);

/// Radial offset at which a gear bore still clears a shaft.
double insertion_clearance(const Gear& gear, const Shaft& shaft);

/// Analytic insertion predicate for a release at `tool_z` with the given planar offset.
bool insertion_allowed(const Gear& gear, const Shaft& shaft, double radial_offset, double tool_z);

/// The world with every required insertion applied; the basis of the goal image.
WorldState goal_world(const WorldState& world);

/// Returns a description of the first violated runtime invariant, if any.
std::optional<std::string> check_invariants(const WorldState& world);

/// Ground-truth recognition: one annotation per markable object whose label is
/// requested and whose centre projects into the frame. marker_id = object_id.
AnnotationSet ground_truth_points(const WorldState& world, const Camera& camera,
                                  const std::vector<std::string>& labels);

/// Canonical JSON: sorted keys, six-decimal floats.
std::string world_to_json(const WorldState& world);
std::string world_hash(const WorldState& world);

}  // namespace asmvlm
