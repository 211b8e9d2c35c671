#include "asmvlm/world.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "asmvlm/error.hpp"
#include "asmvlm/hash.hpp"
#include "json_util.hpp"

namespace asmvlm {

using detail::Json;

namespace {

constexpr double kEps = 1e-12;

struct Visitor {
  double operator()(const Gear& g) const { return g.outer_radius_m; }
  double operator()(const Shaft& s) const { return s.radius_m; }
  double operator()(const BasePlate&) const { return 0.0; }
};

}  // namespace

double footprint_radius(const ObjectKind& kind) { return std::visit(Visitor{}, kind); }

const SceneObject* WorldState::find(int object_id) const {
  auto it = std::lower_bound(objects.begin(), objects.end(), object_id,
                             [](const SceneObject& o, int id) { return o.object_id < id; });
  return (it != objects.end() && it->object_id == object_id) ? &*it : nullptr;
}

SceneObject* WorldState::find(int object_id) {
  return const_cast<SceneObject*>(std::as_const(*this).find(object_id));
}

const SceneObject& WorldState::get(int object_id) const {
  const SceneObject* o = find(object_id);
  if (o == nullptr) throw Error(ErrorCode::UnknownObject, "no object with id " + std::to_string(object_id));
  return *o;
}

bool Command::within_limits() const noexcept {
  const auto ok = [](double v, double limit) { return std::isfinite(v) && std::abs(v) <= limit + kEps; };
  return ok(dx, kMaxStepTranslation) && ok(dy, kMaxStepTranslation) && ok(dz, kMaxStepTranslation) &&
         ok(dyaw, kMaxStepYaw);
}

double insertion_clearance(const Gear& gear, const Shaft& shaft) { return gear.bore_radius_m - shaft.radius_m; }

bool insertion_allowed(const Gear& gear, const Shaft& shaft, double radial_offset, double tool_z) {
  return radial_offset <= insertion_clearance(gear, shaft) + kEps && tool_z < shaft.height_m;
}

namespace {

// A held gear below a shaft top must either be threaded on it or clear it.
std::optional<std::string> held_gear_jam(const WorldState& world, const Gear& gear, double x, double y, double z) {
  for (const auto& o : world.objects) {
    const auto* shaft = std::get_if<Shaft>(&o.kind);
    if (shaft == nullptr || z >= shaft->height_m) continue;
    const double d = planar_distance(x, y, o.pose.x, o.pose.y);
    if (d > insertion_clearance(gear, *shaft) + kEps && d < gear.outer_radius_m + shaft->radius_m) {
      return "held gear collides with shaft " + std::to_string(o.object_id);
    }
  }
  return std::nullopt;
}

StepResult rejected(const WorldState& world, std::string reason) {
  StepResult r{world, std::move(reason)};
  ++r.world.step_count;
  return r;
}

}  // namespace

StepResult apply_command(const WorldState& world, const Command& u) {
  if (!u.within_limits()) {
    throw Error(ErrorCode::CommandOutOfRange, "command exceeds per-step limits");
  }
  WorldState next = world;
  Pose& tool = next.robot.tool_pose;
  tool.x += u.dx;
  tool.y += u.dy;
  tool.z += u.dz;
  tool.yaw = normalize_yaw(tool.yaw + u.dyaw);

  if (tool.z < 0.0) return rejected(world, "tool would penetrate the table");
  if (!next.workspace.contains(tool.x, tool.y, tool.z)) return rejected(world, "tool would leave the workspace");

  SceneObject* held = next.robot.holding ? next.find(*next.robot.holding) : nullptr;
  if (held != nullptr) {
    const auto& gear = std::get<Gear>(held->kind);
    // Only motion can jam; a grip-only command never collides.
    const bool moves = u.dx != 0.0 || u.dy != 0.0 || u.dz != 0.0;
    if (moves) {
      if (auto jam = held_gear_jam(next, gear, tool.x, tool.y, tool.z)) return rejected(world, *jam);
    }
    held->pose.x = tool.x;
    held->pose.y = tool.y;
    held->pose.z = tool.z;
    held->pose.yaw = normalize_yaw(held->pose.yaw + u.dyaw);
  }

  const std::int64_t step = world.step_count + 1;

  if (u.grip == Grip::Close && held == nullptr) {
    SceneObject* best = nullptr;
    double best_distance = std::numeric_limits<double>::infinity();
    for (auto& o : next.objects) {
      if (!o.is_gear() || o.status.state == ObjectStatus::State::Grasped) continue;
      const double d = std::hypot(tool.x - o.pose.x, tool.y - o.pose.y, tool.z - o.pose.z);
      if (d <= kGraspRadius + kEps && d < best_distance) {
        best = &o;
        best_distance = d;
      }
    }
    if (best != nullptr) {
      // Self-centring grasp: a free gear slides under the fingers, a gear on a
      // shaft stays put and the compliant tool centres on it instead.
      if (best->status.state == ObjectStatus::State::Inserted) {
        tool.x = best->pose.x;
        tool.y = best->pose.y;
      } else {
        best->pose.x = tool.x;
        best->pose.y = tool.y;
      }
      best->pose.z = tool.z;
      best->status = ObjectStatus::grasped();
      next.robot.holding = best->object_id;
      next.robot.gripper_aperture = std::min(kMaxAperture, 2.0 * std::get<Gear>(best->kind).outer_radius_m);
    } else {
      next.robot.gripper_aperture = 0.0;
    }
  } else if (u.grip == Grip::Open) {
    if (held != nullptr) {
      const auto& gear = std::get<Gear>(held->kind);
      const SceneObject* target = nullptr;
      double best = std::numeric_limits<double>::infinity();
      for (const auto& o : next.objects) {
        const auto* shaft = std::get_if<Shaft>(&o.kind);
        if (shaft == nullptr) continue;
        const double d = planar_distance(held->pose, o.pose);
        if (insertion_allowed(gear, *shaft, d, tool.z) && d < best) {
          target = &o;
          best = d;
        }
      }
      if (target != nullptr) {
        held->status = ObjectStatus::inserted(target->object_id);
        next.insertion_log.push_back({held->object_id, target->object_id, step});
      } else {
        for (const auto& o : next.objects) {
          if (&o == held || !o.is_gear() || o.status.state != ObjectStatus::State::Free) continue;
          if (planar_distance(held->pose, o.pose) < gear.outer_radius_m + footprint_radius(o.kind) - kEps) {
            return rejected(world, "release blocked by object " + std::to_string(o.object_id));
          }
        }
        held->status = ObjectStatus::free();
      }
      held->pose.z = 0.0;
      next.robot.holding.reset();
    }
    next.robot.gripper_aperture = kMaxAperture;
  }

  next.step_count = step;
  return {std::move(next), std::nullopt};
}

bool check_insertion(const WorldState& world, int gear_id, int shaft_id) {
  const SceneObject& gear = world.get(gear_id);
  const SceneObject& shaft = world.get(shaft_id);
  if (!gear.is_gear()) throw Error(ErrorCode::WrongKind, "object " + std::to_string(gear_id) + " is not a gear");
  if (!shaft.is_shaft()) throw Error(ErrorCode::WrongKind, "object " + std::to_string(shaft_id) + " is not a shaft");
  return gear.status.state == ObjectStatus::State::Inserted && gear.status.shaft_id == shaft_id;
}

bool assembly_complete(const WorldState& world) {
  for (const auto& [gear, shaft] : world.goal.required_insertions) {
    if (!check_insertion(world, gear, shaft)) return false;
  }
  std::map<int, std::int64_t> last_insert;
  for (const auto& e : world.insertion_log) last_insert[e.gear_id] = e.step;
  for (const auto& [before, after] : world.goal.ordering_constraints) {
    const auto b = last_insert.find(before);
    const auto a = last_insert.find(after);
    if (b == last_insert.end() || a == last_insert.end() || b->second >= a->second) return false;
  }
  return true;
}

WorldState goal_world(const WorldState& world) {
  WorldState goal = world;
  for (const auto& [gear_id, shaft_id] : world.goal.required_insertions) {
    SceneObject* gear = goal.find(gear_id);
    const SceneObject* shaft = goal.find(shaft_id);
    if (gear == nullptr || shaft == nullptr) continue;
    gear->pose.x = shaft->pose.x;
    gear->pose.y = shaft->pose.y;
    gear->pose.z = 0.0;
    gear->status = ObjectStatus::inserted(shaft_id);
    if (goal.robot.holding == gear_id) {
      goal.robot.holding.reset();
      goal.robot.gripper_aperture = kMaxAperture;
    }
  }
  return goal;
}

std::optional<std::string> check_invariants(const WorldState& world) {
  int grasped = 0;
  int grasped_id = 0;
  for (std::size_t i = 0; i < world.objects.size(); ++i) {
    const auto& o = world.objects[i];
    if (i > 0 && world.objects[i - 1].object_id >= o.object_id) return "object ids not strictly ascending";
    if (o.pose.z < 0.0) return "object " + std::to_string(o.object_id) + " below the table";
    if (o.pose.yaw < -std::numbers::pi || o.pose.yaw >= std::numbers::pi) return "yaw not normalised";
    if (o.status.state == ObjectStatus::State::Grasped) {
      ++grasped;
      grasped_id = o.object_id;
    }
    if (o.status.state == ObjectStatus::State::Inserted) {
      const SceneObject* s = world.find(o.status.shaft_id);
      if (s == nullptr || !s->is_shaft()) return "object " + std::to_string(o.object_id) + " inserted on a non-shaft";
    }
  }
  if (grasped > 1) return "more than one grasped object";
  if (world.robot.holding.has_value() != (grasped == 1)) return "holding disagrees with object statuses";
  if (grasped == 1 && *world.robot.holding != grasped_id) return "holding names the wrong object";
  if (world.robot.tool_pose.z < 0.0) return "tool below the table";
  if (world.step_count < 0) return "negative step count";
  for (std::size_t i = 0; i < world.objects.size(); ++i) {
    const auto& a = world.objects[i];
    if (!a.is_gear() || a.status.state != ObjectStatus::State::Free) continue;
    for (std::size_t j = i + 1; j < world.objects.size(); ++j) {
      const auto& b = world.objects[j];
      if (!b.is_gear() || b.status.state != ObjectStatus::State::Free) continue;
      if (planar_distance(a.pose, b.pose) < footprint_radius(a.kind) + footprint_radius(b.kind) - kEps) {
        return "free gears " + std::to_string(a.object_id) + " and " + std::to_string(b.object_id) + " overlap";
      }
    }
  }
  return std::nullopt;
}

AnnotationSet ground_truth_points(const WorldState& world, const Camera& camera,
                                  const std::vector<std::string>& labels) {
  for (const auto& label : labels) {
    const bool known = std::any_of(world.objects.begin(), world.objects.end(),
                                   [&](const SceneObject& o) { return o.markable() && o.label == label; });
    if (!known) throw Error(ErrorCode::UnknownLabel, "no object labelled '" + label + "'");
  }
  AnnotationSet out;
  for (const auto& o : world.objects) {
    if (!o.markable() || std::find(labels.begin(), labels.end(), o.label) == labels.end()) continue;
    if (!camera.in_frame(o.pose.x, o.pose.y)) continue;
    out.push_back({o.object_id, camera.pixel_of(o.pose.x, o.pose.y), o.label});
  }
  return out;
}

namespace {

Json pose_json(const Pose& p) {
  return Json{{"x", p.x}, {"y", p.y}, {"z", p.z}, {"yaw", p.yaw}};
}

Json kind_json(const ObjectKind& kind) {
  return std::visit(
      [](const auto& k) -> Json {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, Gear>) {
          return Json{{"type", "gear"},
                      {"outer_radius_m", k.outer_radius_m},
                      {"bore_radius_m", k.bore_radius_m},
                      {"tooth_count", k.tooth_count}};
        } else if constexpr (std::is_same_v<T, Shaft>) {
          return Json{{"type", "shaft"}, {"radius_m", k.radius_m}, {"height_m", k.height_m}};
        } else {
          return Json{{"type", "base_plate"}, {"width_m", k.width_m}, {"depth_m", k.depth_m}};
        }
      },
      kind);
}

Json status_json(const ObjectStatus& s) {
  switch (s.state) {
    case ObjectStatus::State::Free: return Json{{"state", "free"}};
    case ObjectStatus::State::Grasped: return Json{{"state", "grasped"}};
    case ObjectStatus::State::Inserted: return Json{{"state", "inserted"}, {"shaft_id", s.shaft_id}};
  }
  return Json{};
}

Json pairs_json(const std::vector<std::pair<int, int>>& pairs) {
  Json out = Json::array();
  for (const auto& [a, b] : pairs) out.push_back(Json::array({a, b}));
  return out;
}

}  // namespace

std::string world_to_json(const WorldState& world) {
  Json objects = Json::array();
  for (const auto& o : world.objects) {
    objects.push_back(Json{{"id", o.object_id},
                           {"label", o.label},
                           {"kind", kind_json(o.kind)},
                           {"pose", pose_json(o.pose)},
                           {"status", status_json(o.status)}});
  }
  Json log = Json::array();
  for (const auto& e : world.insertion_log) {
    log.push_back(Json{{"gear", e.gear_id}, {"shaft", e.shaft_id}, {"step", e.step}});
  }
  const Camera& c = world.top_camera;
  Json doc{
      {"scenario", world.scenario},
      {"objects", objects},
      {"robot",
       Json{{"tool_pose", pose_json(world.robot.tool_pose)},
            {"gripper_aperture", world.robot.gripper_aperture},
            {"holding", world.robot.holding ? Json(*world.robot.holding) : Json(nullptr)}}},
      {"goal",
       Json{{"required_insertions", pairs_json(world.goal.required_insertions)},
            {"ordering_constraints", pairs_json(world.goal.ordering_constraints)}}},
      {"workspace",
       Json{{"x_min", world.workspace.x_min},
            {"x_max", world.workspace.x_max},
            {"y_min", world.workspace.y_min},
            {"y_max", world.workspace.y_max},
            {"z_max", world.workspace.z_max}}},
      {"top_camera",
       Json{{"origin_x", c.origin_x},
            {"origin_y", c.origin_y},
            {"meters_per_pixel", c.meters_per_pixel},
            {"width_px", c.width_px},
            {"height_px", c.height_px}}},
      {"home", pose_json(world.home)},
      {"rng_seed", world.rng_seed},
      {"step_count", world.step_count},
      {"insertion_log", log},
  };
  return detail::canonical_dump(doc);
}

std::string world_hash(const WorldState& world) { return sha256_hex(world_to_json(world)); }

}  // namespace asmvlm
