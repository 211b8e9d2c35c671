#include "asmvlm/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "asmvlm/error.hpp"
#include "json_util.hpp"

namespace asmvlm {

using detail::Json;

namespace {

constexpr int kMaxPlacementAttempts = 1000;
constexpr double kPlacementMargin = 0.002;  // m between sampled discs

[[noreturn]] void invalid(const std::string& message) { throw Error(ErrorCode::InvalidScenario, message); }

bool id_fits_kind(int id, const ObjectKind& kind) {
  if (std::holds_alternative<Gear>(kind)) return is_object_marker(id);
  if (std::holds_alternative<Shaft>(kind)) return is_location_marker(id);
  return id >= 200;
}

void validate_kind(int id, const ObjectKind& kind) {
  const std::string who = "object " + std::to_string(id);
  if (const auto* g = std::get_if<Gear>(&kind)) {
    if (!(g->bore_radius_m > 0.0 && g->bore_radius_m < g->outer_radius_m)) invalid(who + ": need 0 < bore < outer");
    if (g->tooth_count < 3) invalid(who + ": tooth_count must be >= 3");
  } else if (const auto* s = std::get_if<Shaft>(&kind)) {
    if (!(s->radius_m > 0.0 && s->height_m > 0.0)) invalid(who + ": shaft dimensions must be positive");
  } else if (const auto* p = std::get_if<BasePlate>(&kind)) {
    if (!(p->width_m > 0.0 && p->depth_m > 0.0)) invalid(who + ": plate dimensions must be positive");
  }
}

}  // namespace

std::vector<std::string> ScenarioConfig::recognition_labels() const {
  std::vector<std::string> labels;
  const auto add = [&](const std::string& l) {
    if (std::find(labels.begin(), labels.end(), l) == labels.end()) labels.push_back(l);
  };
  if (!object_labels.empty()) {
    for (const auto& l : object_labels) add(l);
  } else {
    for (const auto& o : objects) {
      if (std::holds_alternative<Gear>(o.kind)) add(o.label);
    }
  }
  return labels;
}

std::vector<std::string> ScenarioConfig::location_labels() const {
  std::vector<std::string> labels;
  for (const auto& o : objects) {
    if (std::holds_alternative<Shaft>(o.kind) && std::find(labels.begin(), labels.end(), o.label) == labels.end()) {
      labels.push_back(o.label);
    }
  }
  return labels;
}

Camera ScenarioConfig::top_camera() const {
  Camera c;
  c.view = CameraView::TopCurrent;
  c.origin_x = workspace.x_min;
  c.origin_y = workspace.y_max;
  c.meters_per_pixel = meters_per_pixel;
  c.width_px = static_cast<int>(std::lround((workspace.x_max - workspace.x_min) / meters_per_pixel));
  c.height_px = static_cast<int>(std::lround((workspace.y_max - workspace.y_min) / meters_per_pixel));
  return c;
}

void validate_scenario(const ScenarioConfig& config) {
  const Workspace& ws = config.workspace;
  if (!(ws.x_min < ws.x_max && ws.y_min < ws.y_max && ws.z_max > 0.0)) invalid("degenerate workspace");
  if (!(config.meters_per_pixel > 0.0)) invalid("meters_per_pixel must be positive");
  const Camera camera = config.top_camera();
  if (camera.width_px <= 0 || camera.height_px <= 0) invalid("camera frame is empty");
  if (!ws.contains(config.home.x, config.home.y, config.home.z)) invalid("home pose outside workspace");

  std::map<int, const ObjectSpec*> by_id;
  for (const auto& spec : config.objects) {
    if (!by_id.emplace(spec.object_id, &spec).second) invalid("duplicate object id " + std::to_string(spec.object_id));
    if (!id_fits_kind(spec.object_id, spec.kind)) {
      invalid("object id " + std::to_string(spec.object_id) +
              " outside its namespace (gears 1..99, shafts 101..199, plates >= 200)");
    }
    if (spec.label.empty()) invalid("object " + std::to_string(spec.object_id) + " has an empty label");
    validate_kind(spec.object_id, spec.kind);
    if (spec.fixed.has_value() == spec.sampled.has_value()) {
      invalid("object " + std::to_string(spec.object_id) + " needs exactly one of fixed / sampled placement");
    }
    if (spec.fixed && !camera.in_frame(spec.fixed->x, spec.fixed->y)) {
      invalid("object " + std::to_string(spec.object_id) + " placed outside the camera frame");
    }
    if (spec.sampled) {
      const Region& r = *spec.sampled;
      if (!(r.x_min <= r.x_max && r.y_min <= r.y_max) || !camera.in_frame(r.x_min, r.y_max) ||
          !camera.in_frame(r.x_max, r.y_min)) {
        invalid("object " + std::to_string(spec.object_id) + " has an invalid sampling region");
      }
    }
  }

  for (auto a = config.objects.begin(); a != config.objects.end(); ++a) {
    if (!a->fixed || std::holds_alternative<BasePlate>(a->kind)) continue;
    for (auto b = std::next(a); b != config.objects.end(); ++b) {
      if (!b->fixed || std::holds_alternative<BasePlate>(b->kind)) continue;
      if (planar_distance(*a->fixed, *b->fixed) <= footprint_radius(a->kind) + footprint_radius(b->kind)) {
        invalid("fixed placements of objects " + std::to_string(a->object_id) + " and " +
                std::to_string(b->object_id) + " overlap");
      }
    }
  }

  const auto kind_of = [&](int id) -> const ObjectKind* {
    auto it = by_id.find(id);
    return it == by_id.end() ? nullptr : &it->second->kind;
  };
  std::set<int> goal_gears;
  for (const auto& [gear, shaft] : config.goal.required_insertions) {
    const ObjectKind* gk = kind_of(gear);
    const ObjectKind* sk = kind_of(shaft);
    if (gk == nullptr || sk == nullptr) {
      invalid("goal references missing object in pair (" + std::to_string(gear) + ", " + std::to_string(shaft) + ")");
    }
    if (!std::holds_alternative<Gear>(*gk) || !std::holds_alternative<Shaft>(*sk)) {
      invalid("goal pair (" + std::to_string(gear) + ", " + std::to_string(shaft) + ") must be (gear, shaft)");
    }
    if (!goal_gears.insert(gear).second) invalid("gear " + std::to_string(gear) + " appears in two goal pairs");
  }

  std::map<int, std::vector<int>> successors;
  std::map<int, int> indegree;
  for (int g : goal_gears) indegree[g] = 0;
  for (const auto& [before, after] : config.goal.ordering_constraints) {
    if (!goal_gears.count(before) || !goal_gears.count(after)) {
      invalid("ordering constraint (" + std::to_string(before) + ", " + std::to_string(after) +
              ") must reference gears of goal pairs");
    }
    successors[before].push_back(after);
    ++indegree[after];
  }
  std::vector<int> ready;
  for (const auto& [g, d] : indegree) {
    if (d == 0) ready.push_back(g);
  }
  std::size_t visited = 0;
  while (!ready.empty()) {
    const int g = ready.back();
    ready.pop_back();
    ++visited;
    for (int s : successors[g]) {
      if (--indegree[s] == 0) ready.push_back(s);
    }
  }
  if (visited != goal_gears.size()) invalid("ordering constraints contain a cycle");

  for (const auto& label : config.object_labels) {
    const bool known = std::any_of(config.objects.begin(), config.objects.end(), [&](const ObjectSpec& o) {
      return o.label == label && !std::holds_alternative<BasePlate>(o.kind);
    });
    if (!known) invalid("object label '" + label + "' matches no markable object");
  }
}

WorldState spawn_world(const ScenarioConfig& config, std::uint64_t seed) {
  validate_scenario(config);

  std::vector<ObjectSpec> specs = config.objects;
  std::sort(specs.begin(), specs.end(), [](const auto& a, const auto& b) { return a.object_id < b.object_id; });

  WorldState world;
  world.scenario = config.name;
  world.goal = config.goal;
  world.workspace = config.workspace;
  world.top_camera = config.top_camera();
  world.home = config.home;
  world.home.yaw = normalize_yaw(world.home.yaw);
  world.rng_seed = seed;
  world.robot.tool_pose = world.home;
  world.robot.gripper_aperture = kMaxAperture;

  std::vector<SceneObject> placed;
  for (const auto& spec : specs) {
    if (!spec.fixed) continue;
    SceneObject o{spec.object_id, spec.label, spec.kind, *spec.fixed, ObjectStatus::free()};
    o.pose.z = 0.0;
    o.pose.yaw = normalize_yaw(o.pose.yaw);
    placed.push_back(std::move(o));
  }

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (const auto& spec : specs) {
    if (!spec.sampled) continue;
    const Region& r = *spec.sampled;
    const double radius = footprint_radius(spec.kind);
    bool ok = false;
    Pose pose;
    for (int attempt = 0; attempt < kMaxPlacementAttempts && !ok; ++attempt) {
      pose.x = r.x_min + unit(rng) * (r.x_max - r.x_min);
      pose.y = r.y_min + unit(rng) * (r.y_max - r.y_min);
      pose.yaw = normalize_yaw((unit(rng) * 2.0 - 1.0) * std::numbers::pi);
      ok = std::all_of(placed.begin(), placed.end(), [&](const SceneObject& other) {
        return other.is_plate() || planar_distance(pose, other.pose) > radius + footprint_radius(other.kind) +
                                                                       kPlacementMargin;
      });
    }
    if (!ok) invalid("could not place object " + std::to_string(spec.object_id) + " without overlap");
    placed.push_back({spec.object_id, spec.label, spec.kind, pose, ObjectStatus::free()});
  }

  std::sort(placed.begin(), placed.end(), [](const auto& a, const auto& b) { return a.object_id < b.object_id; });
  world.objects = std::move(placed);
  return world;
}

// ---------------------------------------------------------------------------
// Built-in scenarios. The workspace is 0.5 m x 0.3 m seen at 1 mm/px; parts
// start on the left, shafts stand on a plate on the right, home is in between.

namespace {

ObjectSpec gear(int id, std::string label, double outer, int teeth, Region region) {
  return {id, std::move(label), Gear{outer, 0.005, teeth}, std::nullopt, region};
}

ObjectSpec gear_at(int id, std::string label, double outer, int teeth, double x, double y) {
  return {id, std::move(label), Gear{outer, 0.005, teeth}, Pose{x, y, 0.0, 0.0}, std::nullopt};
}

ObjectSpec shaft(int id, std::string label, double x, double y) {
  return {id, std::move(label), Shaft{0.0049, 0.03}, Pose{x, y, 0.0, 0.0}, std::nullopt};
}

ObjectSpec plate(double x, double y, double w, double d) {
  return {200, "base plate", BasePlate{w, d}, Pose{x, y, 0.0, 0.0}, std::nullopt};
}

ScenarioConfig base(std::string name) {
  ScenarioConfig c;
  c.name = std::move(name);
  c.workspace = {0.0, 0.5, 0.0, 0.3, 0.3};
  c.meters_per_pixel = 0.001;
  c.home = {0.2, 0.15, 0.1, 0.0};
  return c;
}

constexpr Region kPartsArea{0.03, 0.13, 0.03, 0.27};

}  // namespace

std::vector<std::string> builtin_scenario_names() { return {"sim", "real1", "real2", "single_gear"}; }

ScenarioConfig builtin_scenario(std::string_view name) {
  if (name == "sim") {
    ScenarioConfig c = base("sim");
    c.objects = {gear(1, "red gear", 0.022, 20, kPartsArea),
                 gear(2, "green gear", 0.018, 16, kPartsArea),
                 gear(3, "blue gear", 0.014, 12, kPartsArea),
                 shaft(101, "shaft A", 0.37, 0.22),
                 shaft(102, "shaft B", 0.37, 0.15),
                 shaft(103, "shaft C", 0.37, 0.08),
                 plate(0.37, 0.15, 0.2, 0.26)};
    c.goal.required_insertions = {{1, 101}, {2, 102}, {3, 103}};
    c.goal.ordering_constraints = {{1, 2}, {2, 3}};
    return c;
  }
  if (name == "real1") {
    ScenarioConfig c = base("real1");
    c.objects = {gear(1, "large gear", 0.024, 24, kPartsArea),
                 gear(2, "small gear", 0.015, 14, kPartsArea),
                 shaft(101, "left shaft", 0.33, 0.15),
                 shaft(102, "right shaft", 0.41, 0.15),
                 plate(0.37, 0.15, 0.2, 0.2)};
    c.goal.required_insertions = {{1, 101}, {2, 102}};
    return c;
  }
  if (name == "real2") {
    ScenarioConfig c = base("real2");
    c.objects = {gear(1, "large gear", 0.024, 24, kPartsArea),
                 gear(2, "medium gear", 0.019, 18, kPartsArea),
                 gear(3, "small gear", 0.014, 12, kPartsArea),
                 gear_at(4, "spare gear", 0.016, 15, 0.20, 0.26),
                 shaft(101, "main shaft", 0.35, 0.15),
                 shaft(102, "upper shaft", 0.42, 0.21),
                 shaft(103, "lower shaft", 0.42, 0.09),
                 plate(0.38, 0.15, 0.2, 0.26)};
    c.goal.required_insertions = {{1, 101}, {2, 102}, {3, 103}};
    c.goal.ordering_constraints = {{1, 2}, {1, 3}};
    return c;
  }
  if (name == "single_gear") {
    ScenarioConfig c = base("single_gear");
    c.objects = {gear_at(1, "red gear", 0.02, 18, 0.08, 0.15), shaft(101, "shaft A", 0.37, 0.15),
                 plate(0.37, 0.15, 0.2, 0.2)};
    c.goal.required_insertions = {{1, 101}};
    return c;
  }
  throw Error(ErrorCode::ConfigError, "unknown scenario '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------
// JSON

namespace {

Json kind_to_json(const ObjectKind& kind) {
  if (const auto* g = std::get_if<Gear>(&kind)) {
    return {{"type", "gear"}, {"outer_radius_m", g->outer_radius_m}, {"bore_radius_m", g->bore_radius_m},
            {"tooth_count", g->tooth_count}};
  }
  if (const auto* s = std::get_if<Shaft>(&kind)) {
    return {{"type", "shaft"}, {"radius_m", s->radius_m}, {"height_m", s->height_m}};
  }
  const auto& p = std::get<BasePlate>(kind);
  return {{"type", "base_plate"}, {"width_m", p.width_m}, {"depth_m", p.depth_m}};
}

ObjectKind kind_from_json(const Json& j) {
  const std::string type = detail::require_string(j, "type");
  if (type == "gear") {
    return Gear{detail::require_number(j, "outer_radius_m"), detail::require_number(j, "bore_radius_m"),
                detail::require_int(j, "tooth_count")};
  }
  if (type == "shaft") return Shaft{detail::require_number(j, "radius_m"), detail::require_number(j, "height_m")};
  if (type == "base_plate") {
    return BasePlate{detail::require_number(j, "width_m"), detail::require_number(j, "depth_m")};
  }
  throw Error(ErrorCode::ConfigError, "unknown object type '" + type + "'");
}

Json pairs_to_json(const std::vector<std::pair<int, int>>& pairs) {
  Json out = Json::array();
  for (const auto& [a, b] : pairs) out.push_back({a, b});
  return out;
}

std::vector<std::pair<int, int>> pairs_from_json(const Json& j) {
  std::vector<std::pair<int, int>> out;
  if (j.is_null()) return out;
  if (!j.is_array()) throw Error(ErrorCode::ConfigError, "expected an array of [a, b] pairs");
  for (const auto& p : j) {
    if (!p.is_array() || p.size() != 2 || !p[0].is_number_integer() || !p[1].is_number_integer()) {
      throw Error(ErrorCode::ConfigError, "expected an [a, b] integer pair");
    }
    out.emplace_back(p[0].get<int>(), p[1].get<int>());
  }
  return out;
}

Pose pose_from_json(const Json& j) {
  return {detail::require_number(j, "x"), detail::require_number(j, "y"), j.value("z", 0.0), j.value("yaw", 0.0)};
}

}  // namespace

std::string scenario_to_json(const ScenarioConfig& config) {
  Json objects = Json::array();
  for (const auto& o : config.objects) {
    Json placement;
    if (o.fixed) {
      placement = {{"type", "fixed"}, {"x", o.fixed->x}, {"y", o.fixed->y}, {"yaw", o.fixed->yaw}};
    } else if (o.sampled) {
      placement = {{"type", "sampled"},
                   {"x_min", o.sampled->x_min},
                   {"x_max", o.sampled->x_max},
                   {"y_min", o.sampled->y_min},
                   {"y_max", o.sampled->y_max}};
    }
    objects.push_back({{"id", o.object_id}, {"label", o.label}, {"kind", kind_to_json(o.kind)}, {"placement", placement}});
  }
  Json doc{{"name", config.name},
           {"workspace",
            {{"x_min", config.workspace.x_min},
             {"x_max", config.workspace.x_max},
             {"y_min", config.workspace.y_min},
             {"y_max", config.workspace.y_max},
             {"z_max", config.workspace.z_max}}},
           {"meters_per_pixel", config.meters_per_pixel},
           {"home", {{"x", config.home.x}, {"y", config.home.y}, {"z", config.home.z}, {"yaw", config.home.yaw}}},
           {"objects", objects},
           {"goal",
            {{"required_insertions", pairs_to_json(config.goal.required_insertions)},
             {"ordering_constraints", pairs_to_json(config.goal.ordering_constraints)}}},
           {"object_labels", config.object_labels}};
  return doc.dump(2);
}

ScenarioConfig scenario_from_json(std::string_view text) {
  const Json doc = detail::parse_json(text, "scenario");
  if (!doc.is_object()) throw Error(ErrorCode::ConfigError, "scenario must be a JSON object");
  ScenarioConfig c = base(doc.value("name", std::string("custom")));
  if (doc.contains("workspace")) {
    const Json& w = doc["workspace"];
    c.workspace = {detail::require_number(w, "x_min"), detail::require_number(w, "x_max"),
                   detail::require_number(w, "y_min"), detail::require_number(w, "y_max"),
                   w.value("z_max", 0.3)};
  }
  c.meters_per_pixel = doc.value("meters_per_pixel", c.meters_per_pixel);
  if (doc.contains("home")) c.home = pose_from_json(doc["home"]);
  for (const auto& o : doc.value("objects", Json::array())) {
    ObjectSpec spec;
    spec.object_id = detail::require_int(o, "id");
    spec.label = detail::require_string(o, "label");
    spec.kind = kind_from_json(o.at("kind"));
    const Json& p = o.at("placement");
    const std::string type = detail::require_string(p, "type");
    if (type == "fixed") {
      spec.fixed = Pose{detail::require_number(p, "x"), detail::require_number(p, "y"), 0.0, p.value("yaw", 0.0)};
    } else if (type == "sampled") {
      spec.sampled = Region{detail::require_number(p, "x_min"), detail::require_number(p, "x_max"),
                            detail::require_number(p, "y_min"), detail::require_number(p, "y_max")};
    } else {
      throw Error(ErrorCode::ConfigError, "unknown placement type '" + type + "'");
    }
    c.objects.push_back(std::move(spec));
  }
  if (doc.contains("goal")) {
    c.goal.required_insertions = pairs_from_json(doc["goal"].value("required_insertions", Json()));
    c.goal.ordering_constraints = pairs_from_json(doc["goal"].value("ordering_constraints", Json()));
  }
  if (doc.contains("object_labels")) c.object_labels = doc["object_labels"].get<std::vector<std::string>>();
  return c;
}

ScenarioConfig load_scenario(const std::string& name_or_path) {
  const auto names = builtin_scenario_names();
  if (std::find(names.begin(), names.end(), name_or_path) != names.end()) return builtin_scenario(name_or_path);
  std::ifstream in(name_or_path);
  if (!in) throw Error(ErrorCode::ConfigError, "unknown scenario or unreadable file '" + name_or_path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return scenario_from_json(buffer.str());
}

}  // namespace asmvlm
