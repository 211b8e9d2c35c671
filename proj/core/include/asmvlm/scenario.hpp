#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "asmvlm/world.hpp"

namespace asmvlm {

struct Region {
  double x_min = 0.0;
  double x_max = 0.0;
  double y_min = 0.0;
  double y_max = 0.0;

  friend bool operator==(const Region&, const Region&) = default;
};

struct ObjectSpec {
  int object_id = 0;
  std::string label;
  ObjectKind kind;
  std::optional<Pose> fixed;     // fixed placement, or
  std::optional<Region> sampled; // uniform centre sampling with rejection

  friend bool operator==(const ObjectSpec&, const ObjectSpec&) = default;
};

struct ScenarioConfig {
  std::string name;
  Workspace workspace;
  double meters_per_pixel = 0.001;  // top camera; frame covers the workspace
  Pose home{0.2, 0.15, 0.1, 0.0};
  std::vector<ObjectSpec> objects;
  GoalSpec goal;
  std::vector<std::string> object_labels;  // P_obj; empty means every markable label

  /// Labels handed to recognition, deduplicated in object order.
  std::vector<std::string> recognition_labels() const;
  std::vector<std::string> location_labels() const;

  Camera top_camera() const;

  friend bool operator==(const ScenarioConfig&, const ScenarioConfig&) = default;
};

/// Builds a world satisfying every type invariant. Identical (config, seed)
/// pairs produce identical worlds. Throws InvalidScenario.
WorldState spawn_world(const ScenarioConfig& config, std::uint64_t seed);

/// Validates ids, kinds, goal references, ordering DAG and fixed overlaps.
void validate_scenario(const ScenarioConfig& config);

std::vector<std::string> builtin_scenario_names();
/// One of "sim", "real1", "real2", "single_gear". Throws ConfigError.
ScenarioConfig builtin_scenario(std::string_view name);

std::string scenario_to_json(const ScenarioConfig& config);
ScenarioConfig scenario_from_json(std::string_view text);

/// Built-in name, or a path to a scenario JSON file.
ScenarioConfig load_scenario(const std::string& name_or_path);

}  // namespace asmvlm
