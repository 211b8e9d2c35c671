#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "asmvlm/annotation.hpp"
#include "asmvlm/camera.hpp"
#include "asmvlm/marking.hpp"
#include "asmvlm/prompting.hpp"
#include "asmvlm/skill.hpp"
#include "asmvlm/world.hpp"

namespace asmvlm {

// Simulator ground truth, visible only to oracle backends.
struct GroundTruth {
  const WorldState* world = nullptr;
  Camera object_camera;
  Camera current_camera;
  Camera goal_camera;
};

struct RequestContext {
  std::uint64_t episode_index = 0;
  int call_index = 0;  // reasoning calls within the episode, from 0
  const GroundTruth* truth = nullptr;
};

struct RecognitionRequest {
  ImageTriplet triplet;
  std::vector<std::string> object_labels;    // P_obj, pickable part of it
  std::vector<std::string> location_labels;  // P_obj, target-location part of it
  std::string recognition_prompt;
  RequestContext context;

  std::vector<std::string> all_labels() const;
  void validate() const;     // throws EmptyLabelSet
  std::string hash() const;  // stable across runs; excludes the context
};

struct ReasoningRequest {
  MarkedTriplet marked;
  MultiModalPrompt prompt;
  RequestContext context;

  std::string task_prompt() const { return prompt.text(); }
  std::set<int> known_markers() const { return marked.annotations.marker_ids(); }
  void validate() const;  // throws MissingAnnotations
  std::string hash() const;
};

class RecognitionBackend {
 public:
  virtual ~RecognitionBackend() = default;
  virtual std::string name() const = 0;
  virtual TripletAnnotations recognize(const RecognitionRequest& request) const = 0;
};

class ReasoningBackend {
 public:
  virtual ~ReasoningBackend() = default;
  virtual std::string name() const = 0;
  /// Raw reply text; parsing happens downstream.
  virtual std::string decide(const ReasoningRequest& request) const = 0;
};

struct BackendPair {
  std::shared_ptr<const RecognitionBackend> recognition;
  std::shared_ptr<const ReasoningBackend> reasoning;
};

// ---------------------------------------------------------------------------
// Oracle

/// Maps an annotation back to the markable object drawn under it in `camera`,
/// restricted to gears for object markers and shafts for location markers.
std::optional<int> resolve_marker(const WorldState& world, const Camera& camera, const PointAnnotation& annotation);

/// Ground-truth next step, with object ids rather than markers.
Skill oracle_next_skill(const WorldState& world);

class OracleBackend final : public RecognitionBackend, public ReasoningBackend {
 public:
  std::string name() const override { return "oracle"; }
  TripletAnnotations recognize(const RecognitionRequest& request) const override;
  std::string decide(const ReasoningRequest& request) const override;
};

// ---------------------------------------------------------------------------
// Fault injection

struct FaultConfig {
  double pick_error_rate = 0.0;
  double insert_error_rate = 0.0;
  std::uint64_t seed = 0;

  void validate() const;  // rates in [0,1]
};

/// Replaces the marker with a uniformly chosen other marker of the same
/// namespace from `valid_markers`, with the configured probability. The draw is
/// a pure function of (seed, episode, call).
Skill inject_faults(const FaultConfig& config, const Skill& correct, const std::set<int>& valid_markers,
                    std::uint64_t episode_index, int call_index);

class FaultyBackend final : public RecognitionBackend, public ReasoningBackend {
 public:
  FaultyBackend(BackendPair wrapped, FaultConfig config);

  std::string name() const override { return "faulty"; }
  TripletAnnotations recognize(const RecognitionRequest& request) const override;
  std::string decide(const ReasoningRequest& request) const override;

 private:
  BackendPair wrapped_;
  FaultConfig config_;
};

// ---------------------------------------------------------------------------
// Record / replay

struct ReplayRecord {
  std::string stage;  // "recognize" | "decide"
  std::string request_hash;
  std::string response;

  friend bool operator==(const ReplayRecord&, const ReplayRecord&) = default;
};

std::string replay_record_to_json(const ReplayRecord& record);
std::vector<ReplayRecord> read_replay_file(const std::filesystem::path& path);
void write_replay_file(const std::filesystem::path& path, const std::vector<ReplayRecord>& records);

/// Plays recorded calls back in order; a stage or hash divergence raises ReplayMismatch.
class ReplayBackend final : public RecognitionBackend, public ReasoningBackend {
 public:
  explicit ReplayBackend(std::vector<ReplayRecord> records);
  static std::shared_ptr<ReplayBackend> from_file(const std::filesystem::path& path);

  std::string name() const override { return "replay"; }
  TripletAnnotations recognize(const RecognitionRequest& request) const override;
  std::string decide(const ReasoningRequest& request) const override;

  std::size_t remaining() const;

 private:
  const ReplayRecord& next(std::string_view stage, const std::string& hash) const;

  std::vector<ReplayRecord> records_;
  mutable std::mutex mutex_;
  mutable std::size_t cursor_ = 0;
};

/// Pass-through wrapper logging every successful call.
class RecordingBackend final : public RecognitionBackend, public ReasoningBackend {
 public:
  explicit RecordingBackend(BackendPair wrapped);

  std::string name() const override;
  TripletAnnotations recognize(const RecognitionRequest& request) const override;
  std::string decide(const ReasoningRequest& request) const override;

  std::vector<ReplayRecord> records() const;

 private:
  BackendPair wrapped_;
  mutable std::mutex mutex_;
  mutable std::vector<ReplayRecord> records_;
};

// ---------------------------------------------------------------------------
// Configuration

struct HttpConfig {
  std::string base_url;  // e.g. http://localhost:8000/v1
  std::string model_name;
  std::string api_key_env_var;  // name of the variable, never the key itself
  double timeout_s = 60.0;
  int max_retries = 2;
  int backoff_initial_ms = 500;

  void validate() const;
};

enum class BackendKind { Oracle, Faulty, Replay, Http };

std::string_view to_string(BackendKind kind);
std::optional<BackendKind> backend_kind_from_string(std::string_view text);

struct BackendConfig {
  BackendKind kind = BackendKind::Oracle;
  BackendKind wrapped = BackendKind::Oracle;  // Faulty only
  FaultConfig faults;
  std::filesystem::path replay_path;  // Replay only
  HttpConfig http;

  void validate() const;  // throws ConfigError
};

BackendPair make_backends(const BackendConfig& config);

}  // namespace asmvlm
