#include "asmvlm/backend.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <map>
#include <random>

#include "asmvlm/error.hpp"
#include "asmvlm/hash.hpp"
#include "asmvlm/http_backend.hpp"
#include "json_util.hpp"

namespace asmvlm {

using detail::Json;

// ---------------------------------------------------------------------------
// Requests

std::vector<std::string> RecognitionRequest::all_labels() const {
  std::vector<std::string> out;
  for (const auto* list : {&object_labels, &location_labels}) {
    for (const auto& l : *list) {
      if (std::find(out.begin(), out.end(), l) == out.end()) out.push_back(l);
    }
  }
  return out;
}

void RecognitionRequest::validate() const {
  if (object_labels.empty()) throw Error(ErrorCode::EmptyLabelSet, "no object labels");
  for (const auto* list : {&object_labels, &location_labels}) {
    for (const auto& l : *list) {
      if (l.empty()) throw Error(ErrorCode::EmptyLabelSet, "empty label");
    }
  }
}

std::string RecognitionRequest::hash() const {
  Json doc{{"images",
            {triplet.object_img.content_hash(), triplet.current_img.content_hash(), triplet.goal_img.content_hash()}},
           {"object_labels", object_labels},
           {"location_labels", location_labels},
           {"prompt", recognition_prompt}};
  return sha256_hex(doc.dump());
}

void ReasoningRequest::validate() const {
  if (marked.annotations.current.empty() || marked.annotations.goal.empty()) {
    throw Error(ErrorCode::MissingAnnotations, "current and goal images need markers");
  }
}

std::string ReasoningRequest::hash() const {
  return sha256_hex(prompt.serialize() + "\n" + triplet_annotations_to_json(marked.annotations));
}

// ---------------------------------------------------------------------------
// Oracle

std::optional<int> resolve_marker(const WorldState& world, const Camera& camera, const PointAnnotation& annotation) {
  const bool want_gear = is_object_marker(annotation.marker_id);
  if (!want_gear && !is_location_marker(annotation.marker_id)) return std::nullopt;
  std::optional<int> best;
  double best_d = std::numeric_limits<double>::infinity();
  for (const auto& o : world.objects) {
    if (want_gear ? !o.is_gear() : !o.is_shaft()) continue;
    const SubPixel p = camera.project(o.pose.x, o.pose.y);
    const double d = std::hypot(p.u - (annotation.pixel.x + 0.5), p.v - (annotation.pixel.y + 0.5));
    const double reach = std::max(2.0, footprint_radius(o.kind) / camera.meters_per_pixel);
    if (d <= reach && d < best_d) {
      best_d = d;
      best = o.object_id;
    }
  }
  return best;
}

namespace {

bool pair_satisfied(const WorldState& world, const std::pair<int, int>& pair) {
  const SceneObject* gear = world.find(pair.first);
  return gear != nullptr && gear->status == ObjectStatus::inserted(pair.second);
}

std::optional<std::int64_t> last_insertion(const WorldState& world, int gear_id) {
  std::optional<std::int64_t> step;
  for (const auto& e : world.insertion_log) {
    if (e.gear_id == gear_id) step = e.step;
  }
  return step;
}

bool predecessors_satisfied(const WorldState& world, int gear_id) {
  for (const auto& [before, after] : world.goal.ordering_constraints) {
    if (after != gear_id) continue;
    const bool ok = std::any_of(world.goal.required_insertions.begin(), world.goal.required_insertions.end(),
                                [&](const auto& p) { return p.first == before && pair_satisfied(world, p); });
    if (!ok) return false;
  }
  return true;
}

}  // namespace

Skill oracle_next_skill(const WorldState& world) {
  if (assembly_complete(world)) return Skill::done();
  const auto& pairs = world.goal.required_insertions;
  if (world.robot.holding) {
    const int held = *world.robot.holding;
    for (const auto& p : pairs) {
      if (p.first == held && predecessors_satisfied(world, held)) return Skill::insert(p.second);
    }
    return Skill::init();
  }
  for (const auto& p : pairs) {
    if (!pair_satisfied(world, p) && predecessors_satisfied(world, p.first)) return Skill::pick(p.first);
  }
  // Every pair holds but some insertion happened too early: redo the later gear.
  for (const auto& [before, after] : world.goal.ordering_constraints) {
    const auto b = last_insertion(world, before);
    const auto a = last_insertion(world, after);
    if (b && a && *a < *b) return Skill::pick(after);
  }
  return Skill::init();
}

namespace {

const GroundTruth& require_truth(const RequestContext& context) {
  if (context.truth == nullptr || context.truth->world == nullptr) {
    throw Error(ErrorCode::BackendUnavailable, "oracle backend needs simulator ground truth");
  }
  return *context.truth;
}

}  // namespace

TripletAnnotations OracleBackend::recognize(const RecognitionRequest& request) const {
  request.validate();
  const GroundTruth& truth = require_truth(request.context);
  const std::vector<std::string> labels = request.all_labels();
  TripletAnnotations out;
  out.object = ground_truth_points(*truth.world, truth.object_camera, labels);
  out.current = ground_truth_points(*truth.world, truth.current_camera, labels);
  out.goal = ground_truth_points(goal_world(*truth.world), truth.goal_camera, labels);
  return out;
}

std::string OracleBackend::decide(const ReasoningRequest& request) const {
  request.validate();
  const GroundTruth& truth = require_truth(request.context);
  Skill next = oracle_next_skill(*truth.world);
  if (next.marker != 0) {
    std::optional<int> marker;
    for (const auto& a : request.marked.annotations.current) {
      if (resolve_marker(*truth.world, truth.current_camera, a) == next.marker) {
        marker = a.marker_id;
        break;
      }
    }
    next = marker ? Skill{next.name, *marker} : Skill::init();
  }
  return format_decision(next);
}

// ---------------------------------------------------------------------------
// Fault injection

void FaultConfig::validate() const {
  const auto in_unit = [](double r) { return r >= 0.0 && r <= 1.0; };
  if (!in_unit(pick_error_rate) || !in_unit(insert_error_rate)) {
    throw Error(ErrorCode::ConfigError, "error rates must lie in [0, 1]");
  }
}

Skill inject_faults(const FaultConfig& config, const Skill& correct, const std::set<int>& valid_markers,
                    std::uint64_t episode_index, int call_index) {
  double rate = 0.0;
  switch (correct.name) {
    case SkillName::Pick:
      rate = config.pick_error_rate;
      break;
    case SkillName::Place:
    case SkillName::Insert:
      rate = config.insert_error_rate;
      break;
    case SkillName::Done:
    case SkillName::Init:
      return correct;
  }
  std::seed_seq seq{static_cast<std::uint32_t>(config.seed), static_cast<std::uint32_t>(config.seed >> 32),
                    static_cast<std::uint32_t>(episode_index), static_cast<std::uint32_t>(episode_index >> 32),
                    static_cast<std::uint32_t>(call_index)};
  std::mt19937_64 rng(seq);
  if (!(std::uniform_real_distribution<double>(0.0, 1.0)(rng) < rate)) return correct;

  const bool object = is_object_marker(correct.marker);
  std::vector<int> others;
  for (int id : valid_markers) {
    if (id != correct.marker && (object ? is_object_marker(id) : is_location_marker(id))) others.push_back(id);
  }
  if (others.empty()) return correct;
  std::uniform_int_distribution<std::size_t> pick(0, others.size() - 1);
  return {correct.name, others[pick(rng)]};
}

FaultyBackend::FaultyBackend(BackendPair wrapped, FaultConfig config)
    : wrapped_(std::move(wrapped)), config_(config) {
  config_.validate();
  if (!wrapped_.recognition || !wrapped_.reasoning) throw Error(ErrorCode::ConfigError, "faulty backend needs a wrapped pair");
}

TripletAnnotations FaultyBackend::recognize(const RecognitionRequest& request) const {
  return wrapped_.recognition->recognize(request);
}

std::string FaultyBackend::decide(const ReasoningRequest& request) const {
  std::string raw = wrapped_.reasoning->decide(request);
  const std::set<int> known = request.known_markers();
  const ParseResult parsed = parse_decision(raw, known);
  const auto* decision = std::get_if<SkillDecision>(&parsed);
  if (decision == nullptr) return raw;
  const Skill faulted =
      inject_faults(config_, decision->skill, known, request.context.episode_index, request.context.call_index);
  return faulted == decision->skill ? raw : format_decision(faulted);
}

// ---------------------------------------------------------------------------
// Record / replay

std::string replay_record_to_json(const ReplayRecord& record) {
  return Json{{"stage", record.stage}, {"request_hash", record.request_hash}, {"response", record.response}}
      .dump(-1, ' ', false, Json::error_handler_t::replace);
}

std::vector<ReplayRecord> read_replay_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read replay file " + path.string());
  std::vector<ReplayRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const Json j = detail::parse_json(line, "replay record");
    out.push_back({detail::require_string(j, "stage"), detail::require_string(j, "request_hash"),
                   detail::require_string(j, "response")});
  }
  return out;
}

void write_replay_file(const std::filesystem::path& path, const std::vector<ReplayRecord>& records) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write replay file " + path.string());
  for (const auto& r : records) out << replay_record_to_json(r) << "\n";
}

ReplayBackend::ReplayBackend(std::vector<ReplayRecord> records) : records_(std::move(records)) {}

std::shared_ptr<ReplayBackend> ReplayBackend::from_file(const std::filesystem::path& path) {
  return std::make_shared<ReplayBackend>(read_replay_file(path));
}

const ReplayRecord& ReplayBackend::next(std::string_view stage, const std::string& hash) const {
  std::lock_guard lock(mutex_);
  if (cursor_ >= records_.size()) throw Error(ErrorCode::ReplayMismatch, "replay log exhausted");
  const ReplayRecord& r = records_[cursor_];
  if (r.stage != stage) {
    throw Error(ErrorCode::ReplayMismatch, "call " + std::to_string(cursor_) + ": expected stage " + r.stage +
                                               ", got " + std::string(stage));
  }
  if (r.request_hash != hash) {
    throw Error(ErrorCode::ReplayMismatch, "call " + std::to_string(cursor_) + ": request hash differs");
  }
  ++cursor_;
  return r;
}

TripletAnnotations ReplayBackend::recognize(const RecognitionRequest& request) const {
  return triplet_annotations_from_json(next("recognize", request.hash()).response);
}

std::string ReplayBackend::decide(const ReasoningRequest& request) const {
  return next("decide", request.hash()).response;
}

std::size_t ReplayBackend::remaining() const {
  std::lock_guard lock(mutex_);
  return records_.size() - cursor_;
}

RecordingBackend::RecordingBackend(BackendPair wrapped) : wrapped_(std::move(wrapped)) {
  if (!wrapped_.recognition || !wrapped_.reasoning) throw Error(ErrorCode::ConfigError, "recording needs a wrapped pair");
}

std::string RecordingBackend::name() const { return wrapped_.reasoning->name(); }

TripletAnnotations RecordingBackend::recognize(const RecognitionRequest& request) const {
  TripletAnnotations result = wrapped_.recognition->recognize(request);
  std::lock_guard lock(mutex_);
  records_.push_back({"recognize", request.hash(), triplet_annotations_to_json(result)});
  return result;
}

std::string RecordingBackend::decide(const ReasoningRequest& request) const {
  std::string reply = wrapped_.reasoning->decide(request);
  std::lock_guard lock(mutex_);
  records_.push_back({"decide", request.hash(), reply});
  return reply;
}

std::vector<ReplayRecord> RecordingBackend::records() const {
  std::lock_guard lock(mutex_);
  return records_;
}

// ---------------------------------------------------------------------------
// Configuration

void HttpConfig::validate() const {
  if (base_url.empty()) throw Error(ErrorCode::ConfigError, "http backend needs base_url");
  if (model_name.empty()) throw Error(ErrorCode::ConfigError, "http backend needs model_name");
  if (!(timeout_s > 0.0)) throw Error(ErrorCode::ConfigError, "timeout_s must be positive");
  if (max_retries < 0) throw Error(ErrorCode::ConfigError, "max_retries must be >= 0");
  if (backoff_initial_ms < 0) throw Error(ErrorCode::ConfigError, "backoff_initial_ms must be >= 0");
}

std::string_view to_string(BackendKind kind) {
  switch (kind) {
    case BackendKind::Oracle:
      return "oracle";
    case BackendKind::Faulty:
      return "faulty";
    case BackendKind::Replay:
      return "replay";
    case BackendKind::Http:
      return "http";
  }
  return "unknown";
}

std::optional<BackendKind> backend_kind_from_string(std::string_view text) {
  for (auto k : {BackendKind::Oracle, BackendKind::Faulty, BackendKind::Replay, BackendKind::Http}) {
    if (to_string(k) == text) return k;
  }
  return std::nullopt;
}

void BackendConfig::validate() const {
  faults.validate();
  const BackendKind inner = kind == BackendKind::Faulty ? wrapped : kind;
  if (inner == BackendKind::Faulty) throw Error(ErrorCode::ConfigError, "faulty backend cannot wrap itself");
  if (inner == BackendKind::Replay && replay_path.empty()) throw Error(ErrorCode::ConfigError, "replay needs a path");
  if (inner == BackendKind::Http) http.validate();
}

BackendPair make_backends(const BackendConfig& config) {
  config.validate();
  const BackendKind inner = config.kind == BackendKind::Faulty ? config.wrapped : config.kind;
  BackendPair pair;
  switch (inner) {
    case BackendKind::Oracle: {
      auto b = std::make_shared<OracleBackend>();
      pair = {b, b};
      break;
    }
    case BackendKind::Replay: {
      auto b = ReplayBackend::from_file(config.replay_path);
      pair = {b, b};
      break;
    }
    case BackendKind::Http: {
      auto b = std::make_shared<HttpBackend>(config.http);
      pair = {b, b};
      break;
    }
    case BackendKind::Faulty:
      break;
  }
  if (config.kind == BackendKind::Faulty) {
    auto f = std::make_shared<FaultyBackend>(pair, config.faults);
    pair = {f, f};
  }
  return pair;
}

}  // namespace asmvlm
