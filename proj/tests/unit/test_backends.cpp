#include <gtest/gtest.h>

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <thread>

#include "asmvlm/backend.hpp"
#include "asmvlm/error.hpp"
#include "asmvlm/http_backend.hpp"
#include "asmvlm/render.hpp"
#include "asmvlm/scenario.hpp"
#include "httplib.h"
#include "json.hpp"

using namespace asmvlm;

namespace {

struct Fixture {
  WorldState world;
  GroundTruth truth;
  ImageTriplet triplet;
  std::vector<std::string> objects;
  std::vector<std::string> locations;

  explicit Fixture(const std::string& scenario, std::uint64_t seed = 1)
      : world(spawn_world(builtin_scenario(scenario), seed)) {
    truth.world = &world;
    truth.current_camera = world.top_camera;
    truth.goal_camera = world.top_camera.with_view(CameraView::TopGoal);
    truth.object_camera = object_closeup_camera(world, world.goal.required_insertions.front().first);
    triplet = {render(world, truth.object_camera), render(world, truth.current_camera),
               render(world, truth.goal_camera)};
    const auto cfg = builtin_scenario(scenario);
    objects = cfg.recognition_labels();
    locations = cfg.location_labels();
  }

  RecognitionRequest recognition(int call = 0) const {
    return {triplet, objects, locations, build_recognition_prompt(objects), {0, call, &truth}};
  }

  ReasoningRequest reasoning(const TripletAnnotations& a, int call = 0) const {
    const MarkedTriplet m = mark_triplet(triplet, a);
    return {m, build_reasoning_prompt(default_template(), m, {}), {0, call, &truth}};
  }
};

std::vector<std::string> all_labels(const Fixture& f) {
  auto l = f.objects;
  l.insert(l.end(), f.locations.begin(), f.locations.end());
  return l;
}

}  // namespace

TEST(Oracle, RecognizeDelegatesToGroundTruth) {
  const Fixture f("sim");
  const TripletAnnotations a = OracleBackend().recognize(f.recognition());
  EXPECT_EQ(a.current, ground_truth_points(f.world, f.truth.current_camera, all_labels(f)));
  EXPECT_EQ(a.goal, ground_truth_points(goal_world(f.world), f.truth.goal_camera, all_labels(f)));
  EXPECT_FALSE(a.object.empty());
}

TEST(Oracle, RecognizeWithoutTruthFails) {
  const Fixture f("sim");
  RecognitionRequest r = f.recognition();
  r.context.truth = nullptr;
  EXPECT_THROW(OracleBackend().recognize(r), Error);
}

TEST(Oracle, NextSkillCases) {
  WorldState w = spawn_world(builtin_scenario("single_gear"), 1);
  EXPECT_EQ(oracle_next_skill(w), Skill::pick(1));
  w.find(1)->status = ObjectStatus::grasped();
  w.robot.holding = 1;
  EXPECT_EQ(oracle_next_skill(w), Skill::insert(101));
  const WorldState done = goal_world(spawn_world(builtin_scenario("single_gear"), 1));
  EXPECT_EQ(oracle_next_skill(done), Skill::done());
}

TEST(Oracle, NextSkillRespectsOrdering) {
  const WorldState w = spawn_world(builtin_scenario("sim"), 1);
  EXPECT_EQ(oracle_next_skill(w), Skill::pick(1));
}

TEST(Oracle, DecideEmitsMarkers) {
  const Fixture f("single_gear");
  const OracleBackend oracle;
  const TripletAnnotations a = oracle.recognize(f.recognition());
  EXPECT_EQ(oracle.decide(f.reasoning(a)), "DECISION: pick(1)");
}

TEST(Faults, ZeroRatePassesThrough) {
  const FaultConfig cfg{0.0, 0.0, 5};
  const std::set<int> known{1, 2, 101, 102};
  for (int call = 0; call < 200; ++call) {
    EXPECT_EQ(inject_faults(cfg, Skill::pick(1), known, 3, call), Skill::pick(1));
    EXPECT_EQ(inject_faults(cfg, Skill::insert(101), known, 3, call), Skill::insert(101));
  }
}

TEST(Faults, CertainInsertErrorPicksTheOtherShaft) {
  const FaultConfig cfg{0.0, 1.0, 5};
  const std::set<int> known{1, 2, 101, 102};
  for (int call = 0; call < 200; ++call) {
    EXPECT_EQ(inject_faults(cfg, Skill::insert(101), known, 0, call), Skill::insert(102));
    EXPECT_EQ(inject_faults(cfg, Skill::pick(2), known, 0, call), Skill::pick(2));
    EXPECT_EQ(inject_faults(cfg, Skill::done(), known, 0, call), Skill::done());
  }
}

TEST(Faults, CorruptionRateMatches) {
  const FaultConfig cfg{0.0, 0.7, 11};
  const std::set<int> known{1, 2, 101, 102, 103};
  int corrupted = 0;
  for (int episode = 0; episode < 1000; ++episode) {
    const Skill s = inject_faults(cfg, Skill::insert(101), known, static_cast<std::uint64_t>(episode), 1);
    EXPECT_TRUE(is_location_marker(s.marker));
    corrupted += s == Skill::insert(101) ? 0 : 1;
  }
  EXPECT_NEAR(corrupted / 1000.0, 0.7, 0.04);
}

TEST(Faults, DeterministicPerCall) {
  const FaultConfig cfg{0.5, 0.5, 99};
  const std::set<int> known{1, 2, 3, 101, 102, 103};
  for (int call = 0; call < 50; ++call) {
    EXPECT_EQ(inject_faults(cfg, Skill::pick(1), known, 4, call), inject_faults(cfg, Skill::pick(1), known, 4, call));
  }
  EXPECT_THROW((FaultConfig{1.5, 0.0, 0}).validate(), Error);
}

TEST(Replay, RecordThenReplayIsIdentical) {
  const Fixture f("sim");
  BackendPair oracle{std::make_shared<OracleBackend>(), std::make_shared<OracleBackend>()};
  RecordingBackend rec(oracle);
  const TripletAnnotations a = rec.recognize(f.recognition());
  const std::string reply = rec.decide(f.reasoning(a, 0));
  const auto records = rec.records();
  ASSERT_EQ(records.size(), 2u);

  const auto path = std::filesystem::temp_directory_path() / "asmvlm_replay_test.jsonl";
  write_replay_file(path, records);
  EXPECT_EQ(read_replay_file(path), records);
  auto replay = ReplayBackend::from_file(path);
  EXPECT_EQ(replay->recognize(f.recognition()), a);
  EXPECT_EQ(replay->decide(f.reasoning(a, 0)), reply);
  EXPECT_EQ(replay->remaining(), 0u);
  std::filesystem::remove(path);
}

TEST(Replay, DivergenceRaisesMismatch) {
  const Fixture f("sim");
  const Fixture other("sim", 2);
  BackendPair oracle{std::make_shared<OracleBackend>(), std::make_shared<OracleBackend>()};
  RecordingBackend rec(oracle);
  rec.recognize(f.recognition());
  ReplayBackend replay(rec.records());
  try {
    replay.recognize(other.recognition());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ReplayMismatch);
  }
  ReplayBackend exhausted({});
  EXPECT_THROW(exhausted.recognize(f.recognition()), Error);
}

TEST(Replay, InvalidUtf8SurvivesRoundTrip) {
  const ReplayRecord r{"decide", "abc", std::string("bad \xff\xfe bytes")};
  EXPECT_NO_THROW(replay_record_to_json(r));
}

TEST(BackendConfig, Factory) {
  BackendConfig cfg;
  EXPECT_EQ(make_backends(cfg).reasoning->name(), "oracle");
  cfg.kind = BackendKind::Faulty;
  EXPECT_EQ(make_backends(cfg).reasoning->name(), "faulty");
  cfg.kind = BackendKind::Replay;
  EXPECT_THROW(make_backends(cfg), Error);
  EXPECT_EQ(backend_kind_from_string("http"), BackendKind::Http);
  EXPECT_FALSE(backend_kind_from_string("gpt").has_value());
}

TEST(PointReply, Formats) {
  const std::vector<std::string> labels{"red gear", "shaft A"};
  const AnnotationSet a = parse_point_reply("Point: (134, 76) red gear", labels, 500, 300);
  ASSERT_EQ(a.size(), 1u);
  EXPECT_EQ(a[0].pixel, (PixelCoord{134, 76}));
  EXPECT_EQ(a[0].label, "red gear");

  const AnnotationSet b =
      parse_point_reply("<point x=\"10.7\" y=\"20\" alt=\"shaft A\"></point>\n(3, 4) Red Gear.\n(1,1) unicorn",
                        labels, 500, 300);
  ASSERT_EQ(b.size(), 2u);
  EXPECT_EQ(b[0].pixel, (PixelCoord{10, 20}));
  EXPECT_EQ(b[0].label, "shaft A");
  EXPECT_EQ(b[1].label, "red gear");

  EXPECT_TRUE(parse_point_reply("(600, 10) red gear", labels, 500, 300).empty());
  EXPECT_TRUE(parse_point_reply("none", labels, 500, 300).empty());
  try {
    parse_point_reply("I see a gear", labels, 500, 300);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MalformedPoints);
  }
}

TEST(ChatApi, RequestAndResponse) {
  MultiModalPrompt p;
  p.parts.emplace_back(TextPart{"hello"});
  p.parts.emplace_back(ImagePart{ImageRole::Current, RasterImage(2, 2, {1, 2, 3})});
  const auto body = nlohmann::json::parse(build_chat_request("m", p));
  EXPECT_EQ(body["model"], "m");
  const auto& content = body["messages"][0]["content"];
  ASSERT_EQ(content.size(), 2u);
  EXPECT_EQ(content[0]["text"], "hello");
  EXPECT_EQ(content[1]["image_url"]["url"].get<std::string>().rfind("data:image/png;base64,", 0), 0u);

  EXPECT_EQ(extract_chat_content(R"({"choices":[{"message":{"content":"DECISION: done"}}]})"), "DECISION: done");
  EXPECT_THROW(extract_chat_content(R"({"choices":[{"message":{"content":"  "}}]})"), Error);
  EXPECT_THROW(extract_chat_content("not json"), Error);
}

TEST(Http, MissingApiKeyVariableIsConfigError) {
  HttpConfig cfg;
  cfg.base_url = "http://127.0.0.1:1/v1";
  cfg.model_name = "m";
  cfg.api_key_env_var = "ASMVLM_TEST_KEY_THAT_IS_NOT_SET";
  ::unsetenv(cfg.api_key_env_var.c_str());
  try {
    HttpBackend backend(cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ConfigError);
  }
}

TEST(Http, CannedServerWithRetry) {
  httplib::Server server;
  std::atomic<int> calls{0};
  std::atomic<bool> saw_auth{false};
  server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    saw_auth = req.get_header_value("Authorization") == "Bearer sekrit";
    if (calls++ == 0) {
      res.status = 503;
      return;
    }
    const auto body = nlohmann::json::parse(req.body);
    const std::string text = body["messages"][0]["content"][0]["text"];
    const std::string reply = text.rfind("Point to", 0) == 0 ? "Point: (134, 76) red gear" : "DECISION: pick(1)";
    res.set_content(nlohmann::json{{"choices", {{{"message", {{"content", reply}}}}}}}.dump(), "application/json");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread t([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  ::setenv("ASMVLM_TEST_KEY", "sekrit", 1);
  HttpConfig cfg;
  cfg.base_url = "http://127.0.0.1:" + std::to_string(port) + "/v1";
  cfg.model_name = "test-model";
  cfg.api_key_env_var = "ASMVLM_TEST_KEY";
  cfg.max_retries = 2;
  cfg.backoff_initial_ms = 1;
  cfg.timeout_s = 5;
  HttpBackend backend(cfg);

  const Fixture f("sim");
  const TripletAnnotations a = backend.recognize(f.recognition());
  ASSERT_EQ(a.current.size(), 1u);
  EXPECT_EQ(a.current[0], (PointAnnotation{1, {134, 76}, "red gear"}));
  EXPECT_EQ(calls.load(), 4);  // one 503, then one call per image
  EXPECT_TRUE(saw_auth.load());
  EXPECT_EQ(backend.decide(f.reasoning(a)), "DECISION: pick(1)");

  server.stop();
  t.join();
}

TEST(Http, UnreachableEndpointIsBackendUnavailable) {
  HttpConfig cfg;
  cfg.base_url = "http://127.0.0.1:9/v1";
  cfg.model_name = "m";
  cfg.max_retries = 1;
  cfg.backoff_initial_ms = 1;
  cfg.timeout_s = 1;
  HttpBackend backend(cfg);
  MultiModalPrompt p;
  p.parts.emplace_back(TextPart{"hi"});
  try {
    backend.chat(p);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::BackendUnavailable);
  }
}
