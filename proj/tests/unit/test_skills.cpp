#include <gtest/gtest.h>

#include <cmath>

#include "asmvlm/error.hpp"
#include "asmvlm/render.hpp"
#include "asmvlm/scenario.hpp"
#include "asmvlm/skills.hpp"
#include "test_support.hpp"

using namespace asmvlm;

namespace {

struct Bench {
  WorldState world;
  Camera top;
  AnnotationSet markers;
  PolicySet policies;
  ExecutorConfig exec;

  explicit Bench(const std::string& scenario, double noise = 0.0, std::uint64_t seed = 1)
      : world(spawn_world(builtin_scenario(scenario), seed)), top(world.top_camera) {
    auto labels = builtin_scenario(scenario).recognition_labels();
    for (const auto& l : builtin_scenario(scenario).location_labels()) labels.push_back(l);
    markers = ground_truth_points(world, top, labels);
    PolicyConfig pc;
    pc.noise_sigma = noise;
    policies = PolicyRegistry::with_builtins().make_policies(pc);
  }

  SkillResult run(const WorldState& w, const Skill& s, std::uint64_t stream = 0, const RolloutHooks* hooks = nullptr) {
    std::mt19937_64 rng(stream);
    return execute_skill(w, s, markers, top, policies, exec, rng, hooks);
  }
};

}  // namespace

TEST(MarkerToWorkspace, CentreAccuracy) {
  const Bench b("sim");
  for (const auto& m : b.markers) {
    const Pose p = marker_to_workspace(m.marker_id, b.markers, b.top);
    const SceneObject& o = b.world.get(m.marker_id);
    EXPECT_LT(std::hypot(p.x - o.pose.x, p.y - o.pose.y), b.top.meters_per_pixel);
    EXPECT_DOUBLE_EQ(p.z, 0.0);
    EXPECT_DOUBLE_EQ(p.yaw, 0.0);
  }
  try {
    marker_to_workspace(42, b.markers, b.top);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnknownMarker);
  }
}

TEST(PlanMove, VerticalOnlyWhenAligned) {
  const Pose from{0.2, 0.1, 0.08, 0.0};
  const Pose to{0.2, 0.1, 0.01, 0.0};
  const auto cmds = plan_move(from, to);
  ASSERT_FALSE(cmds.empty());
  for (const auto& c : cmds) {
    EXPECT_TRUE(c.within_limits());
    EXPECT_DOUBLE_EQ(c.dx, 0.0);
    EXPECT_DOUBLE_EQ(c.dy, 0.0);
    EXPECT_EQ(c.grip, Grip::Hold);
  }
}

TEST(ApproachMove, RandomTargetsLandWithinOneStep) {
  const WorldState w = spawn_world(builtin_scenario("sim"), 2);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> ux(0.02, 0.48);
  std::uniform_real_distribution<double> uy(0.02, 0.28);
  for (int i = 0; i < 100; ++i) {
    const Pose target{ux(rng), uy(rng), 0.0, 0.0};
    const WorldState after = approach_move(w, target, 0.05);
    const Pose& tool = after.robot.tool_pose;
    EXPECT_LT(std::hypot(tool.x - target.x, tool.y - target.y), kMaxStepTranslation);
    EXPECT_NEAR(tool.z, 0.05, kMaxStepTranslation);
    EXPECT_EQ(after.robot.gripper_aperture, w.robot.gripper_aperture);
  }
  try {
    approach_move(w, {2.0, 0.1, 0.0, 0.0}, 0.05);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnreachableTarget);
  }
}

TEST(ExecuteSkill, DoneIsNoOp) {
  Bench b("sim");
  const SkillResult r = b.run(b.world, Skill::done());
  EXPECT_EQ(r.status, SkillStatus::Succeeded);
  EXPECT_EQ(r.world_after, b.world);
}

TEST(ExecuteSkill, InitReturnsHomeWithOpenGripper) {
  Bench b("sim");
  WorldState w = b.world;
  w.robot.tool_pose = {0.3, 0.2, 0.02, 0.0};
  w.robot.gripper_aperture = 0.0;
  const SkillResult r = b.run(w, Skill::init());
  EXPECT_EQ(r.status, SkillStatus::Succeeded);
  EXPECT_NEAR(r.world_after.robot.tool_pose.x, w.home.x, 1e-9);
  EXPECT_NEAR(r.world_after.robot.tool_pose.z, w.home.z, 1e-9);
  EXPECT_DOUBLE_EQ(r.world_after.robot.gripper_aperture, kMaxAperture);
}

TEST(ExecuteSkill, Preconditions) {
  Bench b("single_gear");
  const SkillResult insert_empty = b.run(b.world, Skill::insert(101));
  EXPECT_EQ(insert_empty.status, SkillStatus::Aborted);
  EXPECT_EQ(insert_empty.error, ErrorCode::PreconditionViolated);
  EXPECT_EQ(insert_empty.world_after, b.world);

  const SkillResult picked = b.run(b.world, Skill::pick(1));
  ASSERT_EQ(picked.status, SkillStatus::Succeeded);
  const SkillResult again = b.run(picked.world_after, Skill::pick(1));
  EXPECT_EQ(again.status, SkillStatus::Aborted);
  EXPECT_EQ(again.error, ErrorCode::PreconditionViolated);

  const SkillResult unknown = b.run(b.world, Skill::pick(42));
  EXPECT_EQ(unknown.status, SkillStatus::Aborted);
  EXPECT_EQ(unknown.error, ErrorCode::UnknownMarker);
}

TEST(ExecuteSkill, PickThenInsertCompletesSingleGear) {
  Bench b("single_gear");
  const SkillResult pick = b.run(b.world, Skill::pick(1));
  ASSERT_EQ(pick.status, SkillStatus::Succeeded) << pick.reason;
  EXPECT_EQ(pick.world_after.get(1).status, ObjectStatus::grasped());
  const SkillResult insert = b.run(pick.world_after, Skill::insert(101));
  ASSERT_EQ(insert.status, SkillStatus::Succeeded) << insert.reason;
  EXPECT_EQ(insert.world_after.get(1).status, ObjectStatus::inserted(101));
  EXPECT_TRUE(assembly_complete(insert.world_after));
}

TEST(ExecuteSkill, PlaceReleasesOnTable) {
  Bench b("real1");
  const SkillResult pick = b.run(b.world, Skill::pick(2));
  ASSERT_EQ(pick.status, SkillStatus::Succeeded) << pick.reason;
  // Place beside a shaft is a plain release; placing on the shaft itself threads it.
  const SkillResult place = b.run(pick.world_after, Skill::place(102));
  ASSERT_EQ(place.status, SkillStatus::Succeeded) << place.reason;
  EXPECT_FALSE(place.world_after.robot.holding.has_value());
}

TEST(Chunking, SixteenCommandsPerQueryForEverySkill) {
  Bench b("real1");
  testkit::ChunkCounter pick_count;
  const RolloutHooks pick_hooks = pick_count.hooks();
  const SkillResult pick = b.run(b.world, Skill::pick(1), 0, &pick_hooks);
  ASSERT_EQ(pick.status, SkillStatus::Succeeded);

  testkit::ChunkCounter insert_count;
  const RolloutHooks insert_hooks = insert_count.hooks();
  const SkillResult insert = b.run(pick.world_after, Skill::insert(101), 0, &insert_hooks);
  ASSERT_EQ(insert.status, SkillStatus::Succeeded);

  const SkillResult pick2 = b.run(insert.world_after, Skill::pick(2));
  testkit::ChunkCounter place_count;
  const RolloutHooks place_hooks = place_count.hooks();
  b.run(pick2.world_after, Skill::place(102), 0, &place_hooks);

  for (const auto* c : {&pick_count, &insert_count, &place_count}) {
    ASSERT_FALSE(c->per_query.empty());
    for (int n : c->per_query) EXPECT_EQ(n, kDefaultChunkLength);
  }
  EXPECT_EQ(pick.steps_used, pick.policy_queries * kDefaultChunkLength);
}

TEST(Rollout, BudgetBelowOneChunkIsConfigError) {
  Bench b("single_gear");
  ExecutorConfig cfg;
  cfg.step_budget = 8;
  std::mt19937_64 rng(1);
  try {
    rollout_policy(b.world, *b.policies.pick, b.world.get(1).pose, cfg, rng);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ConfigError);
  }
}

namespace {

class BrokenPolicy final : public Policy {
 public:
  std::string name() const override { return "broken"; }
  PolicyStep act(const PolicyInput&, std::mt19937_64&) const override { return {Trajectory{{Command{}}}, false}; }
};

}  // namespace

TEST(Rollout, MalformedChunkIsPolicyFailure) {
  Bench b("single_gear");
  std::mt19937_64 rng(1);
  const SkillResult r = rollout_policy(b.world, BrokenPolicy(), b.world.get(1).pose, b.exec, rng);
  EXPECT_EQ(r.status, SkillStatus::Aborted);
  EXPECT_EQ(r.error, ErrorCode::PolicyFailure);
}

TEST(Registry, BuiltinsAndPlugins) {
  PolicyRegistry reg = PolicyRegistry::with_builtins();
  EXPECT_TRUE(reg.contains("scripted_pick"));
  EXPECT_TRUE(reg.contains("scripted_place"));
  EXPECT_TRUE(reg.contains("scripted_insert"));
  reg.add("broken", [](const PolicyConfig&) { return std::make_shared<BrokenPolicy>(); });
  PolicyConfig cfg;
  cfg.assignments["pick"] = "broken";
  EXPECT_EQ(reg.make_policies(cfg).pick->name(), "broken");
  cfg.assignments["pick"] = "missing";
  EXPECT_THROW(reg.make_policies(cfg), Error);
}

TEST(WristBlob, LocatesShaftUnderTool) {
  WorldState w = spawn_world(builtin_scenario("single_gear"), 1);
  const SceneObject& shaft = w.get(101);
  w.robot.tool_pose = {shaft.pose.x + 0.0012, shaft.pose.y - 0.0007, 0.05, 0.0};
  const Camera cam = wrist_camera(w);
  const auto c = locate_center_blob(render(w, cam), cam);
  ASSERT_TRUE(c.has_value());
  EXPECT_LT(std::hypot(c->x - shaft.pose.x, c->y - shaft.pose.y), 0.0001);
  w.robot.tool_pose.x += 0.03;  // over bare plate
  const Camera off = wrist_camera(w);
  EXPECT_FALSE(locate_center_blob(render(w, off), off).has_value());
}

constexpr int kFrozenInsertSuccesses = 31;  // of 200, libstdc++ normal_distribution

// Insert under sigma = 0.5 mm planar noise against a 0.1 mm clearance. The
// count is a regression value frozen from the first run.
TEST(InsertNoise, MonteCarloHalfMillimetre) {
  Bench b("single_gear", 0.0005);
  Bench clean("single_gear");
  const SkillResult pick = clean.run(clean.world, Skill::pick(1));
  ASSERT_EQ(pick.status, SkillStatus::Succeeded);
  int successes = 0;
  for (std::uint64_t t = 0; t < 200; ++t) {
    const SkillResult r = b.run(pick.world_after, Skill::insert(101), 1000 + t);
    successes += r.status == SkillStatus::Succeeded ? 1 : 0;
  }
  EXPECT_GT(successes, 0);
  EXPECT_LT(successes, 200);
  EXPECT_EQ(successes, kFrozenInsertSuccesses);
}
