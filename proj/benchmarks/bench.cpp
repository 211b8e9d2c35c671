#include <benchmark/benchmark.h>

#include "asmvlm/annotation.hpp"
#include "asmvlm/marking.hpp"
#include "asmvlm/orchestrator.hpp"
#include "asmvlm/render.hpp"
#include "asmvlm/scenario.hpp"

using namespace asmvlm;

namespace {

WorldState sim_world() { return spawn_world(builtin_scenario("sim"), 1); }

AnnotationSet top_points(const WorldState& w) {
  auto labels = builtin_scenario("sim").recognition_labels();
  for (const auto& l : builtin_scenario("sim").location_labels()) labels.push_back(l);
  return ground_truth_points(w, w.top_camera, labels);
}

void BM_RenderTop(benchmark::State& state) {
  const WorldState w = sim_world();
  for (auto _ : state) benchmark::DoNotOptimize(render(w, w.top_camera));
}
BENCHMARK(BM_RenderTop);

void BM_MarkTop(benchmark::State& state) {
  const WorldState w = sim_world();
  const RasterImage img = render(w, w.top_camera);
  const AnnotationSet points = top_points(w);
  for (auto _ : state) benchmark::DoNotOptimize(mark_image(img, points));
}
BENCHMARK(BM_MarkTop);

void BM_ParseDecision(benchmark::State& state) {
  const std::set<int> known{1, 2, 3, 101, 102, 103};
  const std::string reply =
      "The red gear must go first and it is free on the table.\n"
      "Reasoning: shaft 101 is empty.\nDECISION: pick(1)\n";
  for (auto _ : state) benchmark::DoNotOptimize(parse_decision(reply, known));
}
BENCHMARK(BM_ParseDecision);

void BM_OracleEpisode(benchmark::State& state) {
  const WorldState w = sim_world();
  const PolicySet policies = PolicyRegistry::with_builtins().make_policies({});
  const PromptTemplate tmpl = default_template();
  const OracleBackend oracle;
  EpisodeComponents comp{&oracle, &oracle, &policies, &tmpl, {}};
  EpisodeConfig cfg;
  cfg.hash_images = state.range(0) != 0;
  for (auto _ : state) benchmark::DoNotOptimize(run_episode(w, comp, cfg));
}
BENCHMARK(BM_OracleEpisode)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
