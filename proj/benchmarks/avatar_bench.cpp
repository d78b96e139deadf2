#include <benchmark/benchmark.h>

#include "critter/avatar/body.hpp"
#include "critter/avatar/export.hpp"
#include "critter/avatar/rig.hpp"

namespace {

using namespace critter;

void BM_AutoRig(benchmark::State& state) {
  avatar::ProceduralParams params;
  params.radial_segments = static_cast<int>(state.range(0));
  const auto mesh = avatar::procedural_mesh(avatar::BodyPlan::kQuadruped, params);
  const auto rig = avatar::template_rig(avatar::BodyPlan::kQuadruped);
  for (auto _ : state) benchmark::DoNotOptimize(avatar::auto_rig(mesh, rig));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(mesh.vertices.size()));
}
BENCHMARK(BM_AutoRig)->Arg(12)->Arg(48);

void BM_ExportGlb(benchmark::State& state) {
  const auto rig = avatar::template_rig(avatar::BodyPlan::kQuadruped);
  const auto rigged = avatar::auto_rig(avatar::procedural_mesh(avatar::BodyPlan::kQuadruped), rig);
  const motion::MotionClip clip(rigged.rig, 1.0 / 30.0, Eigen::MatrixXd::Zero(state.range(0), rig.num_channels()));
  for (auto _ : state) benchmark::DoNotOptimize(avatar::export_glb(rigged, clip));
}
BENCHMARK(BM_ExportGlb)->Arg(120);

}  // namespace
