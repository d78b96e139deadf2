#include <benchmark/benchmark.h>

#include "critter/motion/bvh.hpp"
#include "critter/motion/features.hpp"
#include "critter/motion/kinematics.hpp"
#include "critter/util/binary_io.hpp"
#include "toy_motion.hpp"

namespace {

using namespace critter;

void BM_ParseBvh(benchmark::State& state) {
  const std::string text = motion::write_bvh(fixtures::toy_walk(static_cast<int>(state.range(0))));
  for (auto _ : state) benchmark::DoNotOptimize(motion::parse_bvh(text));
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * text.size()));
}
BENCHMARK(BM_ParseBvh)->Arg(64)->Arg(1024);

void BM_ParseSampleBvh(benchmark::State& state) {
  const std::string text = io::read_file_text(CRITTER_SAMPLES_DIR "/quadruped_walk.bvh");
  for (auto _ : state) benchmark::DoNotOptimize(motion::parse_bvh(text));
}
BENCHMARK(BM_ParseSampleBvh);

void BM_ForwardKinematics(benchmark::State& state) {
  const auto clip = fixtures::toy_walk(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(motion::world_positions(clip));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ForwardKinematics)->Arg(64)->Arg(1024);

void BM_ToFeatures(benchmark::State& state) {
  const auto clip = fixtures::toy_walk(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(motion::to_features(clip));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ToFeatures)->Arg(64)->Arg(1024);

}  // namespace
