#include <benchmark/benchmark.h>

#include "sdgcount/data.hpp"
#include "sdgcount/model.hpp"
#include "sdgcount/ops.hpp"
#include "sdgcount/synthbench.hpp"

using namespace sdgcount;

namespace {

Tensor random_tensor(Shape shape, std::uint64_t seed) {
  Rng rng(seed);
  Tensor t(std::move(shape));
  for (auto& v : t.values()) v = rng.uniform(-1, 1);
  return t;
}

void BM_Conv3x3(benchmark::State& state) {
  const int c = static_cast<int>(state.range(0));
  const ag::Var x(random_tensor({1, c, 32, 32}, 1));
  const ag::Var w(random_tensor({c, c, 3, 3}, 2));
  const ag::Var b(Tensor({c}));
  ag::NoGradGuard ng;
  for (auto _ : state) benchmark::DoNotOptimize(ag::conv2d(x, w, b, 1));
}
BENCHMARK(BM_Conv3x3)->Arg(16)->Arg(64);

void BM_DensityMap(benchmark::State& state) {
  SceneSpec spec;
  spec.height = spec.width = 256;
  spec.min_count = spec.max_count = static_cast<int>(state.range(0));
  Rng rng(3);
  const Scene s = generate_scene(spec, rng);
  for (auto _ : state) benchmark::DoNotOptimize(generate_density_map(s.annotation, 256, 256, 4.0, true));
}
BENCHMARK(BM_DensityMap)->Arg(10)->Arg(200);

void BM_TinyForward(benchmark::State& state) {
  ModelConfig cfg;
  cfg.backbone = BackboneSpec::tiny();
  cfg.memory_count = 64;
  cfg.memory_dim = 32;
  const MPCountModel model(cfg, 4);
  SceneSpec spec;
  Rng rng(5);
  const Image image = generate_scene(spec, rng).image;
  for (auto _ : state) benchmark::DoNotOptimize(model.forward_infer(image, 1000.0));
}
BENCHMARK(BM_TinyForward);

}  // namespace

BENCHMARK_MAIN();
