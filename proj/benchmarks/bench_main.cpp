#include <benchmark/benchmark.h>

#include <random>

#include "artdet/detector.hpp"
#include "artdet/evaluation.hpp"
#include "artdet/layers.hpp"
#include "artdet/roi_pool.hpp"
#include "artdet/selective_search.hpp"
#include "artdet/synth.hpp"

using namespace artdet;

namespace {

Tensor random_tensor(Shape s, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> n;
  Tensor t(s);
  for (auto& v : t.data()) v = n(rng);
  return t;
}

std::vector<BBox> random_boxes(int n, double extent, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> p(0, extent * 0.8), s(8, extent * 0.5);
  std::vector<BBox> out;
  for (int i = 0; i < n; ++i) {
    const double x = p(rng), y = p(rng);
    out.push_back({x, y, std::min(extent, x + s(rng)), std::min(extent, y + s(rng))});
  }
  return out;
}

void BM_ConvForward(benchmark::State& state) {
  const int size = static_cast<int>(state.range(0));
  const LayerSpec conv = LayerSpec::conv("conv", 32, 3, 1, 1);
  const Shape in_shape{1, 16, size, size};
  LayerParams<float> p{random_tensor(conv.weight_shape(in_shape), 1),
                       random_tensor(conv.bias_shape(), 2)};
  const Tensor in = random_tensor(in_shape, 3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(layer_forward<float>(conv, p, in, false, nullptr, nullptr));
  }
}
BENCHMARK(BM_ConvForward)->Arg(32)->Arg(64);

void BM_RoiPoolForward(benchmark::State& state) {
  const Tensor map = random_tensor({1, 32, 32, 32}, 4);
  const auto rois = random_boxes(static_cast<int>(state.range(0)), 128, 5);
  const RoiPoolConfig cfg{6, 6, 0.25};
  for (auto _ : state) benchmark::DoNotOptimize(roi_pool_forward<float>(map, rois, cfg));
}
BENCHMARK(BM_RoiPoolForward)->Arg(64)->Arg(2000);

void BM_SelectiveSearch(benchmark::State& state) {
  SynthConfig sc;
  const Image img = render_synthetic(sc, "test", 0).image;
  SelectiveSearchParams p = state.range(0) ? diversified_proposals() : SelectiveSearchParams{};
  for (auto _ : state) benchmark::DoNotOptimize(selective_search(img, p));
}
BENCHMARK(BM_SelectiveSearch)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_Nms(benchmark::State& state) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> sc(0, 1);
  std::vector<Detection> dets;
  for (const auto& b : random_boxes(static_cast<int>(state.range(0)), 128, 7)) {
    dets.push_back({"img", b, sc(rng)});
  }
  for (auto _ : state) benchmark::DoNotOptimize(nms(dets, 0.3));
}
BENCHMARK(BM_Nms)->Arg(100)->Arg(2000);

void BM_AveragePrecision(benchmark::State& state) {
  const int images = static_cast<int>(state.range(0));
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> sc(0, 1);
  std::vector<Annotation> gts;
  std::vector<Detection> dets;
  for (int i = 0; i < images; ++i) {
    const std::string id = "im" + std::to_string(i);
    for (const auto& b : random_boxes(3, 128, 100 + i)) gts.push_back({id, b});
    for (const auto& b : random_boxes(20, 128, 10000 + i)) dets.push_back({id, b, sc(rng)});
  }
  for (auto _ : state) {
    const auto m = match_detections(dets, gts);
    benchmark::DoNotOptimize(average_precision(m, ApMode::continuous));
  }
}
BENCHMARK(BM_AveragePrecision)->Arg(50)->Arg(500);

}  // namespace

BENCHMARK_MAIN();
