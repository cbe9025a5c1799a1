#include <random>

#include "artdet/roi_pool.hpp"
#include "doctest.h"
#include "fixtures.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"

using namespace artdet;

namespace {

std::vector<double> pool(const TensorD& map, BBox roi, int h, int w, double scale = 1.0) {
  const std::vector<BBox> rois{roi};
  return roi_pool_forward<double>(map, rois, RoiPoolConfig{h, w, scale}).pooled.vec();
}

}  // namespace

TEST_CASE("2x2 grid over the whole ramp") {
  CHECK(pool(fixture::ramp4x4<double>(), {0, 0, 4, 4}, 2, 2) == std::vector<double>{6, 8, 14, 16});
}

TEST_CASE("single cell is the global max") {
  CHECK(pool(fixture::ramp4x4<double>(), {0, 0, 4, 4}, 1, 1) == std::vector<double>{16});
  CHECK(RoiPoolConfig::single_cell(0.25).is_single_cell());
}

TEST_CASE("constant maps pool to the constant") {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> g(1, 5);
  const TensorD map({1, 2, 7, 9}, 3.25);
  for (int i = 0; i < 20; ++i) {
    const int rw = g(rng), rh = g(rng);
    // no grid finer than the window, so every cell covers a pixel
    std::uniform_int_distribution<int> gh(1, rh), gw(1, rw);
    for (double v : pool(map, {1, 2, 1.0 + rw, 2.0 + rh}, gh(rng), gw(rng))) CHECK(v == 3.25);
  }
}

TEST_CASE("output length is C*H*W regardless of ROI size") {
  const TensorD map({1, 3, 10, 10}, 1.0);
  CHECK(pool(map, {0, 0, 1, 1}, 4, 5).size() == 60);
  CHECK(pool(map, {0, 0, 10, 10}, 4, 5).size() == 60);
}

TEST_CASE("cells emptied by rounding output zero") {
  // A one-cell ROI split into a 3x3 grid: only the last row/column cell is
  // non-empty under the floor rule.
  const TensorD map({1, 1, 4, 4}, 5.0);
  const auto out = pool(map, {1, 1, 2, 2}, 3, 3);
  CHECK(out == std::vector<double>{0, 0, 0, 0, 0, 0, 0, 0, 5});
}

TEST_CASE("backward routes gradient to the argmax") {
  SUBCASE("single cell") {
    const TensorD map({1, 1, 2, 2}, std::vector<double>{1, 2, 3, 4});
    const std::vector<BBox> rois{{0, 0, 2, 2}};
    const auto fwd = roi_pool_forward<double>(map, rois, RoiPoolConfig::single_cell(1.0));
    const auto g = roi_pool_backward<double>(fwd.state, TensorD({1, 1, 1, 1}, 1.0));
    CHECK(g.vec() == std::vector<double>{0, 0, 0, 1});
  }
  SUBCASE("2x2 grid") {
    const std::vector<BBox> rois{{0, 0, 4, 4}};
    const auto fwd = roi_pool_forward<double>(fixture::ramp4x4<double>(), rois, {2, 2, 1.0});
    const auto g = roi_pool_backward<double>(fwd.state, TensorD({1, 4, 1, 1}, 1.0));
    std::vector<double> want(16, 0.0);
    want[5] = want[7] = want[13] = want[15] = 1;
    CHECK(g.vec() == want);
  }
  SUBCASE("shared argmax accumulates") {
    const std::vector<BBox> rois{{0, 0, 4, 4}, {2, 2, 4, 4}};
    const auto fwd = roi_pool_forward<double>(fixture::ramp4x4<double>(), rois, RoiPoolConfig::single_cell(1.0));
    const auto g = roi_pool_backward<double>(fwd.state, TensorD({2, 1, 1, 1}, std::vector<double>{1, 2}));
    CHECK(g[15] == 3.0);
  }
  SUBCASE("shape mismatch") {
    const std::vector<BBox> rois{{0, 0, 4, 4}};
    const auto fwd = roi_pool_forward<double>(fixture::ramp4x4<double>(), rois, {2, 2, 1.0});
    CHECK_THROWS_AS(roi_pool_backward<double>(fwd.state, TensorD({1, 3, 1, 1})), ConfigError);
  }
}

TEST_CASE("ROIs entirely off the map are rejected") {
  const TensorD map({1, 1, 8, 8}, 1.0);
  try {
    pool(map, {40, 40, 60, 60}, 2, 2, 0.25);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("40") != std::string::npos);
  }
  CHECK_THROWS_AS(pool(map, {-20, -20, -4, -4}, 2, 2, 0.25), DataError);
  CHECK_NOTHROW(pool(map, {-20, -20, 2, 2}, 2, 2, 0.25));
}

TEST_CASE("bad configs") {
  CHECK_THROWS_AS(RoiPoolConfig({0, 2, 1.0}).validate(), ConfigError);
  CHECK_THROWS_AS(RoiPoolConfig({2, 2, 0.0}).validate(), ConfigError);
  const std::vector<BBox> rois{{0, 0, 1, 1}};
  CHECK_THROWS_AS(roi_pool_forward<double>(TensorD({2, 1, 4, 4}), rois, {}), ConfigError);
}

TEST_CASE("matches the brute-force oracle on random triples") {
  std::mt19937_64 rng(12);
  std::uniform_int_distribution<int> sz(1, 9), grid(1, 4), ch(1, 2);
  std::uniform_real_distribution<double> u(-2.0, 12.0);
  int checked = 0;
  while (checked < 100) {
    const TensorD map = gradcheck::random_tensor({1, ch(rng), sz(rng), sz(rng)}, rng);
    double a = u(rng), b = u(rng), c = u(rng), d = u(rng);
    const BBox roi{std::min(a, b), std::min(c, d), std::max(a, b) + 0.1, std::max(c, d) + 0.1};
    const int h = grid(rng), w = grid(rng);
    std::vector<double> got;
    try {
      got = pool(map, roi, h, w);
    } catch (const DataError&) {
      continue;
    }
    CHECK(got == oracle::roi_pool(map, roi, h, w, 1.0).values);
    ++checked;
  }
}

TEST_CASE("monotone in the feature map") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> bump(0.0, 1.0);
  for (int t = 0; t < 30; ++t) {
    TensorD map = gradcheck::random_tensor({1, 2, 8, 8}, rng);
    const BBox roi{1, 0, 7, 6};
    const auto before = pool(map, roi, 3, 2);
    for (auto& v : map.data()) v += bump(rng);
    const auto after = pool(map, roi, 3, 2);
    for (std::size_t i = 0; i < before.size(); ++i) CHECK(after[i] >= before[i]);
  }
}

TEST_CASE("single cell equals the per-channel max over the quantized window") {
  std::mt19937_64 rng(6);
  const TensorD map = gradcheck::random_tensor({1, 3, 9, 9}, rng);
  const BBox roi{2, 3, 7, 8};
  const auto out = pool(map, roi, 1, 1);
  for (int c = 0; c < 3; ++c) {
    double m = -1e300;
    for (int y = 3; y < 8; ++y)
      for (int x = 2; x < 7; ++x) m = std::max(m, map.at(0, c, y, x));
    CHECK(out[c] == m);
  }
}

TEST_CASE("finite-difference agreement") {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 10; ++i) CHECK(gradcheck::random_roi_pool(rng) < 1e-4);
}
