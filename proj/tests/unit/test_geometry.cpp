#include <random>

#include "artdet/geometry.hpp"
#include "artdet/sampling.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace artdet;

namespace {

BBox random_box(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> p(0, 100), s(0.5, 60);
  const double x = p(rng), y = p(rng);
  return {x, y, x + s(rng), y + s(rng)};
}

std::vector<Annotation> one_gt(BBox b, bool difficult = false) {
  return {Annotation{"img", b, difficult, "s"}};
}

}  // namespace

TEST_CASE("iou examples") {
  const BBox a{0, 0, 10, 10};
  CHECK(iou(a, a) == 1.0);
  CHECK(iou(a, {20, 20, 30, 30}) == 0.0);
  CHECK(iou(a, {5, 0, 15, 10}) == doctest::Approx(1.0 / 3.0));
  CHECK(iou(a, {10, 0, 20, 10}) == 0.0);
}

TEST_CASE("iou properties over random pairs") {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 1000; ++i) {
    const BBox a = random_box(rng), b = random_box(rng);
    const double o = iou(a, b);
    CHECK(o >= 0.0);
    CHECK(o <= 1.0);
    CHECK(o == iou(b, a));
    CHECK(iou(a, a) == doctest::Approx(1.0));
    CHECK(o == doctest::Approx(oracle::box_iou(a, b)).epsilon(1e-12));
  }
}

TEST_CASE("box encoding") {
  const BBox p{0, 0, 10, 10};
  const BBoxDelta self = encode_bbox(p, p);
  CHECK(self == BBoxDelta{0, 0, 0, 0});
  CHECK(decode_bbox(p, {}) == p);
  const BBoxDelta d = encode_bbox(p, {5, 0, 15, 10});
  CHECK(d.tx == doctest::Approx(0.5));
  CHECK(d.ty == 0.0);
  CHECK(d.tw == 0.0);
  CHECK(d.th == 0.0);
}

TEST_CASE("encode/decode round trip") {
  std::mt19937_64 rng(2);
  double worst = 0;
  for (int i = 0; i < 1000; ++i) {
    const BBox p = random_box(rng), g = random_box(rng);
    const BBox r = decode_bbox(p, encode_bbox(p, g));
    worst = std::max({worst, std::abs(r.x1 - g.x1), std::abs(r.y1 - g.y1),
                      std::abs(r.x2 - g.x2), std::abs(r.y2 - g.y2)});
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("clip and scale") {
  CHECK(clip_box({-5, -5, 50, 50}, 40, 30) == BBox{0, 0, 40, 30});
  CHECK(scale_box({1, 2, 3, 4}, 2.0) == BBox{2, 4, 6, 8});
  CHECK_FALSE(BBox{0, 0, 0, 5}.valid());
  CHECK(BBox{0, 0, 1, 5}.valid());
}

TEST_CASE("presets carry the exact intervals") {
  const auto d = RoiSamplingConfig::preset("default");
  CHECK(d.negative_interval() == "[0.1,0.5)");
  CHECK(d.positive_interval() == "≥0.5");
  CHECK(RoiSamplingConfig::preset("gap").negative_interval() == "[0.1,0.4)");
  CHECK(RoiSamplingConfig::preset("gap").positive_interval() == "≥0.6");
  CHECK(RoiSamplingConfig::preset("all-neg").negative_interval() == "[0.0,0.5)");
  CHECK(RoiSamplingConfig::preset("gap+all-neg").negative_interval() == "[0.0,0.4)");
  CHECK_THROWS_AS(RoiSamplingConfig::preset("nope"), ConfigError);
  CHECK_THROWS_AS(RoiSamplingConfig::custom(0.5, 0.4, 0.6), ConfigError);
}

TEST_CASE("classification examples") {
  const BBox gt{0, 0, 100, 1};
  auto at = [&](int k) { return BBox{0, 0, static_cast<double>(k), 1}; };
  using K = RoiClass::Kind;
  CHECK(classify_roi(at(70), one_gt(gt), RoiSamplingConfig::preset("default")).kind == K::positive);
  CHECK(classify_roi(at(70), one_gt(gt), RoiSamplingConfig::preset("default")).gt_index == 0);
  CHECK(classify_roi(at(5), one_gt(gt), RoiSamplingConfig::preset("default")).kind == K::discard);
  CHECK(classify_roi(at(5), one_gt(gt), RoiSamplingConfig::preset("all-neg")).kind == K::negative);
  CHECK(classify_roi(at(50), one_gt(gt), RoiSamplingConfig::preset("gap")).kind == K::discard);
  CHECK(classify_roi(at(50), {}, RoiSamplingConfig::preset("all-neg")).kind == K::negative);
  CHECK(classify_roi(at(50), {}, RoiSamplingConfig::preset("default")).kind == K::discard);
}

TEST_CASE("difficult ground truths are invisible to classification") {
  const BBox gt{0, 0, 10, 10};
  const auto c = classify_roi(gt, one_gt(gt, true), RoiSamplingConfig::preset("all-neg"));
  CHECK(c.kind == RoiClass::Kind::negative);
  CHECK(c.max_iou == 0.0);
}

TEST_CASE("interval scan matches the oracle for every preset") {
  const BBox gt{0, 0, 100, 1};
  for (const auto& name : RoiSamplingConfig::preset_names()) {
    const auto cfg = RoiSamplingConfig::preset(name);
    for (int k = 0; k <= 100; ++k) {
      const BBox roi{0, 0, k == 0 ? 1.0 : static_cast<double>(k), 1};
      const auto gts = one_gt(k == 0 ? BBox{200, 0, 300, 1} : gt);
      const auto got = classify_roi(roi, gts, cfg).kind;
      const auto want = oracle::preset_label(name, k);
      const bool same = (got == RoiClass::Kind::positive && want == oracle::Label::positive) ||
                        (got == RoiClass::Kind::negative && want == oracle::Label::negative) ||
                        (got == RoiClass::Kind::discard && want == oracle::Label::discard);
      CHECK_MESSAGE(same, name << " at m=" << k << "/100");
    }
  }
}

namespace {

// 10 ROIs at IoU 0.8 with the gt and 90 at IoU 0.3.
std::vector<BBox> mixed_proposals() {
  std::vector<BBox> out;
  for (int i = 0; i < 10; ++i) out.push_back({0, 0, 80, 1});
  for (int i = 0; i < 90; ++i) out.push_back({0, 0, 30, 1.0 + 1e-9 * i});
  return out;
}

}  // namespace

TEST_CASE("minibatch respects the positive cap") {
  const auto gts = one_gt({0, 0, 100, 1});
  const auto props = mixed_proposals();
  std::mt19937_64 rng(3);
  const auto mb = sample_minibatch(props, gts, RoiSamplingConfig::preset("default"), 0.25, 64, rng);
  CHECK(mb.num_positive == 10);
  CHECK(mb.num_negative == 54);
  CHECK(mb.rois.size() == 64);
  for (int i = 0; i < 10; ++i) {
    CHECK(mb.rois[i].label == RoiLabel::positive);
    CHECK(mb.rois[i].target == encode_bbox(mb.rois[i].box, gts[0].box));
  }
}

TEST_CASE("minibatch with only discards is empty and warns") {
  const auto gts = one_gt({0, 0, 100, 1});
  const std::vector<BBox> props{{0, 0, 5, 1}, {0, 0, 2, 1}};
  std::mt19937_64 rng(3);
  const auto mb = sample_minibatch(props, gts, RoiSamplingConfig::preset("default"), 0.25, 64, rng);
  CHECK(mb.rois.empty());
  CHECK_FALSE(mb.warning.empty());
}

TEST_CASE("minibatch is deterministic under a seed") {
  const auto gts = one_gt({0, 0, 100, 1});
  const auto props = mixed_proposals();
  std::mt19937_64 r1(9), r2(9);
  const auto a = sample_minibatch(props, gts, RoiSamplingConfig::preset("default"), 0.25, 32, r1);
  const auto b = sample_minibatch(props, gts, RoiSamplingConfig::preset("default"), 0.25, 32, r2);
  REQUIRE(a.rois.size() == b.rois.size());
  for (std::size_t i = 0; i < a.rois.size(); ++i) CHECK(a.rois[i].box == b.rois[i].box);
}
