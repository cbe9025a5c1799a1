#include <random>

#include "artdet/evaluation.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace artdet;

namespace {

Annotation gt(const std::string& img, BBox b, bool difficult = false, std::string style = "s") {
  return {img, b, difficult, std::move(style)};
}

// The hand-worked fixture: 2 gts, detections Cor .9, FP .8, Cor .7.
struct Fixture {
  std::vector<Annotation> gts{gt("a", {0, 0, 10, 10}), gt("a", {50, 50, 60, 60})};
  std::vector<Detection> dets{{"a", {0, 0, 10, 10}, 0.9},
                              {"a", {100, 100, 110, 110}, 0.8},
                              {"a", {50, 50, 60, 60}, 0.7}};
};

}  // namespace

TEST_CASE("verdict thresholds") {
  const std::vector<Annotation> gts{gt("a", {0, 0, 10, 10})};
  auto verdict = [&](BBox b) {
    const std::vector<Detection> d{{"a", b, 0.5}};
    return match_detections(d, gts).verdicts.at(0);
  };
  CHECK(verdict({0, 0, 10, 6}) == Verdict::cor);   // 0.6
  CHECK(verdict({0, 0, 10, 3}) == Verdict::loc);   // 0.3
  CHECK(verdict({0, 0, 10, 0.5}) == Verdict::bg);  // 0.05
  CHECK(verdict({0, 0, 10, 5}) == Verdict::cor);   // exactly 0.5
  CHECK(verdict({0, 0, 10, 1}) == Verdict::loc);   // exactly 0.1
  CHECK(to_string(Verdict::cor) == "Cor");
  CHECK(to_string(Verdict::bg) == "BG");
}

TEST_CASE("duplicate detections are false and classed Loc") {
  const std::vector<Annotation> gts{gt("a", {0, 0, 10, 10})};
  const std::vector<Detection> d{{"a", {0, 0, 10, 9}, 0.6}, {"a", {0, 0, 10, 10}, 0.9}};
  const auto m = match_detections(d, gts);
  CHECK(m.detections[0].score == 0.9);
  CHECK(m.verdicts == std::vector<Verdict>{Verdict::cor, Verdict::loc});
  CHECK(m.matched_gt == std::vector<int>{0, -1});
}

TEST_CASE("a detection takes the best unclaimed gt") {
  const std::vector<Annotation> gts{gt("a", {0, 0, 10, 10}), gt("a", {0, 0, 10, 12})};
  const std::vector<Detection> d{{"a", {0, 0, 10, 10}, 0.9}, {"a", {0, 0, 10, 10}, 0.8}};
  const auto m = match_detections(d, gts);
  CHECK(m.verdicts == std::vector<Verdict>{Verdict::cor, Verdict::cor});
  CHECK(m.matched_gt == std::vector<int>{0, 1});
}

TEST_CASE("difficult gts are excluded") {
  const std::vector<Annotation> gts{gt("a", {0, 0, 10, 10}, true), gt("a", {50, 50, 60, 60})};
  const std::vector<Detection> d{{"a", {0, 0, 10, 8}, 0.9}, {"a", {50, 50, 60, 60}, 0.5}};
  const auto m = match_detections(d, gts);
  CHECK(m.num_gt == 1);
  CHECK(m.verdicts == std::vector<Verdict>{Verdict::ignored, Verdict::cor});
  CHECK(average_precision(m) == 1.0);
}

TEST_CASE("detections on other images never match") {
  const std::vector<Annotation> gts{gt("a", {0, 0, 10, 10})};
  const std::vector<Detection> d{{"b", {0, 0, 10, 10}, 0.9}};
  CHECK(match_detections(d, gts).verdicts.at(0) == Verdict::bg);
}

TEST_CASE("matching does not depend on input order") {
  std::mt19937_64 rng(3);
  Fixture f;
  f.dets.push_back({"a", {0, 0, 10, 10}, 0.9});
  const auto base = match_detections(f.dets, f.gts);
  for (int i = 0; i < 10; ++i) {
    std::shuffle(f.dets.begin(), f.dets.end(), rng);
    const auto m = match_detections(f.dets, f.gts);
    CHECK(m.detections == base.detections);
    CHECK(m.verdicts == base.verdicts);
  }
}

TEST_CASE("hand-derived AP fixture") {
  Fixture f;
  const auto m = match_detections(f.dets, f.gts);
  CHECK(average_precision(m, ApMode::continuous) == doctest::Approx(5.0 / 6.0).epsilon(1e-12));
  CHECK(average_precision(m, ApMode::eleven_point) == doctest::Approx(28.0 / 33.0).epsilon(1e-12));
}

TEST_CASE("trivial AP values") {
  const std::vector<Annotation> one{gt("a", {0, 0, 10, 10})};
  const std::vector<Detection> hit{{"a", {0, 0, 10, 10}, 0.5}};
  const auto m = match_detections(hit, one);
  CHECK(average_precision(m, ApMode::eleven_point) == 1.0);
  CHECK(average_precision(m, ApMode::continuous) == 1.0);
  const std::vector<Detection> miss{{"a", {80, 80, 90, 90}, 0.5}};
  CHECK(average_precision(match_detections(miss, one)) == 0.0);
  CHECK(average_precision(match_detections({}, one)) == 0.0);
}

TEST_CASE("AP is undefined without ground truth") {
  const std::vector<Detection> d{{"a", {0, 0, 10, 10}, 0.5}};
  CHECK_THROWS_AS(average_precision(match_detections(d, {})), DataError);
  const std::vector<Annotation> hard{gt("a", {0, 0, 10, 10}, true)};
  CHECK_THROWS_AS(average_precision(match_detections(d, hard)), DataError);
}

TEST_CASE("pr curve recall never decreases") {
  Fixture f;
  const auto m = match_detections(f.dets, f.gts);
  std::vector<double> scores;
  for (const auto& d : m.detections) scores.push_back(d.score);
  const auto curve = pr_curve(m.verdicts, scores, m.num_gt);
  REQUIRE(curve.size() == 3);
  CHECK(curve[0].recall == 0.5);
  CHECK(curve[1].precision == 0.5);
  CHECK(curve[2].recall == 1.0);
  for (std::size_t i = 1; i < curve.size(); ++i) CHECK(curve[i].recall >= curve[i - 1].recall);
}

TEST_CASE("AP matches the brute-force reference") {
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<int> nimg(1, 4), ngt(0, 3), ndet(0, 8), coarse(0, 4);
  std::uniform_real_distribution<double> pos(0, 30), size(4, 20), jitter(-4, 4);
  std::bernoulli_distribution hard(0.15), near(0.6);
  int done = 0;
  while (done < 100) {
    std::vector<Annotation> gts;
    std::vector<Detection> dets;
    const int images = nimg(rng);
    for (int i = 0; i < images; ++i) {
      const std::string id = "im" + std::to_string(i);
      const int g = ngt(rng);
      for (int k = 0; k < g; ++k) {
        const double x = pos(rng), y = pos(rng);
        gts.push_back(gt(id, {x, y, x + size(rng), y + size(rng)}, hard(rng)));
      }
      const int d = ndet(rng);
      for (int k = 0; k < d; ++k) {
        BBox b;
        if (g > 0 && near(rng)) {
          const BBox& t = gts[gts.size() - 1 - (k % g)].box;
          b = {t.x1 + jitter(rng), t.y1 + jitter(rng), t.x2 + jitter(rng), t.y2 + jitter(rng)};
          if (!b.valid()) b = t;
        } else {
          const double x = pos(rng), y = pos(rng);
          b = {x, y, x + size(rng), y + size(rng)};
        }
        dets.push_back({id, b, coarse(rng) / 4.0});
      }
    }
    const auto m = match_detections(dets, gts);
    if (m.num_gt == 0) continue;
    auto sorted = dets;
    std::sort(sorted.begin(), sorted.end(), oracle::better);
    const auto ref = oracle::match(sorted, gts);
    for (const bool eleven : {true, false}) {
      const double want = oracle::ap(ref, m.num_gt, eleven);
      const double got = average_precision(m, eleven ? ApMode::eleven_point : ApMode::continuous);
      CHECK(std::abs(got - want) < 1e-9);
    }
    ++done;
  }
}

TEST_CASE("AP monotonicity properties") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> sc(0.05, 1.0);
  for (int t = 0; t < 50; ++t) {
    std::vector<Annotation> gts;
    std::vector<Detection> dets;
    for (int i = 0; i < 4; ++i) {
      const double x = 40.0 * i;
      gts.push_back(gt("a", {x, 0, x + 20, 20}));
      if (sc(rng) < 0.6) dets.push_back({"a", {x, 0, x + 20, 18}, sc(rng)});
      if (sc(rng) < 0.5) dets.push_back({"a", {x, 100, x + 20, 120}, sc(rng)});
    }
    for (const ApMode mode : {ApMode::eleven_point, ApMode::continuous}) {
      const double base = average_precision(match_detections(dets, gts), mode);
      CHECK(base >= 0.0);
      CHECK(base <= 1.0);
      auto with_fp = dets;
      with_fp.push_back({"a", {500, 500, 510, 510}, 0.01});
      CHECK(average_precision(match_detections(with_fp, gts), mode) <= base + 1e-15);
    }
    // A new correct detection for a gt nobody found, at any score.
    const auto base_m = match_detections(dets, gts);
    int free_gt = -1;
    for (int g = 0; g < 4; ++g) {
      if (std::find(base_m.matched_gt.begin(), base_m.matched_gt.end(), g) == base_m.matched_gt.end()) {
        free_gt = g;
        break;
      }
    }
    if (free_gt < 0) continue;
    auto with_tp = dets;
    with_tp.push_back({"a", gts[free_gt].box, sc(rng)});
    CHECK(average_precision(match_detections(with_tp, gts), ApMode::continuous) >=
          average_precision(base_m, ApMode::continuous) - 1e-15);
  }
}

TEST_CASE("detection trend") {
  const std::vector<Annotation> gts{gt("a", {0, 0, 10, 10}), gt("a", {50, 50, 60, 60})};
  const std::vector<Detection> dets{{"a", {0, 0, 10, 10}, 0.9},
                                    {"a", {50, 50, 60, 60}, 0.8},
                                    {"a", {0, 0, 10, 3}, 0.7},
                                    {"a", {200, 200, 210, 210}, 0.6}};
  const auto m = match_detections(dets, gts);
  const std::vector<int> ds{1, 4, 9};
  const auto tr = detection_trend(m, ds);
  CHECK(tr[0].cor == 1.0);
  CHECK(tr[1].cor == 0.5);
  CHECK(tr[1].loc == 0.25);
  CHECK(tr[1].bg == 0.25);
  CHECK_FALSE(tr[1].truncated);
  CHECK(tr[2].truncated);
  CHECK(tr[2].used == 4);
  for (const auto& p : tr) CHECK(p.cor + p.loc + p.bg == doctest::Approx(1.0));
  const std::vector<int> bad{0};
  CHECK_THROWS_AS(detection_trend(m, bad), ConfigError);
}

TEST_CASE("per-style AP") {
  const std::vector<Annotation> gts{gt("a", {0, 0, 10, 10}, false, "filled"),
                                    gt("b", {0, 0, 10, 10}, false, "outline"),
                                    gt("c", {0, 0, 10, 10}, true, "noisy")};
  const std::vector<Detection> dets{{"a", {0, 0, 10, 10}, 0.9}};
  const auto r = per_style_report(dets, gts);
  REQUIRE(r.styles.size() == 2);
  CHECK(r.styles[0].style == "filled");
  CHECK(r.styles[0].ap == 1.0);
  CHECK(r.styles[1].style == "outline");
  CHECK(r.styles[1].ap == 0.0);
  REQUIRE(r.notices.size() == 1);
  CHECK(r.notices[0].find("noisy") != std::string::npos);

  const std::vector<Annotation> single{gt("a", {0, 0, 10, 10}), gt("a", {20, 0, 30, 10})};
  const auto one = per_style_report(dets, single);
  REQUIRE(one.styles.size() == 1);
  CHECK(one.styles[0].ap == average_precision(match_detections(dets, single)));
}

TEST_CASE("evaluate assembles a consistent report") {
  Fixture f;
  EvalOptions opts;
  opts.mode = ApMode::continuous;
  const auto r = evaluate(f.dets, f.gts, opts);
  CHECK(r.ap == doctest::Approx(5.0 / 6.0));
  CHECK(r.num_gt == 2);
  CHECK(r.counts_at == 2);
  CHECK(r.cor + r.loc + r.bg == 2);
  CHECK(r.cor == 1);
  CHECK_FALSE(r.trend.empty());
  CHECK(ap_mode_from_string("continuous") == ApMode::continuous);
  CHECK_THROWS_AS(ap_mode_from_string("area"), ConfigError);
}
