#include "artdet/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "artdet/errors.hpp"

namespace artdet {

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::cor: return "Cor";
    case Verdict::loc: return "Loc";
    case Verdict::bg: return "BG";
    case Verdict::ignored: return "ignored";
  }
  return "?";
}

std::string to_string(ApMode m) {
  return m == ApMode::eleven_point ? "eleven_point" : "continuous";
}

ApMode ap_mode_from_string(const std::string& s) {
  if (s == "eleven_point") return ApMode::eleven_point;
  if (s == "continuous") return ApMode::continuous;
  throw ConfigError("unknown AP mode '" + s +
                    "' (expected eleven_point or continuous)");
}

MatchResult match_detections(std::span<const Detection> dets,
                             std::span<const Annotation> gts,
                             double iou_thresh) {
  MatchResult out;
  out.detections.assign(dets.begin(), dets.end());
  std::stable_sort(out.detections.begin(), out.detections.end(),
                   detection_order);

  std::map<std::string, std::vector<int>> by_image;
  for (std::size_t i = 0; i < gts.size(); ++i) {
    by_image[gts[i].image_id].push_back(static_cast<int>(i));
    if (!gts[i].difficult) ++out.num_gt;
  }
  std::vector<bool> claimed(gts.size(), false);
  static const std::vector<int> kNone;

  for (const Detection& d : out.detections) {
    const auto it = by_image.find(d.image_id);
    const std::vector<int>& cand = it == by_image.end() ? kNone : it->second;
    int best = -1;
    double best_iou = -1;
    double max_iou = 0;
    double difficult_iou = 0;
    for (int g : cand) {
      const double o = iou(d.box, gts[g].box);
      if (gts[g].difficult) {
        difficult_iou = std::max(difficult_iou, o);
        continue;
      }
      max_iou = std::max(max_iou, o);
      if (!claimed[g] && o > best_iou) {
        best_iou = o;
        best = g;
      }
    }
    if (best >= 0 && best_iou >= iou_thresh) {
      claimed[best] = true;
      out.verdicts.push_back(Verdict::cor);
      out.matched_gt.push_back(best);
    } else if (difficult_iou >= iou_thresh) {
      out.verdicts.push_back(Verdict::ignored);
      out.matched_gt.push_back(-1);
    } else {
      out.verdicts.push_back(max_iou >= kLocIou ? Verdict::loc : Verdict::bg);
      out.matched_gt.push_back(-1);
    }
  }
  return out;
}

std::vector<PrPoint> pr_curve(std::span<const Verdict> verdicts,
                              std::span<const double> scores, int num_gt) {
  if (verdicts.size() != scores.size()) {
    throw UsageError("pr_curve: verdicts and scores differ in length");
  }
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < verdicts.size(); ++i) {
    if (verdicts[i] != Verdict::ignored) order.push_back(i);
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] > scores[b];
  });
  std::vector<PrPoint> curve;
  curve.reserve(order.size());
  int tp = 0;
  int n = 0;
  for (std::size_t i : order) {
    ++n;
    if (verdicts[i] == Verdict::cor) ++tp;
    curve.push_back({num_gt > 0 ? static_cast<double>(tp) / num_gt : 0.0,
                     static_cast<double>(tp) / n, scores[i]});
  }
  return curve;
}

double average_precision(std::span<const Verdict> verdicts,
                         std::span<const double> scores, int num_gt,
                         ApMode mode) {
  if (num_gt <= 0) {
    throw DataError("average precision is undefined without ground truth");
  }
  const std::vector<PrPoint> curve = pr_curve(verdicts, scores, num_gt);
  if (mode == ApMode::eleven_point) {
    double sum = 0;
    for (int t = 0; t <= 10; ++t) {
      const double r = t / 10.0;
      double p = 0;
      for (const PrPoint& pt : curve) {
        // Guard the 0.1 steps against rounding in t / 10.
        if (pt.recall >= r - 1e-12) p = std::max(p, pt.precision);
      }
      sum += p;
    }
    return sum / 11.0;
  }
  // Area under the precision envelope (precision made non-increasing).
  std::vector<double> env(curve.size());
  double run = 0;
  for (std::size_t i = curve.size(); i-- > 0;) {
    run = std::max(run, curve[i].precision);
    env[i] = run;
  }
  double ap = 0;
  double prev_recall = 0;
  for (std::size_t i = 0; i < curve.size(); ++i) {
    ap += (curve[i].recall - prev_recall) * env[i];
    prev_recall = curve[i].recall;
  }
  return ap;
}

double average_precision(const MatchResult& m, ApMode mode) {
  std::vector<double> scores;
  scores.reserve(m.detections.size());
  for (const auto& d : m.detections) scores.push_back(d.score);
  return average_precision(m.verdicts, scores, m.num_gt, mode);
}

std::vector<TrendPoint> detection_trend(const MatchResult& m,
                                        std::span<const int> d_values) {
  std::vector<Verdict> ranked;
  for (Verdict v : m.verdicts) {
    if (v != Verdict::ignored) ranked.push_back(v);
  }
  std::vector<TrendPoint> out;
  for (int d : d_values) {
    if (d <= 0) throw ConfigError("detection trend D values must be positive");
    TrendPoint p;
    p.requested = d;
    p.used = std::min<int>(d, static_cast<int>(ranked.size()));
    p.truncated = p.used < d;
    int c = 0, l = 0, b = 0;
    for (int i = 0; i < p.used; ++i) {
      if (ranked[i] == Verdict::cor) ++c;
      else if (ranked[i] == Verdict::loc) ++l;
      else ++b;
    }
    if (p.used > 0) {
      p.cor = static_cast<double>(c) / p.used;
      p.loc = static_cast<double>(l) / p.used;
      p.bg = static_cast<double>(b) / p.used;
    }
    out.push_back(p);
  }
  return out;
}

StyleReport per_style_report(std::span<const Detection> dets,
                             std::span<const Annotation> gts,
                             const std::map<std::string, std::string>& image_styles,
                             ApMode mode, double iou_thresh) {
  std::map<std::string, std::set<std::string>> images_of;
  for (const auto& [image, style] : image_styles) images_of[style].insert(image);
  for (const auto& g : gts) {
    if (!image_styles.contains(g.image_id) && !g.style.empty()) {
      images_of[g.style].insert(g.image_id);
    }
  }
  StyleReport report;
  for (const auto& [style, images] : images_of) {
    std::vector<Annotation> sg;
    for (const auto& g : gts) {
      if (images.contains(g.image_id)) sg.push_back(g);
    }
    std::vector<Detection> sd;
    for (const auto& d : dets) {
      if (images.contains(d.image_id)) sd.push_back(d);
    }
    const MatchResult m = match_detections(sd, sg, iou_thresh);
    if (m.num_gt == 0) {
      report.notices.push_back("style '" + style +
                               "' skipped: no non-difficult ground truth");
      continue;
    }
    report.styles.push_back({style, m.num_gt, static_cast<int>(sd.size()),
                             average_precision(m, mode)});
  }
  return report;
}

EvalReport evaluate(std::span<const Detection> dets,
                    std::span<const Annotation> gts, const EvalOptions& opts) {
  const MatchResult m = match_detections(dets, gts, opts.iou_thresh);
  EvalReport r;
  r.mode = opts.mode;
  r.num_gt = m.num_gt;
  r.num_detections = static_cast<int>(m.detections.size());
  r.num_ignored = static_cast<int>(
      std::count(m.verdicts.begin(), m.verdicts.end(), Verdict::ignored));
  r.ap = average_precision(m, opts.mode);
  std::vector<double> scores;
  for (const auto& d : m.detections) scores.push_back(d.score);
  r.curve = pr_curve(m.verdicts, scores, m.num_gt);

  r.counts_at = m.num_gt;
  const int at[] = {m.num_gt};
  const TrendPoint tp = detection_trend(m, at).front();
  r.cor = static_cast<int>(std::lround(tp.cor * tp.used));
  r.loc = static_cast<int>(std::lround(tp.loc * tp.used));
  r.bg = tp.used - r.cor - r.loc;

  std::vector<int> ds = opts.d_values;
  if (ds.empty()) {
    for (double f : {0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0}) {
      ds.push_back(std::max(1, static_cast<int>(std::lround(f * m.num_gt))));
    }
    ds.erase(std::unique(ds.begin(), ds.end()), ds.end());
  }
  r.trend = detection_trend(m, ds);
  r.per_style = per_style_report(dets, gts, opts.image_styles, opts.mode,
                                 opts.iou_thresh);
  return r;
}

}  // namespace artdet
