#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "artdet/detector.hpp"
#include "artdet/geometry.hpp"

namespace artdet {

enum class Verdict { cor, loc, bg, ignored };
std::string to_string(Verdict v);

enum class ApMode { eleven_point, continuous };
std::string to_string(ApMode m);
ApMode ap_mode_from_string(const std::string& s);

inline constexpr double kMatchIou = 0.5;
inline constexpr double kLocIou = 0.1;

struct MatchResult {
  std::vector<Detection> detections;  // canonical detection_order
  std::vector<Verdict> verdicts;      // parallel to detections
  std::vector<int> matched_gt;        // index into gts for Cor, else -1
  int num_gt = 0;                     // non-difficult ground truths
};

// Greedy matching in descending score order. A detection claims the unclaimed
// non-difficult gt of its image with the highest IoU; IoU >= iou_thresh makes
// it Cor. Otherwise a detection covering a difficult gt at >= iou_thresh is
// ignored, and the rest are false positives: Loc when the best IoU against
// any non-difficult gt is >= 0.1 (duplicates included), BG below that.
MatchResult match_detections(std::span<const Detection> dets,
                             std::span<const Annotation> gts,
                             double iou_thresh = kMatchIou);

struct PrPoint {
  double recall = 0;
  double precision = 0;
  double score = 0;
};

// Cumulative curve over the non-ignored detections, sorted by score.
std::vector<PrPoint> pr_curve(std::span<const Verdict> verdicts,
                              std::span<const double> scores, int num_gt);

// Throws DataError when num_gt is 0: AP is undefined there.
double average_precision(std::span<const Verdict> verdicts,
                         std::span<const double> scores, int num_gt,
                         ApMode mode = ApMode::eleven_point);

double average_precision(const MatchResult& m,
                         ApMode mode = ApMode::eleven_point);

struct TrendPoint {
  int requested = 0;  // D
  int used = 0;       // detections actually counted
  bool truncated = false;
  double cor = 0;
  double loc = 0;
  double bg = 0;
};

// Verdict proportions among the D best-scoring non-ignored detections.
std::vector<TrendPoint> detection_trend(const MatchResult& m,
                                        std::span<const int> d_values);

struct StyleAp {
  std::string style;
  int num_gt = 0;
  int num_detections = 0;
  double ap = 0;
};

struct StyleReport {
  std::vector<StyleAp> styles;
  std::vector<std::string> notices;  // skipped styles
};

// An image belongs to the style given in image_styles, or failing that to
// the styles of its annotations. AP per style uses only that style's images.
StyleReport per_style_report(std::span<const Detection> dets,
                             std::span<const Annotation> gts,
                             const std::map<std::string, std::string>& image_styles = {},
                             ApMode mode = ApMode::eleven_point,
                             double iou_thresh = kMatchIou);

struct EvalOptions {
  ApMode mode = ApMode::eleven_point;
  double iou_thresh = kMatchIou;
  std::vector<int> d_values;  // empty: a sweep ending at num_gt
  std::map<std::string, std::string> image_styles;
};

struct EvalReport {
  ApMode mode = ApMode::eleven_point;
  double ap = 0;
  int num_gt = 0;
  int num_detections = 0;
  int num_ignored = 0;
  std::vector<PrPoint> curve;
  int counts_at = 0;  // D used for the counts below (num_gt)
  int cor = 0;
  int loc = 0;
  int bg = 0;
  std::vector<TrendPoint> trend;
  StyleReport per_style;
  std::optional<double> proposal_recall;
};

EvalReport evaluate(std::span<const Detection> dets,
                    std::span<const Annotation> gts,
                    const EvalOptions& opts = {});

}  // namespace artdet
