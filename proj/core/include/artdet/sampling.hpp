#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "artdet/geometry.hpp"

namespace artdet {

// IoU intervals that label training ROIs. With m the best IoU against a
// non-difficult ground truth:
//   m >= pos_lo           -> positive
//   neg_lo <= m < neg_hi  -> negative
//   otherwise             -> discarded
struct RoiSamplingConfig {
  std::string name = "default";
  double neg_lo = 0.1;
  double neg_hi = 0.5;
  double pos_lo = 0.5;

  // "default", "gap", "all-neg" or "gap+all-neg"; ConfigError otherwise.
  static RoiSamplingConfig preset(std::string_view name);
  static RoiSamplingConfig custom(double neg_lo, double neg_hi, double pos_lo);
  static const std::vector<std::string>& preset_names();

  void validate() const;
  // Table notation, e.g. "[0.1,0.5)" and "≥0.5".
  [[nodiscard]] std::string negative_interval() const;
  [[nodiscard]] std::string positive_interval() const;

  friend bool operator==(const RoiSamplingConfig&,
                         const RoiSamplingConfig&) = default;
};

enum class RoiLabel : std::int8_t { negative = 0, positive = 1 };

struct RoiClass {
  enum class Kind { positive, negative, discard };
  Kind kind = Kind::discard;
  int gt_index = -1;  // argmax ground truth for positives
  double max_iou = 0.0;
};

// Difficult ground truths are ignored; with no usable ground truth m = 0.
RoiClass classify_roi(const BBox& roi, std::span<const Annotation> gts,
                      const RoiSamplingConfig& cfg);

struct LabelledRoi {
  BBox box;
  RoiLabel label = RoiLabel::negative;
  int gt_index = -1;
  BBoxDelta target;  // zero for negatives
};

struct Minibatch {
  std::vector<LabelledRoi> rois;  // positives first, then negatives
  int num_positive = 0;
  int num_negative = 0;
  std::string warning;  // set when no ROI was eligible
};

// Draws up to `count` ROIs with at most round(positive_fraction * count)
// positives, padding the remainder with negatives.
Minibatch sample_minibatch(std::span<const BBox> proposals,
                           std::span<const Annotation> gts,
                           const RoiSamplingConfig& cfg,
                           double positive_fraction, int count,
                           std::mt19937_64& rng);

}  // namespace artdet
