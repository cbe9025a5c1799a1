#include "artdet/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "artdet/errors.hpp"

namespace artdet {
namespace {

std::string format_threshold(double v) {
  char buf[32];
  if (std::abs(v * 10 - std::round(v * 10)) < 1e-12) {
    std::snprintf(buf, sizeof buf, "%.1f", v);
  } else {
    std::snprintf(buf, sizeof buf, "%g", v);
  }
  return buf;
}

}  // namespace

RoiSamplingConfig RoiSamplingConfig::preset(std::string_view name) {
  if (name == "default") return {"default", 0.1, 0.5, 0.5};
  if (name == "gap") return {"gap", 0.1, 0.4, 0.6};
  if (name == "all-neg") return {"all-neg", 0.0, 0.5, 0.5};
  if (name == "gap+all-neg") return {"gap+all-neg", 0.0, 0.4, 0.6};
  throw ConfigError("unknown ROI sampling preset '" + std::string(name) +
                    "' (expected default, gap, all-neg or gap+all-neg)");
}

const std::vector<std::string>& RoiSamplingConfig::preset_names() {
  static const std::vector<std::string> names = {"default", "gap", "all-neg",
                                                 "gap+all-neg"};
  return names;
}

RoiSamplingConfig RoiSamplingConfig::custom(double neg_lo, double neg_hi,
                                            double pos_lo) {
  RoiSamplingConfig cfg{"custom", neg_lo, neg_hi, pos_lo};
  cfg.validate();
  return cfg;
}

void RoiSamplingConfig::validate() const {
  const auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!in_unit(neg_lo) || !in_unit(neg_hi) || !in_unit(pos_lo) ||
      !(neg_lo <= neg_hi && neg_hi <= pos_lo)) {
    throw ConfigError("ROI sampling '" + name +
                      "': need 0 <= neg_lo <= neg_hi <= pos_lo <= 1");
  }
}

std::string RoiSamplingConfig::negative_interval() const {
  return "[" + format_threshold(neg_lo) + "," + format_threshold(neg_hi) + ")";
}

std::string RoiSamplingConfig::positive_interval() const {
  return "≥" + format_threshold(pos_lo);
}

RoiClass classify_roi(const BBox& roi, std::span<const Annotation> gts,
                      const RoiSamplingConfig& cfg) {
  RoiClass out;
  for (std::size_t i = 0; i < gts.size(); ++i) {
    if (gts[i].difficult) continue;
    const double o = iou(roi, gts[i].box);
    if (o > out.max_iou) {
      out.max_iou = o;
      out.gt_index = static_cast<int>(i);
    }
  }
  const double m = out.max_iou;
  if (m >= cfg.pos_lo) {
    out.kind = RoiClass::Kind::positive;
  } else {
    out.gt_index = -1;
    out.kind = (m >= cfg.neg_lo && m < cfg.neg_hi) ? RoiClass::Kind::negative
                                                   : RoiClass::Kind::discard;
  }
  return out;
}

Minibatch sample_minibatch(std::span<const BBox> proposals,
                           std::span<const Annotation> gts,
                           const RoiSamplingConfig& cfg,
                           double positive_fraction, int count,
                           std::mt19937_64& rng) {
  if (count <= 0) throw ConfigError("minibatch ROI count must be > 0");
  if (!(positive_fraction >= 0.0 && positive_fraction <= 1.0)) {
    throw ConfigError("positive fraction must lie in [0, 1]");
  }
  std::vector<LabelledRoi> pos;
  std::vector<LabelledRoi> neg;
  for (const BBox& p : proposals) {
    const RoiClass c = classify_roi(p, gts, cfg);
    if (c.kind == RoiClass::Kind::positive) {
      pos.push_back({p, RoiLabel::positive, c.gt_index,
                     encode_bbox(p, gts[c.gt_index].box)});
    } else if (c.kind == RoiClass::Kind::negative) {
      neg.push_back({p, RoiLabel::negative, -1, {}});
    }
  }
  std::shuffle(pos.begin(), pos.end(), rng);
  std::shuffle(neg.begin(), neg.end(), rng);

  const auto pos_cap =
      static_cast<std::size_t>(std::lround(positive_fraction * count));
  const std::size_t n_pos = std::min(pos.size(), pos_cap);
  const std::size_t n_neg =
      std::min(neg.size(), static_cast<std::size_t>(count) - n_pos);

  Minibatch batch;
  batch.rois.assign(pos.begin(), pos.begin() + n_pos);
  batch.rois.insert(batch.rois.end(), neg.begin(), neg.begin() + n_neg);
  batch.num_positive = static_cast<int>(n_pos);
  batch.num_negative = static_cast<int>(n_neg);
  if (batch.rois.empty()) {
    batch.warning = "no eligible ROIs among " +
                    std::to_string(proposals.size()) + " proposals";
  }
  return batch;
}

}  // namespace artdet
