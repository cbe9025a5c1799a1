#include "artdet/detector.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

#include "artdet/errors.hpp"
#include "artdet/loss.hpp"
#include "artdet/roi_pool.hpp"

namespace artdet {
namespace {

constexpr double kMaxLogScale = 4.0;

}  // namespace

bool detection_order(const Detection& a, const Detection& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.box != b.box) return a.box < b.box;
  return a.image_id < b.image_id;
}

void DetectorConfig::validate() const {
  if (resize_shorter <= 0) throw ConfigError("resize_shorter must be > 0");
  if (!(score_threshold >= 0.0 && score_threshold <= 1.0)) {
    throw ConfigError("score_threshold must lie in [0, 1]");
  }
  if (!(nms_iou > 0.0 && nms_iou < 1.0)) {
    throw ConfigError("nms_iou must lie in (0, 1)");
  }
  if (max_detections <= 0) throw ConfigError("max_detections must be > 0");
}

std::vector<Detection> nms(std::vector<Detection> dets, double iou_thresh) {
  std::sort(dets.begin(), dets.end(), detection_order);
  std::vector<Detection> kept;
  std::vector<bool> suppressed(dets.size(), false);
  for (std::size_t i = 0; i < dets.size(); ++i) {
    if (suppressed[i]) continue;
    kept.push_back(dets[i]);
    for (std::size_t j = i + 1; j < dets.size(); ++j) {
      if (!suppressed[j] && iou(dets[i].box, dets[j].box) > iou_thresh) {
        suppressed[j] = true;
      }
    }
  }
  return kept;
}

std::vector<Detection> detect(const Network<float>& net, const Image& image,
                              std::span<const BBox> proposals,
                              const DetectorConfig& cfg,
                              const std::string& image_id) {
  cfg.validate();
  if (image.empty()) throw DataError("detect: empty image " + image_id);
  if (proposals.empty()) return {};

  const double scale =
      resize_scale(image.width(), image.height(), cfg.resize_shorter);
  const int rw = std::max(1, static_cast<int>(std::lround(image.width() * scale)));
  const int rh = std::max(1, static_cast<int>(std::lround(image.height() * scale)));
  const Image resized = resize_bilinear(image, rw, rh);
  const Tensor features = net.infer_backbone(image_to_tensor(resized));

  std::vector<BBox> scaled;
  for (const BBox& p : proposals) {
    const BBox c = clip_box(p, image.width(), image.height());
    if (c.valid()) scaled.push_back(scale_box(c, scale));
  }
  if (scaled.empty()) return {};

  const RoiPoolOutput<float> pooled =
      roi_pool_forward(features, std::span<const BBox>(scaled), net.spec().pool);
  const HeadOutput<float> head = net.infer_head(pooled.pooled);
  const std::vector<double> probs = person_probabilities(head.scores);

  std::vector<Detection> dets;
  for (std::size_t i = 0; i < scaled.size(); ++i) {
    if (!(probs[i] > cfg.score_threshold)) continue;
    BBox box = scaled[i];
    if (cfg.bbox_regression) {
      // Log-size deltas are capped so exp() cannot overflow.
      const BBoxDelta d{head.bbox[4 * i], head.bbox[4 * i + 1],
                        std::min<double>(head.bbox[4 * i + 2], kMaxLogScale),
                        std::min<double>(head.bbox[4 * i + 3], kMaxLogScale)};
      box = decode_bbox(box, d);
    }
    box = clip_box(scale_box(box, 1.0 / scale), image.width(), image.height());
    if (!box.valid()) continue;
    dets.push_back({image_id, box, probs[i]});
  }
  dets = nms(std::move(dets), cfg.nms_iou);
  if (static_cast<int>(dets.size()) > cfg.max_detections) {
    dets.resize(cfg.max_detections);
  }
  return dets;
}

}  // namespace artdet
