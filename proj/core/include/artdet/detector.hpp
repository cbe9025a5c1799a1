#pragma once

#include <span>
#include <string>
#include <vector>

#include "artdet/geometry.hpp"
#include "artdet/image.hpp"
#include "artdet/network.hpp"

namespace artdet {

struct Detection {
  std::string image_id;
  BBox box;
  double score = 0;  // person probability

  friend bool operator==(const Detection&, const Detection&) = default;
};

// Descending score; ties broken by box coordinates, then image id.
bool detection_order(const Detection& a, const Detection& b);

struct DetectorConfig {
  int resize_shorter = 128;       // network input shorter side, aspect kept
  double score_threshold = 0.01;  // keep scores strictly above
  double nms_iou = 0.3;
  int max_detections = 100;
  bool bbox_regression = true;

  void validate() const;
  friend bool operator==(const DetectorConfig&, const DetectorConfig&) = default;
};

// Greedy suppression: keep the best, drop everything overlapping it by more
// than iou_thresh, repeat. Output is in detection_order.
std::vector<Detection> nms(std::vector<Detection> dets, double iou_thresh);

// Runs the backbone once, pools every proposal (original image coordinates),
// scores and regresses them, clips to the image, thresholds, applies NMS and
// caps the count. Sorted by detection_order.
std::vector<Detection> detect(const Network<float>& net, const Image& image,
                              std::span<const BBox> proposals,
                              const DetectorConfig& cfg,
                              const std::string& image_id = {});

}  // namespace artdet
