#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "artdet/geometry.hpp"
#include "artdet/image.hpp"
#include "artdet/network.hpp"
#include "artdet/sampling.hpp"

namespace artdet {

struct SgdConfig {
  double learning_rate = 0.005;
  double momentum = 0.9;
  int iterations = 4000;
  int fixed_layers = 0;  // F: leading conv layers left untouched
  std::uint64_t seed = 1;
  int lr_step = 0;       // >0: multiply the rate by lr_gamma every lr_step its
  double lr_gamma = 0.1;

  // num_conv bounds F.
  void validate(int num_conv) const;
  [[nodiscard]] double rate_at(int iteration) const;
  friend bool operator==(const SgdConfig&, const SgdConfig&) = default;
};

struct TrainerConfig {
  SgdConfig sgd;
  RoiSamplingConfig sampling;
  int rois_per_image = 64;
  double positive_fraction = 0.25;
  double bbox_weight = 1.0;
  bool add_gt_proposals = true;  // training-time proposal augmentation
  bool hflip = true;             // random horizontal flips

  void validate(int num_conv) const;
};

// One training image at network resolution: boxes already scaled.
struct TrainingSample {
  std::string image_id;
  Image image;
  std::vector<Annotation> gts;
  std::vector<BBox> proposals;
};

// Resizes the image to the given shorter side and scales boxes to match.
TrainingSample prepare_sample(const std::string& image_id, const Image& image,
                              std::vector<Annotation> gts,
                              std::vector<BBox> proposals, int resize_shorter);

struct IterationLog {
  int iteration = 0;
  std::string image_id;
  double loss = 0;
  double cls_loss = 0;
  double bbox_loss = 0;
  int positives = 0;
  int negatives = 0;
  double learning_rate = 0;
  double seconds = 0;  // wall time since training began
};

struct TrainingResult {
  std::vector<IterationLog> log;
  int skipped_images = 0;  // images with no eligible ROI when drawn
};

// Single-threaded, deterministic given the seed. Throws NumericError on a
// non-finite loss and DataError when no image yields any eligible ROI.
TrainingResult train_network(Network<float>& net, std::span<const TrainingSample> data,
                     const TrainerConfig& cfg,
                     const std::function<void(const IterationLog&)>& on_iteration = {});

// Mean loss over a trailing window, for trend checks.
std::vector<double> smoothed_losses(std::span<const IterationLog> log,
                                    int window);

}  // namespace artdet
