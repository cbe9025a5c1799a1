#include "artdet/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "artdet/errors.hpp"
#include "artdet/loss.hpp"
#include "artdet/roi_pool.hpp"

namespace artdet {
namespace {

Image flip_image(const Image& src) {
  Image out(src.width(), src.height());
  for (int y = 0; y < src.height(); ++y) {
    for (int x = 0; x < src.width(); ++x) {
      out.set(src.width() - 1 - x, y, src.at(x, y));
    }
  }
  return out;
}

BBox flip_box(const BBox& b, double width) {
  return {width - b.x2, b.y1, width - b.x1, b.y2};
}

}  // namespace

void SgdConfig::validate(int num_conv) const {
  if (!(learning_rate > 0)) throw ConfigError("learning rate must be positive");
  if (!(momentum >= 0 && momentum < 1)) {
    throw ConfigError("momentum must lie in [0, 1)");
  }
  if (iterations < 0) throw ConfigError("iterations must be >= 0");
  if (fixed_layers < 0 || fixed_layers > num_conv) {
    throw ConfigError("fixed layers F=" + std::to_string(fixed_layers) +
                      " must lie in [0, " + std::to_string(num_conv) + "]");
  }
  if (lr_step < 0) throw ConfigError("lr_step must be >= 0");
  if (!(lr_gamma > 0)) throw ConfigError("lr_gamma must be positive");
}

double SgdConfig::rate_at(int iteration) const {
  if (lr_step <= 0) return learning_rate;
  return learning_rate * std::pow(lr_gamma, iteration / lr_step);
}

void TrainerConfig::validate(int num_conv) const {
  sgd.validate(num_conv);
  sampling.validate();
  if (rois_per_image <= 0) throw ConfigError("rois_per_image must be > 0");
  if (!(positive_fraction >= 0 && positive_fraction <= 1)) {
    throw ConfigError("positive_fraction must lie in [0, 1]");
  }
  if (!(bbox_weight >= 0)) throw ConfigError("bbox_weight must be >= 0");
}

TrainingSample prepare_sample(const std::string& image_id, const Image& image,
                              std::vector<Annotation> gts,
                              std::vector<BBox> proposals, int resize_shorter) {
  const double s = resize_scale(image.width(), image.height(), resize_shorter);
  const int w = std::max(1, static_cast<int>(std::lround(image.width() * s)));
  const int h = std::max(1, static_cast<int>(std::lround(image.height() * s)));
  TrainingSample out;
  out.image_id = image_id;
  out.image = resize_bilinear(image, w, h);
  for (auto& g : gts) g.box = scale_box(g.box, s);
  out.gts = std::move(gts);
  for (const BBox& p : proposals) {
    const BBox c = clip_box(scale_box(p, s), w, h);
    if (c.valid()) out.proposals.push_back(c);
  }
  return out;
}

TrainingResult train_network(Network<float>& net, std::span<const TrainingSample> data,
                     const TrainerConfig& cfg,
                     const std::function<void(const IterationLog&)>& on_iteration) {
  cfg.validate(net.spec().num_conv_layers());
  net.freeze_conv_layers(cfg.sgd.fixed_layers);
  TrainingResult result;
  if (cfg.sgd.iterations == 0) return result;
  if (data.empty()) throw DataError("training set is empty");

  std::mt19937_64 rng(cfg.sgd.seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t cursor = order.size();
  std::size_t consecutive_empty = 0;
  const auto start = std::chrono::steady_clock::now();

  int it = 0;
  while (it < cfg.sgd.iterations) {
    if (cursor == order.size()) {
      std::shuffle(order.begin(), order.end(), rng);
      cursor = 0;
    }
    const TrainingSample& sample = data[order[cursor++]];
    const bool flip = cfg.hflip && std::bernoulli_distribution(0.5)(rng);
    const double w = sample.image.width();

    std::vector<Annotation> gts = sample.gts;
    std::vector<BBox> proposals = sample.proposals;
    if (flip) {
      for (auto& g : gts) g.box = flip_box(g.box, w);
      for (auto& p : proposals) p = flip_box(p, w);
    }
    if (cfg.add_gt_proposals) {
      for (const auto& g : gts) {
        if (!g.difficult) proposals.push_back(g.box);
      }
    }
    const Minibatch batch =
        sample_minibatch(proposals, gts, cfg.sampling, cfg.positive_fraction,
                         cfg.rois_per_image, rng);
    if (batch.rois.empty()) {
      ++result.skipped_images;
      if (++consecutive_empty > data.size()) {
        throw DataError("no training image yields an eligible ROI under '" +
                        cfg.sampling.name + "' sampling; positives are too "
                        "sparse to train on");
      }
      continue;
    }
    consecutive_empty = 0;

    std::vector<BBox> rois;
    std::vector<RoiLabel> labels;
    std::vector<BBoxDelta> targets;
    for (const auto& r : batch.rois) {
      rois.push_back(r.box);
      labels.push_back(r.label);
      targets.push_back(r.target);
    }

    const Tensor input = image_to_tensor(flip ? flip_image(sample.image)
                                              : sample.image);
    const Tensor features = net.forward_backbone(input, true);
    const RoiPoolOutput<float> pooled =
        roi_pool_forward(features, std::span<const BBox>(rois), net.spec().pool);
    const HeadOutput<float> head = net.forward_head(pooled.pooled, true);
    const DetectionLoss<float> loss =
        detection_loss(head.scores, head.bbox, std::span<const RoiLabel>(labels),
                       std::span<const BBoxDelta>(targets), cfg.bbox_weight);
    if (!std::isfinite(loss.total)) {
      throw NumericError("non-finite loss at iteration " + std::to_string(it) +
                         " (exploding gradient)");
    }
    const Tensor pooled_grad = net.backward_head(loss.score_grad, loss.bbox_grad);
    const Tensor feature_grad = roi_pool_backward(pooled.state, pooled_grad);
    net.backward_backbone(feature_grad);
    const double lr = cfg.sgd.rate_at(it);
    net.sgd_step(lr, cfg.sgd.momentum);

    IterationLog entry;
    entry.iteration = it;
    entry.image_id = sample.image_id;
    entry.loss = loss.total;
    entry.cls_loss = loss.classification;
    entry.bbox_loss = loss.regression;
    entry.positives = batch.num_positive;
    entry.negatives = batch.num_negative;
    entry.learning_rate = lr;
    entry.seconds = std::chrono::duration<double>(
                        std::chrono::steady_clock::now() - start)
                        .count();
    if (on_iteration) on_iteration(entry);
    result.log.push_back(std::move(entry));
    ++it;
  }
  if (!net.all_params_finite()) {
    throw NumericError("parameters became non-finite during training");
  }
  return result;
}

std::vector<double> smoothed_losses(std::span<const IterationLog> log,
                                    int window) {
  std::vector<double> out;
  if (window <= 0) return out;
  double sum = 0;
  for (std::size_t i = 0; i < log.size(); ++i) {
    sum += log[i].loss;
    if (i >= static_cast<std::size_t>(window)) sum -= log[i - window].loss;
    const std::size_t n = std::min<std::size_t>(i + 1, window);
    out.push_back(sum / static_cast<double>(n));
  }
  return out;
}

}  // namespace artdet
