#pragma once

#include <span>

#include "artdet/geometry.hpp"
#include "artdet/sampling.hpp"
#include "artdet/tensor.hpp"

namespace artdet {

// Logit channel layout of the score head.
inline constexpr int kBackgroundLogit = 0;
inline constexpr int kPersonLogit = 1;

double smooth_l1(double x);
double smooth_l1_grad(double x);

template <typename T>
struct DetectionLoss {
  double total = 0;
  double classification = 0;
  double regression = 0;
  BasicTensor<T> score_grad;  // (N,2,1,1)
  BasicTensor<T> bbox_grad;   // (N,4,1,1)
};

// Mean two-class log loss over all ROIs plus bbox_weight times the mean,
// over positive ROIs, of the smooth-L1 residual summed over the four deltas.
// `targets` is indexed like `labels`; entries of negatives are ignored.
template <typename T>
DetectionLoss<T> detection_loss(const BasicTensor<T>& score_logits,
                                const BasicTensor<T>& bbox_pred,
                                std::span<const RoiLabel> labels,
                                std::span<const BBoxDelta> targets,
                                double bbox_weight = 1.0);

// Softmax person probability for each ROI.
template <typename T>
std::vector<double> person_probabilities(const BasicTensor<T>& score_logits);

}  // namespace artdet
