#include "artdet/loss.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "artdet/errors.hpp"

namespace artdet {

double smooth_l1(double x) {
  const double a = std::abs(x);
  return a < 1.0 ? 0.5 * x * x : a - 0.5;
}

double smooth_l1_grad(double x) {
  if (x <= -1.0) return -1.0;
  if (x >= 1.0) return 1.0;
  return x;
}

template <typename T>
DetectionLoss<T> detection_loss(const BasicTensor<T>& score_logits,
                                const BasicTensor<T>& bbox_pred,
                                std::span<const RoiLabel> labels,
                                std::span<const BBoxDelta> targets,
                                double bbox_weight) {
  const int n = score_logits.shape().n;
  if (score_logits.shape() != Shape{n, 2, 1, 1} ||
      bbox_pred.shape() != Shape{n, 4, 1, 1} ||
      labels.size() != static_cast<std::size_t>(n) ||
      targets.size() != static_cast<std::size_t>(n)) {
    throw ConfigError("detection loss: expected (N,2) logits, (N,4) boxes and "
                      "N labels/targets, got " + score_logits.shape().str() +
                      " / " + bbox_pred.shape().str() + " / " +
                      std::to_string(labels.size()));
  }
  DetectionLoss<T> out;
  out.score_grad = BasicTensor<T>(score_logits.shape());
  out.bbox_grad = BasicTensor<T>(bbox_pred.shape());
  if (n == 0) return out;

  int num_pos = 0;
  for (const RoiLabel l : labels) {
    if (l != RoiLabel::positive && l != RoiLabel::negative) {
      throw DataError("ROI label " +
                      std::to_string(static_cast<int>(l)) +
                      " is neither positive nor negative");
    }
    num_pos += l == RoiLabel::positive;
  }

  double cls = 0;
  for (int i = 0; i < n; ++i) {
    const double bg = score_logits[2 * i + kBackgroundLogit];
    const double fg = score_logits[2 * i + kPersonLogit];
    const double mx = std::max(bg, fg);
    const double lse = mx + std::log(std::exp(bg - mx) + std::exp(fg - mx));
    const double p_fg = std::exp(fg - lse);
    const double p_bg = std::exp(bg - lse);
    const bool is_pos = labels[i] == RoiLabel::positive;
    cls += lse - (is_pos ? fg : bg);
    out.score_grad[2 * i + kPersonLogit] =
        static_cast<T>((p_fg - (is_pos ? 1.0 : 0.0)) / n);
    out.score_grad[2 * i + kBackgroundLogit] =
        static_cast<T>((p_bg - (is_pos ? 0.0 : 1.0)) / n);
  }
  out.classification = cls / n;

  double reg = 0;
  if (num_pos > 0) {
    const double scale = bbox_weight / num_pos;
    for (int i = 0; i < n; ++i) {
      if (labels[i] != RoiLabel::positive) continue;
      const BBoxDelta& t = targets[i];
      const double goal[4] = {t.tx, t.ty, t.tw, t.th};
      for (int k = 0; k < 4; ++k) {
        const double r = bbox_pred[4 * i + k] - goal[k];
        reg += smooth_l1(r);
        out.bbox_grad[4 * i + k] = static_cast<T>(scale * smooth_l1_grad(r));
      }
    }
    out.regression = reg / num_pos;
  }
  out.total = out.classification + bbox_weight * out.regression;
  return out;
}

template <typename T>
std::vector<double> person_probabilities(const BasicTensor<T>& score_logits) {
  const int n = score_logits.shape().n;
  std::vector<double> p(n);
  for (int i = 0; i < n; ++i) {
    const double d = static_cast<double>(score_logits[2 * i + kBackgroundLogit]) -
                     score_logits[2 * i + kPersonLogit];
    p[i] = 1.0 / (1.0 + std::exp(d));
  }
  return p;
}

template DetectionLoss<float> detection_loss(const BasicTensor<float>&,
                                             const BasicTensor<float>&,
                                             std::span<const RoiLabel>,
                                             std::span<const BBoxDelta>,
                                             double);
template DetectionLoss<double> detection_loss(const BasicTensor<double>&,
                                              const BasicTensor<double>&,
                                              std::span<const RoiLabel>,
                                              std::span<const BBoxDelta>,
                                              double);
template std::vector<double> person_probabilities(const BasicTensor<float>&);
template std::vector<double> person_probabilities(const BasicTensor<double>&);

}  // namespace artdet
