#include "artdet/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace artdet {

bool BBox::valid() const {
  return std::isfinite(x1) && std::isfinite(y1) && std::isfinite(x2) &&
         std::isfinite(y2) && x2 > x1 && y2 > y1;
}

double iou(const BBox& a, const BBox& b) {
  const double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (iw <= 0 || ih <= 0) return 0.0;
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  if (uni <= 0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

BBoxDelta encode_bbox(const BBox& proposal, const BBox& gt) {
  const double pw = proposal.width();
  const double ph = proposal.height();
  return {(gt.cx() - proposal.cx()) / pw, (gt.cy() - proposal.cy()) / ph,
          std::log(gt.width() / pw), std::log(gt.height() / ph)};
}

BBox decode_bbox(const BBox& proposal, const BBoxDelta& d) {
  const double pw = proposal.width();
  const double ph = proposal.height();
  const double cx = proposal.cx() + d.tx * pw;
  const double cy = proposal.cy() + d.ty * ph;
  const double w = pw * std::exp(d.tw);
  const double h = ph * std::exp(d.th);
  return {cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h};
}

BBox clip_box(const BBox& b, double width, double height) {
  return {std::clamp(b.x1, 0.0, width), std::clamp(b.y1, 0.0, height),
          std::clamp(b.x2, 0.0, width), std::clamp(b.y2, 0.0, height)};
}

BBox scale_box(const BBox& b, double f) {
  return {b.x1 * f, b.y1 * f, b.x2 * f, b.y2 * f};
}

}  // namespace artdet
