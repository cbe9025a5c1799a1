#pragma once

#include <string>

namespace artdet {

// Axis-aligned box in continuous pixel coordinates; covers [x1,x2) x [y1,y2),
// so area is (x2 - x1) * (y2 - y1).
struct BBox {
  double x1 = 0;
  double y1 = 0;
  double x2 = 0;
  double y2 = 0;

  [[nodiscard]] double width() const { return x2 - x1; }
  [[nodiscard]] double height() const { return y2 - y1; }
  [[nodiscard]] double area() const { return width() * height(); }
  [[nodiscard]] double cx() const { return 0.5 * (x1 + x2); }
  [[nodiscard]] double cy() const { return 0.5 * (y1 + y2); }
  // Positive width and height, finite coordinates.
  [[nodiscard]] bool valid() const;

  friend bool operator==(const BBox&, const BBox&) = default;
  friend auto operator<=>(const BBox&, const BBox&) = default;
};

// A ground-truth person.
struct Annotation {
  std::string image_id;
  BBox box;
  bool difficult = false;
  std::string style;

  friend bool operator==(const Annotation&, const Annotation&) = default;
};

// Center shift normalised by proposal size, and log size ratio.
struct BBoxDelta {
  double tx = 0;
  double ty = 0;
  double tw = 0;
  double th = 0;

  friend bool operator==(const BBoxDelta&, const BBoxDelta&) = default;
};

// Intersection over union in [0,1]; 0 when either box is degenerate.
double iou(const BBox& a, const BBox& b);

BBoxDelta encode_bbox(const BBox& proposal, const BBox& gt);
BBox decode_bbox(const BBox& proposal, const BBoxDelta& delta);

BBox clip_box(const BBox& box, double width, double height);
BBox scale_box(const BBox& box, double factor);

}  // namespace artdet
