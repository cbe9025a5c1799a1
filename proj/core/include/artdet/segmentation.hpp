#pragma once

#include <string>
#include <vector>

#include "artdet/geometry.hpp"
#include "artdet/image.hpp"

namespace artdet {

// Graph-based segmentation parameters (Felzenszwalb-Huttenlocher).
struct SegmentationParams {
  double k = 100.0;      // merge threshold scale; larger k, larger regions
  int min_size = 20;     // components below this are merged away (pixels)
  double sigma = 0.8;    // Gaussian pre-smoothing; 0 disables it

  void validate() const;
  friend bool operator==(const SegmentationParams&,
                         const SegmentationParams&) = default;
};

struct SegmentRegion {
  BBox box;       // tight bound of the pixel set, exclusive far corner
  int size = 0;   // pixel count
};

// A partition of the image into 4-connected regions.
struct Segmentation {
  int width = 0;
  int height = 0;
  std::vector<int> labels;  // row-major region id per pixel
  std::vector<SegmentRegion> regions;

  [[nodiscard]] int label(int x, int y) const { return labels[y * width + x]; }
};

Segmentation segment(const Image& image, const SegmentationParams& params);

enum class ColorSpace { rgb, hsv, lab };
std::string to_string(ColorSpace cs);
ColorSpace color_space_from_string(const std::string& s);

// Re-encodes an RGB image in another colour space, each channel scaled to
// 0..255.
Image convert_color(const Image& image, ColorSpace cs);

}  // namespace artdet
