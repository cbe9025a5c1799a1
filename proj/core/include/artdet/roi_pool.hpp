#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "artdet/geometry.hpp"
#include "artdet/tensor.hpp"

namespace artdet {

// Max pooling of an ROI over a uniform H x W grid of cells.
// grid_h = grid_w = 1 is the single-cell (global max) variant.
struct RoiPoolConfig {
  int grid_h = 6;
  int grid_w = 6;
  double spatial_scale = 1.0;  // feature-map pixels per image pixel

  static RoiPoolConfig single_cell(double spatial_scale) {
    return {1, 1, spatial_scale};
  }
  [[nodiscard]] bool is_single_cell() const {
    return grid_h == 1 && grid_w == 1;
  }
  void validate() const;

  friend bool operator==(const RoiPoolConfig&, const RoiPoolConfig&) = default;
};

// ROI quantised to feature-map cells: rows [y0, y0+h), cols [x0, x0+w).
struct RoiWindow {
  int y0 = 0;
  int x0 = 0;
  int h = 0;
  int w = 0;
  friend bool operator==(const RoiWindow&, const RoiWindow&) = default;
};

// Scales by spatial_scale, rounds half up, clips to the map and widens empty
// extents to one cell. Throws DataError when the scaled ROI does not touch
// the map at all.
RoiWindow quantize_roi(const BBox& roi, const RoiPoolConfig& cfg, int map_h,
                       int map_w);

// Half-open row (or column) span of cell `i` of `cells` over an extent `len`.
inline std::pair<int, int> cell_span(int i, int len, int cells) {
  return {i * len / cells, (i + 1) * len / cells};
}

// Forward state needed by backward: feature extents and the flat feature
// index that won each output (-1 for empty cells).
struct RoiPoolState {
  Shape feature_shape;
  int num_rois = 0;
  int output_dims = 0;
  std::vector<std::int64_t> argmax;
};

template <typename T>
struct RoiPoolOutput {
  BasicTensor<T> pooled;  // (R, C*H*W, 1, 1), channel-major then cell order
  RoiPoolState state;
};

// features must have batch size 1.
template <typename T>
RoiPoolOutput<T> roi_pool_forward(const BasicTensor<T>& features,
                                  std::span<const BBox> rois,
                                  const RoiPoolConfig& cfg);

// Routes each upstream value to its cell's argmax and accumulates.
template <typename T>
BasicTensor<T> roi_pool_backward(const RoiPoolState& state,
                                 const BasicTensor<T>& upstream);

}  // namespace artdet
