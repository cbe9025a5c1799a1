#include "artdet/roi_pool.hpp"

#include <cmath>
#include <string>

#include "artdet/errors.hpp"

namespace artdet {
namespace {

std::string box_str(const BBox& b) {
  return "(" + std::to_string(b.x1) + "," + std::to_string(b.y1) + "," +
         std::to_string(b.x2) + "," + std::to_string(b.y2) + ")";
}

}  // namespace

void RoiPoolConfig::validate() const {
  if (grid_h < 1 || grid_w < 1) {
    throw ConfigError("ROI pooling grid must be at least 1x1");
  }
  if (!(spatial_scale > 0.0) || !std::isfinite(spatial_scale)) {
    throw ConfigError("ROI pooling spatial_scale must be positive");
  }
}

RoiWindow quantize_roi(const BBox& roi, const RoiPoolConfig& cfg, int map_h,
                       int map_w) {
  const auto round_half_up = [&](double v) {
    return static_cast<int>(std::floor(v * cfg.spatial_scale + 0.5));
  };
  const double s = cfg.spatial_scale;
  if (roi.x2 * s <= 0 || roi.y2 * s <= 0 || roi.x1 * s >= map_w ||
      roi.y1 * s >= map_h) {
    throw DataError("ROI " + box_str(roi) + " lies outside the " +
                    std::to_string(map_h) + "x" + std::to_string(map_w) +
                    " feature map");
  }
  // A sliver on the last row can round past the edge; pull it back.
  const int x1 = std::clamp(round_half_up(roi.x1), 0, map_w - 1);
  const int y1 = std::clamp(round_half_up(roi.y1), 0, map_h - 1);
  const int x2 = std::clamp(round_half_up(roi.x2), x1 + 1, map_w);
  const int y2 = std::clamp(round_half_up(roi.y2), y1 + 1, map_h);
  return {y1, x1, y2 - y1, x2 - x1};
}

template <typename T>
RoiPoolOutput<T> roi_pool_forward(const BasicTensor<T>& features,
                                  std::span<const BBox> rois,
                                  const RoiPoolConfig& cfg) {
  cfg.validate();
  const Shape fs = features.shape();
  if (fs.n != 1) {
    throw ConfigError("ROI pooling expects one feature map, got batch " +
                      std::to_string(fs.n));
  }
  const int cells = cfg.grid_h * cfg.grid_w;
  const int dims = fs.c * cells;
  const int num_rois = static_cast<int>(rois.size());

  RoiPoolOutput<T> out;
  out.pooled = BasicTensor<T>(Shape{num_rois, dims, 1, 1});
  out.state.feature_shape = fs;
  out.state.num_rois = num_rois;
  out.state.output_dims = dims;
  out.state.argmax.assign(static_cast<std::size_t>(num_rois) * dims, -1);

  for (int r = 0; r < num_rois; ++r) {
    const RoiWindow win = quantize_roi(rois[r], cfg, fs.h, fs.w);
    for (int c = 0; c < fs.c; ++c) {
      const T* plane = features.plane(0, c);
      const std::int64_t plane_base = static_cast<std::int64_t>(c) * fs.h * fs.w;
      for (int i = 0; i < cfg.grid_h; ++i) {
        const auto [ry0, ry1] = cell_span(i, win.h, cfg.grid_h);
        for (int j = 0; j < cfg.grid_w; ++j) {
          const auto [rx0, rx1] = cell_span(j, win.w, cfg.grid_w);
          const std::size_t o = static_cast<std::size_t>(r) * dims +
                                (static_cast<std::size_t>(c) * cfg.grid_h + i) *
                                    cfg.grid_w +
                                j;
          std::int64_t best = -1;
          T best_v = T{0};
          for (int y = win.y0 + ry0; y < win.y0 + ry1; ++y) {
            for (int x = win.x0 + rx0; x < win.x0 + rx1; ++x) {
              const int idx = y * fs.w + x;
              if (best < 0 || plane[idx] > best_v) {
                best_v = plane[idx];
                best = idx;
              }
            }
          }
          out.pooled[o] = best < 0 ? T{0} : best_v;
          out.state.argmax[o] = best < 0 ? -1 : plane_base + best;
        }
      }
    }
  }
  return out;
}

template <typename T>
BasicTensor<T> roi_pool_backward(const RoiPoolState& state,
                                 const BasicTensor<T>& upstream) {
  if (upstream.shape() != Shape{state.num_rois, state.output_dims, 1, 1} ||
      state.argmax.size() != upstream.size()) {
    throw ConfigError("ROI pooling backward: gradient shape " +
                      upstream.shape().str() + " does not match pooled state (" +
                      std::to_string(state.num_rois) + " ROIs x " +
                      std::to_string(state.output_dims) + ")");
  }
  BasicTensor<T> grad(state.feature_shape);
  for (std::size_t i = 0; i < upstream.size(); ++i) {
    const std::int64_t a = state.argmax[i];
    if (a >= 0) grad[static_cast<std::size_t>(a)] += upstream[i];
  }
  return grad;
}

template RoiPoolOutput<float> roi_pool_forward(const BasicTensor<float>&,
                                               std::span<const BBox>,
                                               const RoiPoolConfig&);
template RoiPoolOutput<double> roi_pool_forward(const BasicTensor<double>&,
                                                std::span<const BBox>,
                                                const RoiPoolConfig&);
template BasicTensor<float> roi_pool_backward(const RoiPoolState&,
                                              const BasicTensor<float>&);
template BasicTensor<double> roi_pool_backward(const RoiPoolState&,
                                               const BasicTensor<double>&);

}  // namespace artdet
