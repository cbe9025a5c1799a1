#include "artdet/segmentation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <tuple>

#include "artdet/errors.hpp"

namespace artdet {
namespace {

class DisjointSet {
 public:
  explicit DisjointSet(int n) : parent_(n), size_(n, 1) {
    std::iota(parent_.begin(), parent_.end(), 0);
  }
  int find(int x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  // Returns the surviving root.
  int join(int a, int b) {
    if (size_[a] < size_[b]) std::swap(a, b);
    parent_[b] = a;
    size_[a] += size_[b];
    return a;
  }
  [[nodiscard]] int size(int root) const { return size_[root]; }

 private:
  std::vector<int> parent_;
  std::vector<int> size_;
};

struct Edge {
  float w;
  int a;
  int b;
};

std::vector<float> gaussian_kernel(double sigma) {
  const int radius = static_cast<int>(std::ceil(sigma * 4.0));
  std::vector<float> k(2 * radius + 1);
  double sum = 0;
  for (int i = -radius; i <= radius; ++i) {
    const double v = std::exp(-0.5 * (i * i) / (sigma * sigma));
    k[i + radius] = static_cast<float>(v);
    sum += v;
  }
  for (auto& v : k) v = static_cast<float>(v / sum);
  return k;
}

// Separable smoothing with edge clamping, one float plane per channel.
std::vector<std::vector<float>> smoothed_planes(const Image& img,
                                                double sigma) {
  const int w = img.width();
  const int h = img.height();
  std::vector<std::vector<float>> planes(3, std::vector<float>(
                                                static_cast<std::size_t>(w) * h));
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) planes[c][y * w + x] = img.channel(x, y, c);
    }
  }
  if (sigma <= 0) return planes;
  const std::vector<float> k = gaussian_kernel(sigma);
  const int r = static_cast<int>(k.size() / 2);
  std::vector<float> tmp(static_cast<std::size_t>(w) * h);
  for (auto& p : planes) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        float acc = 0;
        for (int i = -r; i <= r; ++i) {
          acc += k[i + r] * p[y * w + std::clamp(x + i, 0, w - 1)];
        }
        tmp[y * w + x] = acc;
      }
    }
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        float acc = 0;
        for (int i = -r; i <= r; ++i) {
          acc += k[i + r] * tmp[std::clamp(y + i, 0, h - 1) * w + x];
        }
        p[y * w + x] = acc;
      }
    }
  }
  return planes;
}

double srgb_to_linear(double v) {
  return v <= 0.04045 ? v / 12.92 : std::pow((v + 0.055) / 1.055, 2.4);
}

double lab_f(double t) {
  constexpr double d = 6.0 / 29.0;
  return t > d * d * d ? std::cbrt(t) : t / (3 * d * d) + 4.0 / 29.0;
}

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

}  // namespace

void SegmentationParams::validate() const {
  if (!(k > 0)) throw ConfigError("segmentation k must be positive");
  if (min_size < 1) throw ConfigError("segmentation min_size must be >= 1");
  if (!(sigma >= 0)) throw ConfigError("segmentation sigma must be >= 0");
}

Segmentation segment(const Image& image, const SegmentationParams& params) {
  params.validate();
  const int w = image.width();
  const int h = image.height();
  if (w <= 0 || h <= 0) throw DataError("cannot segment an empty image");
  const int n = w * h;
  const auto planes = smoothed_planes(image, params.sigma);
  const auto diff = [&](int a, int b) {
    float s = 0;
    for (int c = 0; c < 3; ++c) {
      const float d = planes[c][a] - planes[c][b];
      s += d * d;
    }
    return std::sqrt(s);
  };

  std::vector<Edge> edges;
  edges.reserve(static_cast<std::size_t>(n) * 2);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int i = y * w + x;
      if (x + 1 < w) edges.push_back({diff(i, i + 1), i, i + 1});
      if (y + 1 < h) edges.push_back({diff(i, i + w), i, i + w});
    }
  }
  std::sort(edges.begin(), edges.end(), [](const Edge& l, const Edge& r) {
    return std::tie(l.w, l.a, l.b) < std::tie(r.w, r.a, r.b);
  });

  DisjointSet ds(n);
  std::vector<double> threshold(n, params.k);
  for (const Edge& e : edges) {
    int a = ds.find(e.a);
    int b = ds.find(e.b);
    if (a == b) continue;
    if (e.w <= threshold[a] && e.w <= threshold[b]) {
      const int root = ds.join(a, b);
      threshold[root] = e.w + params.k / ds.size(root);
    }
  }
  for (const Edge& e : edges) {
    const int a = ds.find(e.a);
    const int b = ds.find(e.b);
    if (a != b && (ds.size(a) < params.min_size || ds.size(b) < params.min_size)) {
      ds.join(a, b);
    }
  }

  Segmentation seg;
  seg.width = w;
  seg.height = h;
  seg.labels.assign(n, -1);
  std::vector<int> root_label(n, -1);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int i = y * w + x;
      const int root = ds.find(i);
      if (root_label[root] < 0) {
        root_label[root] = static_cast<int>(seg.regions.size());
        seg.regions.push_back({BBox{static_cast<double>(x), static_cast<double>(y),
                                    static_cast<double>(x + 1),
                                    static_cast<double>(y + 1)},
                               0});
      }
      const int label = root_label[root];
      seg.labels[i] = label;
      SegmentRegion& r = seg.regions[label];
      ++r.size;
      r.box.x1 = std::min(r.box.x1, static_cast<double>(x));
      r.box.y1 = std::min(r.box.y1, static_cast<double>(y));
      r.box.x2 = std::max(r.box.x2, static_cast<double>(x + 1));
      r.box.y2 = std::max(r.box.y2, static_cast<double>(y + 1));
    }
  }
  return seg;
}

std::string to_string(ColorSpace cs) {
  switch (cs) {
    case ColorSpace::rgb: return "rgb";
    case ColorSpace::hsv: return "hsv";
    case ColorSpace::lab: return "lab";
  }
  return "rgb";
}

ColorSpace color_space_from_string(const std::string& s) {
  if (s == "rgb") return ColorSpace::rgb;
  if (s == "hsv") return ColorSpace::hsv;
  if (s == "lab") return ColorSpace::lab;
  throw ConfigError("unknown colour space '" + s + "'");
}

Image convert_color(const Image& image, ColorSpace cs) {
  if (cs == ColorSpace::rgb) return image;
  Image out(image.width(), image.height());
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x) {
      const Rgb p = image.at(x, y);
      const double r = p.r / 255.0;
      const double g = p.g / 255.0;
      const double b = p.b / 255.0;
      if (cs == ColorSpace::hsv) {
        const double mx = std::max({r, g, b});
        const double mn = std::min({r, g, b});
        const double d = mx - mn;
        double hue = 0;
        if (d > 0) {
          if (mx == r) {
            hue = std::fmod((g - b) / d + 6.0, 6.0);
          } else if (mx == g) {
            hue = (b - r) / d + 2.0;
          } else {
            hue = (r - g) / d + 4.0;
          }
        }
        const double sat = mx > 0 ? d / mx : 0;
        out.set(x, y, {to_byte(hue / 6.0 * 255.0), to_byte(sat * 255.0),
                       to_byte(mx * 255.0)});
      } else {
        const double rl = srgb_to_linear(r);
        const double gl = srgb_to_linear(g);
        const double bl = srgb_to_linear(b);
        const double X = (0.4124 * rl + 0.3576 * gl + 0.1805 * bl) / 0.95047;
        const double Y = 0.2126 * rl + 0.7152 * gl + 0.0722 * bl;
        const double Z = (0.0193 * rl + 0.1192 * gl + 0.9505 * bl) / 1.08883;
        const double L = 116 * lab_f(Y) - 16;
        const double A = 500 * (lab_f(X) - lab_f(Y));
        const double B = 200 * (lab_f(Y) - lab_f(Z));
        out.set(x, y, {to_byte(L * 2.55), to_byte(A + 128), to_byte(B + 128)});
      }
    }
  }
  return out;
}

}  // namespace artdet
