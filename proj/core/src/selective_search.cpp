#include "artdet/selective_search.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <tuple>

#include "artdet/errors.hpp"

namespace artdet {
namespace {

double histogram_intersection(const std::vector<double>& a,
                              const std::vector<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::min(a[i], b[i]);
  return std::clamp(s, 0.0, 1.0);
}

void normalize_l1(std::vector<double>& h) {
  double sum = 0;
  for (const double v : h) sum += v;
  if (sum > 0) {
    for (double& v : h) v /= sum;
  }
}

// Separable Gaussian blur (sigma 1) of all three channels, interleaved.
std::vector<double> blur_sigma1(const Image& image) {
  const int w = image.width();
  const int h = image.height();
  const std::size_t n = static_cast<std::size_t>(w) * h;
  constexpr int r = 4;
  double k[2 * r + 1];
  double sum = 0;
  for (int i = -r; i <= r; ++i) sum += k[i + r] = std::exp(-0.5 * i * i);
  for (auto& v : k) v /= sum;
  const auto at = [w](int x, int y, int c) {
    return (static_cast<std::size_t>(y) * w + x) * 3 + c;
  };
  std::vector<double> tmp(n * 3), out(n * 3);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        double acc = 0;
        for (int i = -r; i <= r; ++i) {
          acc += k[i + r] * image.channel(std::clamp(x + i, 0, w - 1), y, c);
        }
        tmp[at(x, y, c)] = acc;
      }
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        double acc = 0;
        for (int i = -r; i <= r; ++i) {
          acc += k[i + r] * tmp[at(x, std::clamp(y + i, 0, h - 1), c)];
        }
        out[at(x, y, c)] = acc;
      }
    }
  }
  return out;
}

// Per pixel, channel and orientation: the bin of the half-wave rectified
// directional derivative of the smoothed channel, scaled by the image max.
std::vector<std::uint8_t> texture_bins(const Image& image) {
  const int w = image.width();
  const int h = image.height();
  const std::vector<double> smooth = blur_sigma1(image);
  const auto px = [&](int x, int y, int c) {
    x = std::clamp(x, 0, w - 1);
    y = std::clamp(y, 0, h - 1);
    return smooth[(static_cast<std::size_t>(y) * w + x) * 3 + c];
  };
  double cosines[kTextureOrientations];
  double sines[kTextureOrientations];
  for (int o = 0; o < kTextureOrientations; ++o) {
    cosines[o] = std::cos(o * M_PI / 4.0);
    sines[o] = std::sin(o * M_PI / 4.0);
  }
  std::vector<double> resp(static_cast<std::size_t>(w) * h * 3 *
                           kTextureOrientations);
  double rmax = 0;
  std::size_t i = 0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        const double gx = 0.5 * (px(x + 1, y, c) - px(x - 1, y, c));
        const double gy = 0.5 * (px(x, y + 1, c) - px(x, y - 1, c));
        for (int o = 0; o < kTextureOrientations; ++o, ++i) {
          resp[i] = std::max(0.0, gx * cosines[o] + gy * sines[o]);
          rmax = std::max(rmax, resp[i]);
        }
      }
    }
  }
  std::vector<std::uint8_t> bins(resp.size(), 0);
  if (rmax > 0) {
    for (std::size_t j = 0; j < resp.size(); ++j) {
      bins[j] = static_cast<std::uint8_t>(std::min(
          kTextureBins - 1, static_cast<int>(resp[j] / rmax * kTextureBins)));
    }
  }
  return bins;
}

}  // namespace

double color_similarity(const Region& a, const Region& b) {
  return histogram_intersection(a.color_hist, b.color_hist);
}

double texture_similarity(const Region& a, const Region& b) {
  return histogram_intersection(a.texture_hist, b.texture_hist);
}

double size_similarity(const Region& a, const Region& b, int image_size) {
  return std::clamp(1.0 - static_cast<double>(a.size + b.size) / image_size,
                    0.0, 1.0);
}

double fill_similarity(const Region& a, const Region& b, int image_size) {
  const double bw = std::max(a.box.x2, b.box.x2) - std::min(a.box.x1, b.box.x1);
  const double bh = std::max(a.box.y2, b.box.y2) - std::min(a.box.y1, b.box.y1);
  return std::clamp(1.0 - (bw * bh - a.size - b.size) / image_size, 0.0, 1.0);
}

Region merge_regions(const Region& a, const Region& b, int new_id) {
  Region m;
  m.id = new_id;
  m.size = a.size + b.size;
  m.box = {std::min(a.box.x1, b.box.x1), std::min(a.box.y1, b.box.y1),
           std::max(a.box.x2, b.box.x2), std::max(a.box.y2, b.box.y2)};
  const double wa = static_cast<double>(a.size) / m.size;
  const double wb = static_cast<double>(b.size) / m.size;
  m.color_hist.resize(a.color_hist.size());
  for (std::size_t i = 0; i < m.color_hist.size(); ++i) {
    m.color_hist[i] = wa * a.color_hist[i] + wb * b.color_hist[i];
  }
  m.texture_hist.resize(a.texture_hist.size());
  for (std::size_t i = 0; i < m.texture_hist.size(); ++i) {
    m.texture_hist[i] = wa * a.texture_hist[i] + wb * b.texture_hist[i];
  }
  return m;
}

std::vector<Region> describe_regions(const Image& image,
                                     const Segmentation& seg) {
  const int w = image.width();
  const int h = image.height();
  if (seg.width != w || seg.height != h) {
    throw ConfigError("segmentation does not match the image size");
  }
  std::vector<Region> regions(seg.regions.size());
  for (std::size_t i = 0; i < regions.size(); ++i) {
    regions[i].id = static_cast<int>(i);
    regions[i].box = seg.regions[i].box;
    regions[i].size = seg.regions[i].size;
    regions[i].color_hist.assign(kColorHistSize, 0.0);
    regions[i].texture_hist.assign(kTextureHistSize, 0.0);
  }
  const std::vector<std::uint8_t> tex = texture_bins(image);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      Region& r = regions[seg.label(x, y)];
      const std::size_t p = static_cast<std::size_t>(y) * w + x;
      for (int c = 0; c < 3; ++c) {
        r.color_hist[c * kColorBins + image.channel(x, y, c) * kColorBins / 256] += 1;
        for (int o = 0; o < kTextureOrientations; ++o) {
          const int bin = tex[(p * 3 + c) * kTextureOrientations + o];
          r.texture_hist[(c * kTextureOrientations + o) * kTextureBins + bin] += 1;
        }
      }
    }
  }
  for (auto& r : regions) {
    normalize_l1(r.color_hist);
    normalize_l1(r.texture_hist);
  }
  return regions;
}

Hierarchy hierarchical_grouping(const Image& image, const Segmentation& seg,
                                const SimilarityTerms& terms) {
  std::vector<Region> regions = describe_regions(image, seg);
  const int image_size = image.width() * image.height();
  const int n = static_cast<int>(regions.size());

  Hierarchy out;
  out.initial_regions = n;
  for (const auto& r : regions) out.boxes.push_back(r.box);

  std::vector<std::set<int>> neighbours(n);
  for (int y = 0; y < seg.height; ++y) {
    for (int x = 0; x < seg.width; ++x) {
      const int a = seg.label(x, y);
      if (x + 1 < seg.width && seg.label(x + 1, y) != a) {
        neighbours[a].insert(seg.label(x + 1, y));
        neighbours[seg.label(x + 1, y)].insert(a);
      }
      if (y + 1 < seg.height && seg.label(x, y + 1) != a) {
        neighbours[a].insert(seg.label(x, y + 1));
        neighbours[seg.label(x, y + 1)].insert(a);
      }
    }
  }

  const auto similarity = [&](const Region& a, const Region& b) {
    double s = 0;
    if (terms.color) s += color_similarity(a, b);
    if (terms.texture) s += texture_similarity(a, b);
    if (terms.size) s += size_similarity(a, b, image_size);
    if (terms.fill) s += fill_similarity(a, b, image_size);
    return s;
  };

  // Ordered by descending similarity, then ascending (low id, high id).
  using Key = std::tuple<double, int, int>;
  std::set<Key> queue;
  std::map<std::pair<int, int>, double> pair_sim;
  const auto add_pair = [&](int a, int b) {
    if (a > b) std::swap(a, b);
    const double s = similarity(regions[a], regions[b]);
    pair_sim[{a, b}] = s;
    queue.insert({-s, a, b});
  };
  const auto remove_pair = [&](int a, int b) {
    if (a > b) std::swap(a, b);
    const auto it = pair_sim.find({a, b});
    if (it == pair_sim.end()) return;
    queue.erase({-it->second, a, b});
    pair_sim.erase(it);
  };
  for (int a = 0; a < n; ++a) {
    for (const int b : neighbours[a]) {
      if (a < b) add_pair(a, b);
    }
  }

  while (!queue.empty()) {
    const auto [neg_s, a, b] = *queue.begin();
    const int t = static_cast<int>(regions.size());
    regions.push_back(merge_regions(regions[a], regions[b], t));
    neighbours.emplace_back();
    std::set<int> joined;
    for (const int k : neighbours[a]) joined.insert(k);
    for (const int k : neighbours[b]) joined.insert(k);
    joined.erase(a);
    joined.erase(b);
    remove_pair(a, b);
    for (const int k : joined) {
      remove_pair(a, k);
      remove_pair(b, k);
      neighbours[k].erase(a);
      neighbours[k].erase(b);
      neighbours[k].insert(t);
      neighbours[t].insert(k);
    }
    neighbours[a].clear();
    neighbours[b].clear();
    for (const int k : joined) add_pair(k, t);
    out.boxes.push_back(regions[t].box);
    ++out.merges;
  }
  return out;
}

void SelectiveSearchParams::validate() const {
  segmentation.validate();
  if (diversify && (color_spaces.empty() || ks.empty())) {
    throw ConfigError("diversified selective search needs colour spaces and ks");
  }
  for (const double k : ks) {
    if (!(k > 0)) throw ConfigError("selective search k must be positive");
  }
  if (min_box_size < 0) throw ConfigError("min_box_size must be >= 0");
  if (max_proposals <= 0) throw ConfigError("max_proposals must be > 0");
}

std::vector<BBox> ProposalSet::boxes() const {
  std::vector<BBox> out;
  out.reserve(proposals.size());
  for (const auto& p : proposals) out.push_back(p.box);
  return out;
}

ProposalSet selective_search(const Image& image,
                             const SelectiveSearchParams& params,
                             const std::string& image_id) {
  params.validate();
  if (image.empty()) throw DataError("selective search on an empty image");

  std::vector<std::pair<ColorSpace, double>> strategies;
  if (params.diversify) {
    for (const ColorSpace cs : params.color_spaces) {
      for (const double k : params.ks) strategies.emplace_back(cs, k);
    }
  } else {
    strategies.emplace_back(params.color_space, params.segmentation.k);
  }

  // (level from the top of the hierarchy, strategy, creation index)
  struct Candidate {
    int level;
    int strategy;
    int index;
    BBox box;
  };
  std::vector<Candidate> candidates;
  for (std::size_t s = 0; s < strategies.size(); ++s) {
    const Image converted = convert_color(image, strategies[s].first);
    SegmentationParams seg_params = params.segmentation;
    seg_params.k = strategies[s].second;
    const Segmentation seg = segment(converted, seg_params);
    const Hierarchy hier = hierarchical_grouping(converted, seg);
    const int m = static_cast<int>(hier.boxes.size());
    for (int i = 0; i < m; ++i) {
      candidates.push_back({m - 1 - i, static_cast<int>(s), i, hier.boxes[i]});
    }
  }
  std::sort(candidates.begin(), candidates.end(),
            [](const Candidate& l, const Candidate& r) {
              return std::tie(l.level, l.strategy, l.index) <
                     std::tie(r.level, r.strategy, r.index);
            });

  ProposalSet out;
  out.image_id = image_id;
  std::set<BBox> seen;
  for (const Candidate& c : candidates) {
    if (static_cast<int>(out.proposals.size()) >= params.max_proposals) break;
    if (c.box.width() < params.min_box_size &&
        c.box.height() < params.min_box_size) {
      continue;
    }
    if (!seen.insert(c.box).second) continue;
    out.proposals.push_back(
        {c.box, static_cast<int>(out.proposals.size())});
  }
  return out;
}

double proposal_recall(std::span<const BBox> proposals,
                       std::span<const Annotation> gts, double iou_thresh) {
  if (!(iou_thresh > 0.0 && iou_thresh <= 1.0)) {
    throw ConfigError("recall IoU threshold must lie in (0, 1]");
  }
  int total = 0;
  int hit = 0;
  for (const Annotation& gt : gts) {
    if (gt.difficult) continue;
    ++total;
    for (const BBox& p : proposals) {
      if (iou(p, gt.box) >= iou_thresh) {
        ++hit;
        break;
      }
    }
  }
  return total == 0 ? 1.0 : static_cast<double>(hit) / total;
}

}  // namespace artdet
