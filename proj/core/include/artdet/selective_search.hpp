#pragma once

#include <span>
#include <string>
#include <vector>

#include "artdet/geometry.hpp"
#include "artdet/image.hpp"
#include "artdet/segmentation.hpp"

namespace artdet {

inline constexpr int kColorBins = 25;
inline constexpr int kTextureOrientations = 8;
inline constexpr int kTextureBins = 10;
inline constexpr int kColorHistSize = kColorBins * 3;
inline constexpr int kTextureHistSize = kTextureOrientations * kTextureBins * 3;

// A region during hierarchical grouping. Both histograms are L1-normalised.
struct Region {
  int id = 0;
  BBox box;
  int size = 0;
  std::vector<double> color_hist;
  std::vector<double> texture_hist;
};

struct SimilarityTerms {
  bool color = true;
  bool texture = true;
  bool size = true;
  bool fill = true;
};

// Colour, texture, size and fill similarities, each in [0,1].
double color_similarity(const Region& a, const Region& b);
double texture_similarity(const Region& a, const Region& b);
double size_similarity(const Region& a, const Region& b, int image_size);
double fill_similarity(const Region& a, const Region& b, int image_size);

// Size-weighted histogram merge with the joint bounding box.
Region merge_regions(const Region& a, const Region& b, int new_id);

// Initial regions with histograms computed on `image` (already in the
// strategy's colour space).
std::vector<Region> describe_regions(const Image& image,
                                     const Segmentation& seg);

struct Hierarchy {
  // Creation order: every initial region, then each merged region.
  std::vector<BBox> boxes;
  int initial_regions = 0;
  int merges = 0;
};

// Repeatedly merges the most similar adjacent pair (ties: lowest id pair)
// until one region per connected group remains.
Hierarchy hierarchical_grouping(const Image& image, const Segmentation& seg,
                                const SimilarityTerms& terms = {});

struct SelectiveSearchParams {
  SegmentationParams segmentation{100.0, 20, 0.8};
  ColorSpace color_space = ColorSpace::rgb;
  // Diversified mode: every colour space in `color_spaces` times every k in
  // `ks`.
  bool diversify = false;
  std::vector<ColorSpace> color_spaces{ColorSpace::hsv, ColorSpace::lab};
  std::vector<double> ks{50, 100, 150, 300};
  int min_box_size = 20;  // boxes narrower and shorter than this are dropped
  int max_proposals = 2000;

  void validate() const;
  friend bool operator==(const SelectiveSearchParams&,
                         const SelectiveSearchParams&) = default;
};

// HSV and Lab strategies at every k; used by the experiment pipeline.
inline SelectiveSearchParams diversified_proposals() {
  SelectiveSearchParams p;
  p.diversify = true;
  return p;
}

struct Proposal {
  BBox box;
  int priority = 0;  // rank, 0 first; top of the hierarchy comes first
};

struct ProposalSet {
  std::string image_id;
  std::vector<Proposal> proposals;

  [[nodiscard]] std::vector<BBox> boxes() const;
  [[nodiscard]] std::size_t size() const { return proposals.size(); }
};

ProposalSet selective_search(const Image& image,
                             const SelectiveSearchParams& params,
                             const std::string& image_id = {});

// Fraction of non-difficult ground truths hit by some proposal at IoU >=
// iou_thresh; 1.0 when there is nothing to find.
double proposal_recall(std::span<const BBox> proposals,
                       std::span<const Annotation> gts, double iou_thresh);

}  // namespace artdet
