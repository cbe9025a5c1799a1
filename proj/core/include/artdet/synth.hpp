#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "artdet/dataset.hpp"
#include "artdet/image.hpp"

namespace artdet {

// Rendering modes that stand in for depiction styles.
const std::vector<std::string>& synth_style_names();

struct SynthConfig {
  int count = 100;
  int width = 128;
  int height = 128;
  int min_people = 1;
  int max_people = 3;
  int min_person_height = 40;
  int max_person_height = 96;
  int max_distractors = 4;
  std::vector<std::string> styles = synth_style_names();
  double occlusion_prob = 0.2;
  double difficult_prob = 0.0;
  std::uint64_t seed = 7;

  void validate() const;
  friend bool operator==(const SynthConfig&, const SynthConfig&) = default;
};

// People below this visible height, or with less than half of the figure
// visible, are marked difficult.
inline constexpr int kDifficultHeight = 15;
inline constexpr double kDifficultVisible = 0.5;

struct SynthImage {
  Image image;
  ImageEntry entry;
};

// Image `index` of a split; depends only on (cfg, split, index).
SynthImage render_synthetic(const SynthConfig& cfg, const std::string& split,
                            int index);

std::vector<SynthImage> generate_in_memory(const SynthConfig& cfg,
                                           const std::string& split);

// Writes <out_dir>/images/<split>_NNNNN.png and <out_dir>/<split>.jsonl.
// Renders on `threads` workers; output does not depend on the count.
DatasetManifest generate_synthetic(const SynthConfig& cfg, const std::string& split,
                                   const std::filesystem::path& out_dir,
                                   int threads = 1);

}  // namespace artdet
