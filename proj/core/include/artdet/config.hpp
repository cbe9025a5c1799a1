#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "artdet/detector.hpp"
#include "artdet/evaluation.hpp"
#include "artdet/roi_pool.hpp"
#include "artdet/selective_search.hpp"
#include "artdet/trainer.hpp"

namespace artdet {

// Everything one experiment needs. Stored as a small TOML-style text file:
// `[section]` headers, `key = value` lines, `#` comments, strings in double
// quotes, booleans true/false.
struct ExperimentConfig {
  // [data]
  std::string train_manifest;
  std::string val_manifest;
  std::string trainval_manifest;
  std::string test_manifest;
  std::string proposals_dir;  // cache; empty means <output_dir>/proposals

  // [network]
  std::string profile = "toy";
  bool single_cell = false;  // ROI pool grid 1x1 instead of the profile grid

  // [sampling] / [train]
  std::string sampling = "default";
  int rois_per_image = 64;
  double positive_fraction = 0.25;
  double bbox_weight = 1.0;
  bool add_gt_proposals = true;
  bool hflip = true;

  // [sgd]
  double learning_rate = 0.005;
  double momentum = 0.9;
  int iterations = 4000;
  int fixed_layers = 0;
  int lr_step = 0;
  double lr_gamma = 0.1;

  // [proposals]
  SelectiveSearchParams proposals = diversified_proposals();

  // [detector]
  DetectorConfig detector;

  // [eval]
  ApMode ap_mode = ApMode::eleven_point;

  std::string output_dir = "out";
  std::uint64_t seed = 1;

  // Structural checks only; file existence is checked by the runners.
  void validate() const;
  [[nodiscard]] NetworkSpec network_spec() const;
  [[nodiscard]] TrainerConfig trainer_config() const;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

ExperimentConfig parse_config(const std::string& text, const std::string& source = "config");
ExperimentConfig load_config(const std::filesystem::path& path);
std::string serialize_config(const ExperimentConfig& cfg);

// Applies one "section.key=value" style override; ConfigError when unknown.
void apply_override(ExperimentConfig& cfg, const std::string& dotted_key,
                    const std::string& value);

// Every key accepted by parse_config, as "section.key".
std::vector<std::string> config_keys();

}  // namespace artdet
