#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "artdet/config.hpp"
#include "artdet/dataset.hpp"
#include "artdet/detector.hpp"
#include "artdet/evaluation.hpp"
#include "artdet/image.hpp"
#include "artdet/network.hpp"
#include "artdet/trainer.hpp"

namespace artdet {

// A manifest with its images decoded and proposals attached (original image
// coordinates).
struct LoadedSplit {
  std::filesystem::path manifest_path;
  DatasetManifest manifest;
  std::vector<Image> images;
  std::vector<std::vector<BBox>> proposals;
};

// Proposals are read from `cache_dir` when present and computed (then cached)
// otherwise. An empty cache_dir disables caching.
LoadedSplit load_split(const std::filesystem::path& manifest_path,
                       const SelectiveSearchParams& params,
                       const std::filesystem::path& cache_dir, int threads = 1);

// Cache subdirectory name for a proposal configuration.
std::string proposal_fingerprint(const SelectiveSearchParams& params);

LoadedSplit merge_splits(const LoadedSplit& a, const LoadedSplit& b);

std::vector<TrainingSample> make_training_samples(const LoadedSplit& split,
                                                  int resize_shorter);

struct TrainOutcome {
  Network<float> net;
  TrainingResult result;
};

// Builds the network from cfg, trains it and, when out_dir is non-empty,
// writes checkpoint.bin and train_log.csv there.
TrainOutcome run_training(const ExperimentConfig& cfg, const LoadedSplit& train,
                          const std::filesystem::path& out_dir = {});

std::string training_log_csv(const TrainingResult& result);

std::vector<Detection> detect_split(const Network<float>& net, const LoadedSplit& split,
                                    const DetectorConfig& cfg, int threads = 1);

EvalReport evaluate_split(std::span<const Detection> dets, const LoadedSplit& split,
                          ApMode mode);

// Detections CSV plus report artifacts in out_dir.
EvalReport run_eval(const ExperimentConfig& cfg, const std::filesystem::path& checkpoint,
                    const LoadedSplit& split, const std::filesystem::path& out_dir,
                    int threads = 1);

struct MatrixAxes {
  std::vector<std::string> sampling{"default"};
  std::vector<int> fixed_layers{0};
  std::vector<bool> single_cell{false};

  [[nodiscard]] std::size_t size() const {
    return sampling.size() * fixed_layers.size() * single_cell.size();
  }
  void validate(int num_conv) const;
};

struct MatrixRow {
  std::string sampling;
  std::string negative_interval;
  std::string positive_interval;
  int fixed_layers = 0;
  bool single_cell = false;
  bool ok = false;
  double ap = 0;
  std::string error;
  bool best = false;  // best AP within its pooling group
};

struct MatrixResult {
  std::vector<MatrixRow> rows;  // sampling-major, then F, then pooling
  [[nodiscard]] const MatrixRow* best(bool single_cell) const;
};

// Trains on `train`, evaluates on `val` for every cell. Cells run on up to
// `workers` threads; the result does not depend on the worker count. A
// failing cell is recorded and the rest continue.
MatrixResult run_matrix(const ExperimentConfig& base, const MatrixAxes& axes,
                        const LoadedSplit& train, const LoadedSplit& val,
                        int workers = 1);

std::string matrix_csv(const MatrixResult& m);
std::string matrix_markdown(const MatrixResult& m);
// default vs single-cell AP for every (sampling, F) pair holding both.
std::string pooling_markdown(const MatrixResult& m);

ExperimentConfig apply_row(const ExperimentConfig& base, const MatrixRow& row);

}  // namespace artdet
