#pragma once

// Small shared fixtures: temporary directories, the 4x4 ramp map and tiny
// synthetic training sets.

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "artdet/selective_search.hpp"
#include "artdet/synth.hpp"
#include "artdet/tensor.hpp"
#include "artdet/trainer.hpp"

namespace fixture {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("artdet_" + tag + "_" + std::to_string(rd()));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  [[nodiscard]] const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void spit(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

// 1-channel 4x4 map holding 1..16 row by row.
template <typename T>
artdet::BasicTensor<T> ramp4x4() {
  artdet::BasicTensor<T> t({1, 1, 4, 4});
  for (int i = 0; i < 16; ++i) t[i] = static_cast<T>(i + 1);
  return t;
}

// A handful of small synthetic images prepared for training, proposals from
// single-strategy selective search.
inline std::vector<artdet::TrainingSample> tiny_training_set(int count, std::uint64_t seed = 3) {
  artdet::SynthConfig sc;
  sc.count = count;
  sc.width = 96;
  sc.height = 96;
  sc.min_person_height = 32;
  sc.max_person_height = 72;
  sc.seed = seed;
  std::vector<artdet::TrainingSample> out;
  for (const auto& s : artdet::generate_in_memory(sc, "train")) {
    const auto props = artdet::selective_search(s.image, {}).boxes();
    out.push_back(artdet::prepare_sample(s.entry.path, s.image, s.entry.boxes, props, 96));
  }
  return out;
}

}  // namespace fixture
