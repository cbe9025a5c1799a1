#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "artdet/tensor.hpp"

namespace artdet {

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;
  friend bool operator==(const Rgb&, const Rgb&) = default;
};

// 8-bit RGB image, row-major, channels interleaved.
class Image {
 public:
  Image() = default;
  Image(int width, int height, Rgb fill = {});

  [[nodiscard]] int width() const { return width_; }
  [[nodiscard]] int height() const { return height_; }
  [[nodiscard]] bool empty() const { return pixels_.empty(); }

  [[nodiscard]] Rgb at(int x, int y) const {
    const std::size_t i = index(x, y);
    return {pixels_[i], pixels_[i + 1], pixels_[i + 2]};
  }
  void set(int x, int y, Rgb c) {
    const std::size_t i = index(x, y);
    pixels_[i] = c.r;
    pixels_[i + 1] = c.g;
    pixels_[i + 2] = c.b;
  }
  [[nodiscard]] std::uint8_t channel(int x, int y, int c) const {
    return pixels_[index(x, y) + c];
  }

  [[nodiscard]] const std::vector<std::uint8_t>& bytes() const {
    return pixels_;
  }
  std::vector<std::uint8_t>& bytes() { return pixels_; }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  [[nodiscard]] std::size_t index(int x, int y) const {
    return (static_cast<std::size_t>(y) * width_ + x) * 3;
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> pixels_;
};

// Throws DataError on unreadable files.
Image read_png(const std::filesystem::path& path);
void write_png(const Image& image, const std::filesystem::path& path);

Image resize_bilinear(const Image& image, int width, int height);

// Scale factor that maps the shorter side to `shorter_side` pixels.
double resize_scale(int width, int height, int shorter_side);

// (1,3,H,W) tensor with values mapped to [-1, 1].
Tensor image_to_tensor(const Image& image);

}  // namespace artdet
