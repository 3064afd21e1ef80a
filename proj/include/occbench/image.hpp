#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace occbench {

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;
  friend bool operator==(const Rgb&, const Rgb&) = default;
};

// Interleaved 8-bit RGB image. Pixel (x, y) has its center at integer
// coordinates (x, y); this convention is shared by every geometric routine.
class Image {
 public:
  Image() = default;
  Image(int width, int height, Rgb fill = {});

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return width_ == 0 || height_ == 0; }
  bool contains(int x, int y) const {
    return x >= 0 && y >= 0 && x < width_ && y < height_;
  }

  Rgb at(int x, int y) const {
    const std::uint8_t* p = &data_[index(x, y)];
    return {p[0], p[1], p[2]};
  }
  void set(int x, int y, Rgb c) {
    std::uint8_t* p = &data_[index(x, y)];
    p[0] = c.r;
    p[1] = c.g;
    p[2] = c.b;
  }
  std::uint8_t channel(int x, int y, int c) const { return data_[index(x, y) + c]; }

  std::span<const std::uint8_t> bytes() const { return data_; }
  std::span<std::uint8_t> bytes() { return data_; }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  std::size_t index(int x, int y) const {
    return (static_cast<std::size_t>(y) * width_ + x) * 3;
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> data_;
};

// Single-channel 8-bit map, used for occluder alpha and RGBA library entries.
class AlphaMap {
 public:
  AlphaMap() = default;
  AlphaMap(int width, int height, std::uint8_t fill = 0)
      : width_(width), height_(height),
        data_(static_cast<std::size_t>(width) * height, fill) {}

  int width() const { return width_; }
  int height() const { return height_; }
  std::uint8_t at(int x, int y) const { return data_[static_cast<std::size_t>(y) * width_ + x]; }
  std::uint8_t& at(int x, int y) { return data_[static_cast<std::size_t>(y) * width_ + x]; }
  std::span<const std::uint8_t> bytes() const { return data_; }

  friend bool operator==(const AlphaMap&, const AlphaMap&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> data_;
};

struct RgbaImage {
  Image rgb;
  AlphaMap alpha;
};

// Bilinear sample at a continuous position. Taps outside the image
// contribute black. Returns channel values before rounding.
void sample_bilinear(const Image& image, double x, double y, double out[3]);

Image read_png(const std::filesystem::path& path);
RgbaImage read_png_rgba(const std::filesystem::path& path);
void write_png(const Image& image, const std::filesystem::path& path);
void write_png(const RgbaImage& image, const std::filesystem::path& path);
void write_png(const AlphaMap& alpha, const std::filesystem::path& path);

}  // namespace occbench
