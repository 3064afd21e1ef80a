#include "occbench/image.hpp"

#include <png.h>

#include <cmath>
#include <cstring>

#include "occbench/error.hpp"

namespace occbench {

Image::Image(int width, int height, Rgb fill) : width_(width), height_(height) {
  if (width < 0 || height < 0) throw ValidationError("negative image size");
  data_.resize(static_cast<std::size_t>(width) * height * 3);
  for (std::size_t i = 0; i < data_.size(); i += 3) {
    data_[i] = fill.r;
    data_[i + 1] = fill.g;
    data_[i + 2] = fill.b;
  }
}

void sample_bilinear(const Image& image, double x, double y, double out[3]) {
  out[0] = out[1] = out[2] = 0.0;
  const double fx = std::floor(x);
  const double fy = std::floor(y);
  if (fx < -1.0 || fy < -1.0 || fx >= image.width() || fy >= image.height()) return;
  const int x0 = static_cast<int>(fx);
  const int y0 = static_cast<int>(fy);
  const double ax = x - fx;
  const double ay = y - fy;
  const double w[4] = {(1 - ax) * (1 - ay), ax * (1 - ay), (1 - ax) * ay, ax * ay};
  const int xs[4] = {x0, x0 + 1, x0, x0 + 1};
  const int ys[4] = {y0, y0, y0 + 1, y0 + 1};
  for (int k = 0; k < 4; ++k) {
    if (w[k] == 0.0 || !image.contains(xs[k], ys[k])) continue;
    for (int c = 0; c < 3; ++c) out[c] += w[k] * image.channel(xs[k], ys[k], c);
  }
}

namespace {

struct PngReader {
  png_image img{};
  PngReader() {
    std::memset(&img, 0, sizeof img);
    img.version = PNG_IMAGE_VERSION;
  }
  ~PngReader() { png_image_free(&img); }
};

std::vector<std::uint8_t> read_raw(const std::filesystem::path& path, png_uint_32 format,
                                   int& width, int& height) {
  PngReader reader;
  if (!png_image_begin_read_from_file(&reader.img, path.c_str())) {
    throw IoError("cannot read PNG " + path.string() + ": " + reader.img.message);
  }
  reader.img.format = format;
  std::vector<std::uint8_t> buffer(PNG_IMAGE_SIZE(reader.img));
  if (!png_image_finish_read(&reader.img, nullptr, buffer.data(), 0, nullptr)) {
    throw IoError("cannot decode PNG " + path.string() + ": " + reader.img.message);
  }
  width = static_cast<int>(reader.img.width);
  height = static_cast<int>(reader.img.height);
  return buffer;
}

void write_raw(const std::filesystem::path& path, int width, int height, png_uint_32 format,
               const std::uint8_t* data) {
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(width);
  img.height = static_cast<png_uint_32>(height);
  img.format = format;
  if (!png_image_write_to_file(&img, path.c_str(), 0, data, 0, nullptr)) {
    const std::string msg = img.message;
    png_image_free(&img);
    throw IoError("cannot write PNG " + path.string() + ": " + msg);
  }
}

}  // namespace

Image read_png(const std::filesystem::path& path) {
  int w = 0, h = 0;
  auto raw = read_raw(path, PNG_FORMAT_RGB, w, h);
  Image out(w, h);
  std::memcpy(out.bytes().data(), raw.data(), raw.size());
  return out;
}

RgbaImage read_png_rgba(const std::filesystem::path& path) {
  int w = 0, h = 0;
  auto raw = read_raw(path, PNG_FORMAT_RGBA, w, h);
  RgbaImage out{Image(w, h), AlphaMap(w, h)};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::uint8_t* p = &raw[(static_cast<std::size_t>(y) * w + x) * 4];
      out.rgb.set(x, y, {p[0], p[1], p[2]});
      out.alpha.at(x, y) = p[3];
    }
  }
  return out;
}

void write_png(const Image& image, const std::filesystem::path& path) {
  write_raw(path, image.width(), image.height(), PNG_FORMAT_RGB, image.bytes().data());
}

void write_png(const RgbaImage& image, const std::filesystem::path& path) {
  const int w = image.rgb.width();
  const int h = image.rgb.height();
  std::vector<std::uint8_t> raw(static_cast<std::size_t>(w) * h * 4);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      std::uint8_t* p = &raw[(static_cast<std::size_t>(y) * w + x) * 4];
      const Rgb c = image.rgb.at(x, y);
      p[0] = c.r;
      p[1] = c.g;
      p[2] = c.b;
      p[3] = image.alpha.at(x, y);
    }
  }
  write_raw(path, w, h, PNG_FORMAT_RGBA, raw.data());
}

void write_png(const AlphaMap& alpha, const std::filesystem::path& path) {
  write_raw(path, alpha.width(), alpha.height(), PNG_FORMAT_GRAY, alpha.bytes().data());
}

}  // namespace occbench
