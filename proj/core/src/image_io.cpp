#include "s4al/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

#include "s4al/errors.hpp"

namespace s4al {
namespace {

void write_png(const std::filesystem::path& path, int height, int width, png_uint_32 format,
               const std::uint8_t* data) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(width);
  image.height = static_cast<png_uint_32>(height);
  image.format = format;
  if (!png_image_write_to_file(&image, path.c_str(), 0, data, 0, nullptr)) {
    throw DataError("cannot write PNG " + path.string() + ": " + image.message);
  }
}

std::vector<std::uint8_t> read_png(const std::filesystem::path& path, png_uint_32 format, int& height,
                                   int& width) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw DataError("cannot read PNG " + path.string() + ": " + image.message);
  }
  image.format = format;
  std::vector<std::uint8_t> buffer(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
    png_image_free(&image);
    throw DataError("cannot decode PNG " + path.string() + ": " + image.message);
  }
  height = static_cast<int>(image.height);
  width = static_cast<int>(image.width);
  return buffer;
}

}  // namespace

void write_png_rgb(const std::filesystem::path& path, const SceneImage& image) {
  if (image.channels != 3) throw DataError("write_png_rgb: expected 3 channels");
  std::vector<std::uint8_t> bytes(image.values.size());
  std::transform(image.values.begin(), image.values.end(), bytes.begin(), [](double v) {
    return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
  });
  write_png(path, image.height, image.width, PNG_FORMAT_RGB, bytes.data());
}

SceneImage read_png_rgb(const std::filesystem::path& path) {
  int h = 0, w = 0;
  auto bytes = read_png(path, PNG_FORMAT_RGB, h, w);
  SceneImage out(h, w, 3);
  std::transform(bytes.begin(), bytes.end(), out.values.begin(),
                 [](std::uint8_t b) { return b / 255.0; });
  return out;
}

void write_png_gray(const std::filesystem::path& path, int height, int width,
                    const std::vector<std::uint8_t>& values) {
  if (values.size() != static_cast<std::size_t>(height) * width)
    throw DataError("write_png_gray: size mismatch");
  write_png(path, height, width, PNG_FORMAT_GRAY, values.data());
}

void write_png_gray(const std::filesystem::path& path, const LabelMap& labels) {
  write_png_gray(path, labels.height, labels.width, labels.labels);
}

LabelMap read_png_gray(const std::filesystem::path& path) {
  int h = 0, w = 0;
  auto bytes = read_png(path, PNG_FORMAT_GRAY, h, w);
  LabelMap out(h, w);
  out.labels = std::move(bytes);
  return out;
}

}  // namespace s4al
