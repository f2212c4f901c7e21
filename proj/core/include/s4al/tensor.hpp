#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace s4al {

inline constexpr std::uint8_t kIgnoreLabel = 255;

// Row-major H x W x C grid of reals (pixel-major, channel fastest).
// A mini-batch is represented by stacking images along the height axis,
// which keeps per-pixel functions agnostic of batch structure.
struct PixelTensor {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<double> values;

  PixelTensor() = default;
  PixelTensor(int h, int w, int c, double fill = 0.0);

  std::size_t pixels() const { return static_cast<std::size_t>(height) * width; }
  std::span<double> pixel(std::size_t i) {
    return {values.data() + i * channels, static_cast<std::size_t>(channels)};
  }
  std::span<const double> pixel(std::size_t i) const {
    return {values.data() + i * channels, static_cast<std::size_t>(channels)};
  }
  double& at(int y, int x, int c) {
    return values[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  double at(int y, int x, int c) const {
    return values[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  bool same_shape(const PixelTensor& o) const {
    return height == o.height && width == o.width && channels == o.channels;
  }
};

// RGB in [0,1], 3 channels.
using SceneImage = PixelTensor;
// Raw class scores, C channels.
using LogitMap = PixelTensor;
// Per-pixel class posterior; each pixel sums to one.
using ProbMap = PixelTensor;
// Per-pixel unit-norm representation, D channels.
using EmbeddingMap = PixelTensor;

// H x W class ids; kIgnoreLabel marks pixels without supervision.
struct LabelMap {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> labels;

  LabelMap() = default;
  LabelMap(int h, int w, std::uint8_t fill = kIgnoreLabel);

  std::size_t pixels() const { return static_cast<std::size_t>(height) * width; }
  std::uint8_t& at(int y, int x) { return labels[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t at(int y, int x) const { return labels[static_cast<std::size_t>(y) * width + x]; }
  bool valid(std::size_t i) const { return labels[i] != kIgnoreLabel; }
  std::size_t valid_count() const;
};

// Effective supervision for a batch: validity is label != ignore.
using PixelLabelMask = LabelMap;

PixelTensor stack_rows(std::span<const PixelTensor> parts);
LabelMap stack_rows(std::span<const LabelMap> parts);
PixelTensor slice_rows(const PixelTensor& t, int y0, int rows);

// Per-pixel argmax; ties resolve to the lowest channel index.
LabelMap argmax_labels(const PixelTensor& t);

bool all_finite(const PixelTensor& t);

}  // namespace s4al
