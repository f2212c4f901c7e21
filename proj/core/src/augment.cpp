#include "s4al/augment.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace s4al {

AugmentedPair hflip(const SceneImage& image, const LabelMap& labels) {
  AugmentedPair out{image, labels};
  const int w = image.width;
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < w; ++x) {
      out.labels.at(y, x) = labels.at(y, w - 1 - x);
      for (int c = 0; c < image.channels; ++c) out.image.at(y, x, c) = image.at(y, w - 1 - x, c);
    }
  }
  return out;
}

// The image is resized to round(scale * size); (offset_y, offset_x) is the
// position of the output window inside the resized image and may be negative
// (padding) when the resized image is smaller.
AugmentedPair rescale_crop(const SceneImage& image, const LabelMap& labels, double scale, int offset_y,
                           int offset_x) {
  const int h = image.height, w = image.width;
  const int sh = std::max(1, static_cast<int>(std::lround(h * scale)));
  const int sw = std::max(1, static_cast<int>(std::lround(w * scale)));
  AugmentedPair out{SceneImage(h, w, image.channels, 0.0), LabelMap(h, w, kIgnoreLabel)};
  for (int y = 0; y < h; ++y) {
    const int ry = y + offset_y;
    if (ry < 0 || ry >= sh) continue;
    const int sy = std::min(h - 1, static_cast<int>((ry + 0.5) * h / sh));
    for (int x = 0; x < w; ++x) {
      const int rx = x + offset_x;
      if (rx < 0 || rx >= sw) continue;
      const int sx = std::min(w - 1, static_cast<int>((rx + 0.5) * w / sw));
      out.labels.at(y, x) = labels.at(sy, sx);
      for (int c = 0; c < image.channels; ++c) out.image.at(y, x, c) = image.at(sy, sx, c);
    }
  }
  return out;
}

void color_jitter(SceneImage& image, double brightness, double contrast, double saturation) {
  double mean = 0.0;
  for (std::size_t i = 0; i < image.pixels(); ++i) {
    auto p = image.pixel(i);
    for (auto& v : p) v *= brightness;
    mean += 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2];
  }
  mean /= static_cast<double>(image.pixels());
  for (std::size_t i = 0; i < image.pixels(); ++i) {
    auto p = image.pixel(i);
    for (auto& v : p) v = (v - mean) * contrast + mean;
    const double gray = 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2];
    for (auto& v : p) v = std::clamp(gray + (v - gray) * saturation, 0.0, 1.0);
  }
}

void gaussian_blur(SceneImage& image, double sigma) {
  if (!(sigma > 0.0)) return;
  const int radius = std::max(1, static_cast<int>(std::ceil(2.0 * sigma)));
  std::vector<double> kernel(2 * radius + 1);
  double sum = 0.0;
  for (int k = -radius; k <= radius; ++k) sum += kernel[k + radius] = std::exp(-0.5 * k * k / (sigma * sigma));
  for (auto& k : kernel) k /= sum;

  const int h = image.height, w = image.width, ch = image.channels;
  SceneImage tmp(h, w, ch);
  // Separable passes with clamped borders.
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < ch; ++c) {
        double acc = 0.0;
        for (int k = -radius; k <= radius; ++k) acc += kernel[k + radius] * image.at(y, std::clamp(x + k, 0, w - 1), c);
        tmp.at(y, x, c) = acc;
      }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < ch; ++c) {
        double acc = 0.0;
        for (int k = -radius; k <= radius; ++k) acc += kernel[k + radius] * tmp.at(std::clamp(y + k, 0, h - 1), x, c);
        image.at(y, x, c) = acc;
      }
}

void cutout(SceneImage& image, LabelMap& labels, int top, int left, int side) {
  for (int y = std::max(0, top); y < std::min(image.height, top + side); ++y)
    for (int x = std::max(0, left); x < std::min(image.width, left + side); ++x) {
      labels.at(y, x) = kIgnoreLabel;
      for (int c = 0; c < image.channels; ++c) image.at(y, x, c) = 0.0;
    }
}

AugmentedPair augment(const SceneImage& image, const LabelMap& labels, AugmentMode mode, Rng& rng) {
  if (image.height != labels.height || image.width != labels.width)
    throw std::invalid_argument("augment: image and labels differ in size");
  const int h = image.height, w = image.width;

  const double scale = rng.uniform(0.75, 1.25);
  const int sh = std::max(1, static_cast<int>(std::lround(h * scale)));
  const int sw = std::max(1, static_cast<int>(std::lround(w * scale)));
  // Larger: crop window inside the resized image. Smaller: negative offset pads.
  auto pick_offset = [&](int resized, int size) {
    const int lo = std::min(0, resized - size), hi = std::max(0, resized - size);
    return lo + static_cast<int>(rng.index(static_cast<std::uint64_t>(hi - lo + 1)));
  };
  const int oy = pick_offset(sh, h);
  const int ox = pick_offset(sw, w);
  AugmentedPair out = rescale_crop(image, labels, scale, oy, ox);
  if (rng.bernoulli(0.5)) out = hflip(out.image, out.labels);
  if (mode == AugmentMode::weak) return out;

  const double brightness = rng.uniform(0.7, 1.3);
  const double contrast = rng.uniform(0.7, 1.3);
  const double saturation = rng.uniform(0.7, 1.3);
  color_jitter(out.image, brightness, contrast, saturation);
  if (rng.bernoulli(0.5)) gaussian_blur(out.image, rng.uniform(0.1, 1.0));
  const int side = std::min(h, w) / 4;
  const int top = static_cast<int>(rng.index(static_cast<std::uint64_t>(h - side + 1)));
  const int left = static_cast<int>(rng.index(static_cast<std::uint64_t>(w - side + 1)));
  cutout(out.image, out.labels, top, left, side);
  return out;
}

}  // namespace s4al
