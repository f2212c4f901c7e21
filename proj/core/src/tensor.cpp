#include "s4al/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace s4al {

PixelTensor::PixelTensor(int h, int w, int c, double fill)
    : height(h), width(w), channels(c),
      values(static_cast<std::size_t>(h) * w * c, fill) {}

LabelMap::LabelMap(int h, int w, std::uint8_t fill)
    : height(h), width(w), labels(static_cast<std::size_t>(h) * w, fill) {}

std::size_t LabelMap::valid_count() const {
  return static_cast<std::size_t>(
      std::count_if(labels.begin(), labels.end(), [](std::uint8_t l) { return l != kIgnoreLabel; }));
}

PixelTensor stack_rows(std::span<const PixelTensor> parts) {
  if (parts.empty()) return {};
  PixelTensor out;
  out.width = parts.front().width;
  out.channels = parts.front().channels;
  for (const auto& p : parts) {
    if (p.width != out.width || p.channels != out.channels)
      throw std::invalid_argument("stack_rows: width/channel mismatch");
    out.height += p.height;
  }
  out.values.reserve(out.pixels() * out.channels);
  for (const auto& p : parts) out.values.insert(out.values.end(), p.values.begin(), p.values.end());
  return out;
}

LabelMap stack_rows(std::span<const LabelMap> parts) {
  if (parts.empty()) return {};
  LabelMap out;
  out.width = parts.front().width;
  for (const auto& p : parts) {
    if (p.width != out.width) throw std::invalid_argument("stack_rows: width mismatch");
    out.height += p.height;
  }
  out.labels.reserve(out.pixels());
  for (const auto& p : parts) out.labels.insert(out.labels.end(), p.labels.begin(), p.labels.end());
  return out;
}

PixelTensor slice_rows(const PixelTensor& t, int y0, int rows) {
  if (y0 < 0 || rows < 0 || y0 + rows > t.height) throw std::out_of_range("slice_rows");
  PixelTensor out(rows, t.width, t.channels);
  const std::size_t stride = static_cast<std::size_t>(t.width) * t.channels;
  std::copy(t.values.begin() + y0 * stride, t.values.begin() + (y0 + rows) * stride, out.values.begin());
  return out;
}

LabelMap argmax_labels(const PixelTensor& t) {
  LabelMap out(t.height, t.width, 0);
  for (std::size_t i = 0; i < t.pixels(); ++i) {
    auto p = t.pixel(i);
    out.labels[i] = static_cast<std::uint8_t>(std::max_element(p.begin(), p.end()) - p.begin());
  }
  return out;
}

bool all_finite(const PixelTensor& t) {
  return std::all_of(t.values.begin(), t.values.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace s4al
