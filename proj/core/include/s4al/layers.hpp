#pragma once

#include <span>
#include <vector>

namespace s4al::nn {

// Channel-major (C x H x W) activation used inside the network.
struct FeatureMap {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<double> values;

  FeatureMap() = default;
  FeatureMap(int c, int h, int w, double fill = 0.0)
      : channels(c), height(h), width(w), values(static_cast<std::size_t>(c) * h * w, fill) {}

  int plane() const { return height * width; }
  double* channel(int c) { return values.data() + static_cast<std::size_t>(c) * plane(); }
  const double* channel(int c) const { return values.data() + static_cast<std::size_t>(c) * plane(); }
};

int conv3x3_out_size(int in, int stride);

// 3x3 convolution, zero padding 1. `cols` receives the im2col buffer that
// the backward pass reuses. weight layout: [cout][cin][3][3].
void conv3x3_forward(const FeatureMap& in, std::span<const double> weight, std::span<const double> bias,
                     int out_channels, int stride, FeatureMap& out, std::vector<double>& cols);

// Accumulates into dweight / dbias. din may be null when the input gradient is not needed.
void conv3x3_backward(const FeatureMap& in, int stride, const std::vector<double>& cols, const FeatureMap& dout,
                      std::span<const double> weight, std::span<double> dweight, std::span<double> dbias,
                      FeatureMap* din);

// Pointwise convolution. weight layout: [cout][cin].
void conv1x1_forward(const FeatureMap& in, std::span<const double> weight, std::span<const double> bias,
                     int out_channels, FeatureMap& out);
void conv1x1_backward(const FeatureMap& in, const FeatureMap& dout, std::span<const double> weight,
                      std::span<double> dweight, std::span<double> dbias, FeatureMap* din);

// Bilinear resize with half-pixel centres (align_corners = false).
void upsample_bilinear_forward(const FeatureMap& in, int out_height, int out_width, FeatureMap& out);
// Adjoint of the forward resize; din is overwritten with the input's shape.
void upsample_bilinear_backward(const FeatureMap& dout, int in_height, int in_width, FeatureMap& din);

double silu(double x);
double silu_grad(double x);
void silu_forward(const FeatureMap& pre, FeatureMap& out);
// dpre = dout * silu'(pre), in place on dout.
void silu_backward(const FeatureMap& pre, FeatureMap& dout);

}  // namespace s4al::nn
