#include "s4al/layers.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace s4al::nn {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;
using ConstMapVec = Eigen::Map<const Eigen::VectorXd>;

// Summation order must not depend on buffer alignment, so no Eigen reduction here.
void add_row_sums(const double* g, int rows, int cols, std::span<double> out) {
  for (int r = 0; r < rows; ++r) {
    double s = 0.0;
    for (int c = 0; c < cols; ++c) s += g[static_cast<std::size_t>(r) * cols + c];
    out[r] += s;
  }
}

struct AxisWeights {
  std::vector<int> lo, hi;
  std::vector<double> frac;
};

AxisWeights axis_weights(int in, int out) {
  AxisWeights a;
  a.lo.resize(out);
  a.hi.resize(out);
  a.frac.resize(out);
  const double scale = static_cast<double>(in) / out;
  for (int o = 0; o < out; ++o) {
    double src = (o + 0.5) * scale - 0.5;
    if (src < 0) src = 0;
    int i0 = static_cast<int>(src);
    if (i0 > in - 1) i0 = in - 1;
    a.lo[o] = i0;
    a.hi[o] = std::min(i0 + 1, in - 1);
    a.frac[o] = src - i0;
  }
  return a;
}

}  // namespace

int conv3x3_out_size(int in, int stride) { return (in - 1) / stride + 1; }

void conv3x3_forward(const FeatureMap& in, std::span<const double> weight, std::span<const double> bias,
                     int out_channels, int stride, FeatureMap& out, std::vector<double>& cols) {
  const int oh = conv3x3_out_size(in.height, stride);
  const int ow = conv3x3_out_size(in.width, stride);
  const int k = in.channels * 9;
  const int p = oh * ow;
  if (weight.size() != static_cast<std::size_t>(out_channels) * k || bias.size() != static_cast<std::size_t>(out_channels))
    throw std::invalid_argument("conv3x3_forward: parameter shape mismatch");
  cols.assign(static_cast<std::size_t>(k) * p, 0.0);
  for (int c = 0; c < in.channels; ++c) {
    const double* src = in.channel(c);
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        double* row = cols.data() + static_cast<std::size_t>((c * 3 + ky) * 3 + kx) * p;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * stride + ky - 1;
          if (iy < 0 || iy >= in.height) continue;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * stride + kx - 1;
            if (ix >= 0 && ix < in.width) row[oy * ow + ox] = src[iy * in.width + ix];
          }
        }
      }
    }
  }
  out = FeatureMap(out_channels, oh, ow);
  MapMat o(out.values.data(), out_channels, p);
  o.noalias() = ConstMapMat(weight.data(), out_channels, k) * ConstMapMat(cols.data(), k, p);
  o.colwise() += ConstMapVec(bias.data(), out_channels);
}

void conv3x3_backward(const FeatureMap& in, int stride, const std::vector<double>& cols, const FeatureMap& dout,
                      std::span<const double> weight, std::span<double> dweight, std::span<double> dbias,
                      FeatureMap* din) {
  const int k = in.channels * 9;
  const int p = dout.plane();
  const int cout = dout.channels;
  ConstMapMat g(dout.values.data(), cout, p);
  MapMat(dweight.data(), cout, k).noalias() += g * ConstMapMat(cols.data(), k, p).transpose();
  add_row_sums(dout.values.data(), cout, p, dbias);
  if (!din) return;

  RowMat dcols = ConstMapMat(weight.data(), cout, k).transpose() * g;
  *din = FeatureMap(in.channels, in.height, in.width);
  const int ow = dout.width;
  for (int c = 0; c < in.channels; ++c) {
    double* dst = din->channel(c);
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        const double* row = dcols.data() + static_cast<std::size_t>((c * 3 + ky) * 3 + kx) * p;
        for (int oy = 0; oy < dout.height; ++oy) {
          const int iy = oy * stride + ky - 1;
          if (iy < 0 || iy >= in.height) continue;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * stride + kx - 1;
            if (ix >= 0 && ix < in.width) dst[iy * in.width + ix] += row[oy * ow + ox];
          }
        }
      }
    }
  }
}

void conv1x1_forward(const FeatureMap& in, std::span<const double> weight, std::span<const double> bias,
                     int out_channels, FeatureMap& out) {
  if (weight.size() != static_cast<std::size_t>(out_channels) * in.channels ||
      bias.size() != static_cast<std::size_t>(out_channels))
    throw std::invalid_argument("conv1x1_forward: parameter shape mismatch");
  const int p = in.plane();
  out = FeatureMap(out_channels, in.height, in.width);
  MapMat o(out.values.data(), out_channels, p);
  o.noalias() = ConstMapMat(weight.data(), out_channels, in.channels) * ConstMapMat(in.values.data(), in.channels, p);
  o.colwise() += ConstMapVec(bias.data(), out_channels);
}

void conv1x1_backward(const FeatureMap& in, const FeatureMap& dout, std::span<const double> weight,
                      std::span<double> dweight, std::span<double> dbias, FeatureMap* din) {
  const int p = in.plane();
  const int cout = dout.channels;
  ConstMapMat g(dout.values.data(), cout, p);
  MapMat(dweight.data(), cout, in.channels).noalias() +=
      g * ConstMapMat(in.values.data(), in.channels, p).transpose();
  add_row_sums(dout.values.data(), cout, p, dbias);
  if (!din) return;
  *din = FeatureMap(in.channels, in.height, in.width);
  MapMat(din->values.data(), in.channels, p).noalias() =
      ConstMapMat(weight.data(), cout, in.channels).transpose() * g;
}

void upsample_bilinear_forward(const FeatureMap& in, int out_height, int out_width, FeatureMap& out) {
  const auto ay = axis_weights(in.height, out_height);
  const auto ax = axis_weights(in.width, out_width);
  out = FeatureMap(in.channels, out_height, out_width);
  for (int c = 0; c < in.channels; ++c) {
    const double* src = in.channel(c);
    double* dst = out.channel(c);
    for (int y = 0; y < out_height; ++y) {
      const double* r0 = src + ay.lo[y] * in.width;
      const double* r1 = src + ay.hi[y] * in.width;
      const double fy = ay.frac[y];
      for (int x = 0; x < out_width; ++x) {
        const double fx = ax.frac[x];
        const double top = r0[ax.lo[x]] * (1 - fx) + r0[ax.hi[x]] * fx;
        const double bot = r1[ax.lo[x]] * (1 - fx) + r1[ax.hi[x]] * fx;
        dst[y * out_width + x] = top * (1 - fy) + bot * fy;
      }
    }
  }
}

void upsample_bilinear_backward(const FeatureMap& dout, int in_height, int in_width, FeatureMap& din) {
  const auto ay = axis_weights(in_height, dout.height);
  const auto ax = axis_weights(in_width, dout.width);
  din = FeatureMap(dout.channels, in_height, in_width);
  for (int c = 0; c < dout.channels; ++c) {
    const double* g = dout.channel(c);
    double* dst = din.channel(c);
    for (int y = 0; y < dout.height; ++y) {
      double* r0 = dst + ay.lo[y] * in_width;
      double* r1 = dst + ay.hi[y] * in_width;
      const double fy = ay.frac[y];
      for (int x = 0; x < dout.width; ++x) {
        const double v = g[y * dout.width + x];
        const double fx = ax.frac[x];
        r0[ax.lo[x]] += v * (1 - fy) * (1 - fx);
        r0[ax.hi[x]] += v * (1 - fy) * fx;
        r1[ax.lo[x]] += v * fy * (1 - fx);
        r1[ax.hi[x]] += v * fy * fx;
      }
    }
  }
}

double silu(double x) { return x / (1.0 + std::exp(-x)); }

double silu_grad(double x) {
  const double s = 1.0 / (1.0 + std::exp(-x));
  return s * (1.0 + x * (1.0 - s));
}

void silu_forward(const FeatureMap& pre, FeatureMap& out) {
  out = FeatureMap(pre.channels, pre.height, pre.width);
  std::transform(pre.values.begin(), pre.values.end(), out.values.begin(), silu);
}

void silu_backward(const FeatureMap& pre, FeatureMap& dout) {
  for (std::size_t i = 0; i < dout.values.size(); ++i) dout.values[i] *= silu_grad(pre.values[i]);
}

}  // namespace s4al::nn
