#include "s4al/segmodel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "s4al/errors.hpp"
#include "s4al/layers.hpp"

namespace s4al {

using nn::FeatureMap;

namespace {

enum Layer { kEnc1a, kEnc1b, kEnc2a, kEnc2b, kEnc3a, kEnc3b, kFuse, kCls, kEmb, kLayerCount };
constexpr int kConv3Layers = 6;
constexpr int kStride[kConv3Layers] = {2, 1, 2, 1, 2, 1};
constexpr const char* kLayerNames[kLayerCount] = {"enc1a", "enc1b", "enc2a", "enc2b", "enc3a",
                                                  "enc3b", "fuse",  "cls",   "emb"};

std::span<const double> weight(const ModelParams& p, int layer) { return p.tensors[2 * layer].values; }
std::span<const double> bias(const ModelParams& p, int layer) { return p.tensors[2 * layer + 1].values; }
std::span<double> weight(ModelParams& p, int layer) { return p.tensors[2 * layer].values; }
std::span<double> bias(ModelParams& p, int layer) { return p.tensors[2 * layer + 1].values; }

int out_channels(const ModelParams& p, int layer) { return p.tensors[2 * layer].shape[0]; }

FeatureMap to_feature_map(const PixelTensor& t) {
  FeatureMap f(t.channels, t.height, t.width);
  const int plane = f.plane();
  for (int i = 0; i < plane; ++i)
    for (int c = 0; c < t.channels; ++c) f.values[static_cast<std::size_t>(c) * plane + i] = t.values[static_cast<std::size_t>(i) * t.channels + c];
  return f;
}

PixelTensor to_pixel_tensor(const FeatureMap& f) {
  PixelTensor t(f.height, f.width, f.channels);
  const int plane = f.plane();
  for (int i = 0; i < plane; ++i)
    for (int c = 0; c < f.channels; ++c) t.values[static_cast<std::size_t>(i) * f.channels + c] = f.values[static_cast<std::size_t>(c) * plane + i];
  return t;
}

void check_finite(const FeatureMap& f, const char* where) {
  for (double v : f.values) {
    if (!std::isfinite(v)) throw NumericalError(std::string("non-finite activation after ") + where);
  }
}

}  // namespace

struct ForwardCache {
  FeatureMap input;
  // Inputs, im2col buffers and pre-activations of the six 3x3 convolutions.
  std::array<FeatureMap, kConv3Layers> conv_in;
  std::array<std::vector<double>, kConv3Layers> cols;
  std::array<FeatureMap, kConv3Layers> conv_pre;
  FeatureMap f1, f2, f3;
  FeatureMap concat;
  FeatureMap fuse_pre;
  std::vector<double> dropout_scale;  // empty when no dropout was applied
  FeatureMap head_in;
  FeatureMap emb_raw;                 // full resolution, before normalisation
  std::vector<double> emb_norm;       // per pixel
};

void ArchConfig::validate() const {
  if (in_channels < 1) throw ConfigError("in_channels must be >= 1");
  if (num_classes < 2) throw ConfigError("num_classes must be >= 2");
  if (embed_dim < 2) throw ConfigError("embed_dim must be >= 2");
  for (int c : enc_channels)
    if (c < 1) throw ConfigError("encoder channels must be >= 1");
  if (dec_channels < 1) throw ConfigError("dec_channels must be >= 1");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must be in [0, 1)");
}

std::size_t ModelParams::size() const {
  std::size_t n = 0;
  for (const auto& t : tensors) n += t.values.size();
  return n;
}

ModelParams ModelParams::zeros_like() const {
  ModelParams z = *this;
  z.fill(0.0);
  return z;
}

void ModelParams::fill(double v) {
  for (auto& t : tensors) std::fill(t.values.begin(), t.values.end(), v);
}

void ModelParams::axpy(double scale, const ModelParams& other) {
  for (std::size_t k = 0; k < tensors.size(); ++k) {
    auto& a = tensors[k].values;
    const auto& b = other.tensors[k].values;
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += scale * b[i];
  }
}

bool ModelParams::all_finite() const {
  for (const auto& t : tensors)
    for (double v : t.values)
      if (!std::isfinite(v)) return false;
  return true;
}

double& ModelParams::flat(std::size_t i) {
  for (auto& t : tensors) {
    if (i < t.values.size()) return t.values[i];
    i -= t.values.size();
  }
  throw std::out_of_range("ModelParams::flat");
}

double ModelParams::flat(std::size_t i) const { return const_cast<ModelParams&>(*this).flat(i); }

ModelParams init_model(std::uint64_t seed, const ArchConfig& arch) {
  arch.validate();
  ModelParams p;
  p.arch = arch;
  const auto& e = arch.enc_channels;
  const int conv3_in[kConv3Layers] = {arch.in_channels, e[0], e[0], e[1], e[1], e[2]};
  const int conv3_out[kConv3Layers] = {e[0], e[0], e[1], e[1], e[2], e[2]};
  Rng rng(derive_seed(seed, {0x1417ULL}));

  auto add_layer = [&](int layer, std::vector<int> wshape, int fan_in, double gain) {
    const int cout = wshape[0];
    Parameter w{std::string(kLayerNames[layer]) + ".weight", wshape, {}};
    std::size_t n = 1;
    for (int d : wshape) n *= static_cast<std::size_t>(d);
    w.values.resize(n);
    const double stddev = std::sqrt(gain / fan_in);
    for (auto& v : w.values) v = stddev * rng.normal();
    p.tensors.push_back(std::move(w));
    p.tensors.push_back({std::string(kLayerNames[layer]) + ".bias", {cout}, std::vector<double>(cout, 0.0)});
  };

  for (int l = 0; l < kConv3Layers; ++l)
    add_layer(l, {conv3_out[l], conv3_in[l], 3, 3}, conv3_in[l] * 9, 2.0);
  const int concat = e[0] + e[1] + e[2];
  add_layer(kFuse, {arch.dec_channels, concat}, concat, 2.0);
  add_layer(kCls, {arch.num_classes, arch.dec_channels}, arch.dec_channels, 1.0);
  add_layer(kEmb, {arch.embed_dim, arch.dec_channels}, arch.dec_channels, 1.0);
  return p;
}

ForwardPass forward(const ModelParams& params, const SceneImage& image, bool noise, Rng* rng) {
  const auto& arch = params.arch;
  if (image.channels != arch.in_channels) throw ConfigError("forward: image channel count does not match model");
  if (image.height % 8 != 0 || image.width % 8 != 0 || image.height < 8 || image.width < 8)
    throw ConfigError("forward: image height and width must be positive multiples of 8");

  auto cache = std::make_shared<ForwardCache>();
  cache->input = to_feature_map(image);

  FeatureMap x = cache->input;
  for (int l = 0; l < kConv3Layers; ++l) {
    cache->conv_in[l] = x;
    nn::conv3x3_forward(x, weight(params, l), bias(params, l), out_channels(params, l), kStride[l],
                        cache->conv_pre[l], cache->cols[l]);
    nn::silu_forward(cache->conv_pre[l], x);
    check_finite(x, kLayerNames[l]);
    if (l == kEnc1b) cache->f1 = x;
    if (l == kEnc2b) cache->f2 = x;
    if (l == kEnc3b) cache->f3 = x;
  }

  const int dh = cache->f1.height, dw = cache->f1.width;
  FeatureMap u3, u2;
  nn::upsample_bilinear_forward(cache->f3, dh, dw, u3);
  nn::upsample_bilinear_forward(cache->f2, dh, dw, u2);
  auto& cat = cache->concat;
  cat = FeatureMap(u3.channels + u2.channels + cache->f1.channels, dh, dw);
  auto it = std::copy(u3.values.begin(), u3.values.end(), cat.values.begin());
  it = std::copy(u2.values.begin(), u2.values.end(), it);
  std::copy(cache->f1.values.begin(), cache->f1.values.end(), it);

  nn::conv1x1_forward(cat, weight(params, kFuse), bias(params, kFuse), arch.dec_channels, cache->fuse_pre);
  FeatureMap hidden;
  nn::silu_forward(cache->fuse_pre, hidden);
  check_finite(hidden, "fuse");

  if (noise && arch.dropout > 0.0) {
    if (!rng) throw std::invalid_argument("forward: noise requires an Rng");
    const double keep_scale = 1.0 / (1.0 - arch.dropout);
    cache->dropout_scale.resize(hidden.values.size());
    for (std::size_t i = 0; i < hidden.values.size(); ++i) {
      cache->dropout_scale[i] = rng->bernoulli(arch.dropout) ? 0.0 : keep_scale;
      hidden.values[i] *= cache->dropout_scale[i];
    }
  }
  cache->head_in = hidden;

  FeatureMap lo, eo, logits_full;
  nn::conv1x1_forward(hidden, weight(params, kCls), bias(params, kCls), arch.num_classes, lo);
  nn::conv1x1_forward(hidden, weight(params, kEmb), bias(params, kEmb), arch.embed_dim, eo);
  nn::upsample_bilinear_forward(lo, image.height, image.width, logits_full);
  nn::upsample_bilinear_forward(eo, image.height, image.width, cache->emb_raw);
  check_finite(logits_full, "cls");
  check_finite(cache->emb_raw, "emb");

  ForwardPass pass;
  pass.logits = to_pixel_tensor(logits_full);
  pass.embeddings = to_pixel_tensor(cache->emb_raw);
  cache->emb_norm.resize(pass.embeddings.pixels());
  for (std::size_t i = 0; i < pass.embeddings.pixels(); ++i) {
    auto v = pass.embeddings.pixel(i);
    double norm = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
    norm = std::max(norm, 1e-12);
    cache->emb_norm[i] = norm;
    for (auto& x : v) x /= norm;
  }
  pass.cache = std::move(cache);
  return pass;
}

void backward(const ModelParams& params, const ForwardPass& pass, const LogitMap& dlogits,
              const EmbeddingMap& dembeddings, ModelParams& grads) {
  const auto& c = *pass.cache;
  if (!dlogits.same_shape(pass.logits) || !dembeddings.same_shape(pass.embeddings))
    throw std::invalid_argument("backward: gradient shape mismatch");

  // Embedding normalisation: d v = (g - e (e . g)) / |v|.
  EmbeddingMap draw = dembeddings;
  for (std::size_t i = 0; i < draw.pixels(); ++i) {
    auto g = draw.pixel(i);
    auto e = pass.embeddings.pixel(i);
    const double dot = std::inner_product(g.begin(), g.end(), e.begin(), 0.0);
    for (std::size_t k = 0; k < g.size(); ++k) g[k] = (g[k] - e[k] * dot) / c.emb_norm[i];
  }

  const int dh = c.head_in.height, dw = c.head_in.width;
  FeatureMap dlo, deo;
  nn::upsample_bilinear_backward(to_feature_map(dlogits), dh, dw, dlo);
  nn::upsample_bilinear_backward(to_feature_map(draw), dh, dw, deo);

  FeatureMap dhidden, dhidden_emb;
  nn::conv1x1_backward(c.head_in, dlo, weight(params, kCls), weight(grads, kCls), bias(grads, kCls), &dhidden);
  nn::conv1x1_backward(c.head_in, deo, weight(params, kEmb), weight(grads, kEmb), bias(grads, kEmb), &dhidden_emb);
  for (std::size_t i = 0; i < dhidden.values.size(); ++i) dhidden.values[i] += dhidden_emb.values[i];
  if (!c.dropout_scale.empty())
    for (std::size_t i = 0; i < dhidden.values.size(); ++i) dhidden.values[i] *= c.dropout_scale[i];
  nn::silu_backward(c.fuse_pre, dhidden);

  FeatureMap dcat;
  nn::conv1x1_backward(c.concat, dhidden, weight(params, kFuse), weight(grads, kFuse), bias(grads, kFuse), &dcat);

  const int c3 = c.f3.channels, c2 = c.f2.channels, c1 = c.f1.channels;
  const std::size_t plane = static_cast<std::size_t>(dh) * dw;
  FeatureMap du3(c3, dh, dw), du2(c2, dh, dw), df1(c1, dh, dw);
  auto src = dcat.values.begin();
  std::copy(src, src + c3 * plane, du3.values.begin());
  std::copy(src + c3 * plane, src + (c3 + c2) * plane, du2.values.begin());
  std::copy(src + (c3 + c2) * plane, dcat.values.end(), df1.values.begin());

  FeatureMap df3, df2;
  nn::upsample_bilinear_backward(du3, c.f3.height, c.f3.width, df3);
  nn::upsample_bilinear_backward(du2, c.f2.height, c.f2.width, df2);

  // Walk the encoder backwards; `d` holds the gradient w.r.t. the current layer output.
  FeatureMap d = std::move(df3);
  for (int l = kConv3Layers - 1; l >= 0; --l) {
    nn::silu_backward(c.conv_pre[l], d);
    FeatureMap din;
    nn::conv3x3_backward(c.conv_in[l], kStride[l], c.cols[l], d, weight(params, l), weight(grads, l),
                         bias(grads, l), l == 0 ? nullptr : &din);
    if (l == 0) break;
    d = std::move(din);
    if (l - 1 == kEnc2b)
      for (std::size_t i = 0; i < d.values.size(); ++i) d.values[i] += df2.values[i];
    if (l - 1 == kEnc1b)
      for (std::size_t i = 0; i < d.values.size(); ++i) d.values[i] += df1.values[i];
  }
}

ProbMap softmax_probs(const LogitMap& logits) {
  ProbMap probs = logits;
  for (std::size_t i = 0; i < probs.pixels(); ++i) {
    auto p = probs.pixel(i);
    const double m = *std::max_element(p.begin(), p.end());
    double sum = 0.0;
    for (auto& v : p) {
      v = std::exp(v - m);
      sum += v;
    }
    for (auto& v : p) v /= sum;
  }
  return probs;
}

LabelMap predict(const ModelParams& params, const SceneImage& image) {
  return argmax_labels(forward(params, image, false).logits);
}

}  // namespace s4al
