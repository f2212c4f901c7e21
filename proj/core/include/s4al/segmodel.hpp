#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "s4al/rng.hpp"
#include "s4al/tensor.hpp"

namespace s4al {

// Encoder: three blocks of (3x3 stride-2 conv, 3x3 conv), SiLU after each conv,
// giving 1/2, 1/4 and 1/8 resolution features. Decoder: the 1/8 and 1/4
// features are bilinearly upsampled to 1/2 resolution, concatenated with the
// 1/2 features and fused by a 1x1 conv. Dropout (noise injection) follows the
// fusion. Two 1x1 heads produce class logits and embeddings, both upsampled
// to full resolution; embeddings are L2-normalised per pixel.
struct ArchConfig {
  int in_channels = 3;
  int num_classes = 6;
  int embed_dim = 16;
  std::array<int, 3> enc_channels{16, 32, 48};
  int dec_channels = 32;
  double dropout = 0.1;

  void validate() const;
  bool operator==(const ArchConfig&) const = default;
};

struct Parameter {
  std::string name;
  std::vector<int> shape;
  std::vector<double> values;
};

struct ModelParams {
  ArchConfig arch;
  std::vector<Parameter> tensors;

  std::size_t size() const;
  ModelParams zeros_like() const;
  void fill(double v);
  void axpy(double scale, const ModelParams& other);
  bool all_finite() const;

  // Flat views for optimisers and gradient checks.
  double& flat(std::size_t i);
  double flat(std::size_t i) const;
};

ModelParams init_model(std::uint64_t seed, const ArchConfig& arch);

struct ForwardCache;

struct ForwardPass {
  LogitMap logits;
  EmbeddingMap embeddings;
  std::shared_ptr<const ForwardCache> cache;
};

// noise = true applies dropout with the configured rate using `rng`
// (required when the rate is positive). noise = false is deterministic.
// Throws NumericalError if any activation becomes non-finite.
ForwardPass forward(const ModelParams& params, const SceneImage& image, bool noise, Rng* rng = nullptr);

// Accumulates parameter gradients of a scalar loss into `grads`, given its
// gradients with respect to the logits and the (normalised) embeddings.
void backward(const ModelParams& params, const ForwardPass& pass, const LogitMap& dlogits,
              const EmbeddingMap& dembeddings, ModelParams& grads);

// Max-subtracted softmax per pixel.
ProbMap softmax_probs(const LogitMap& logits);

// Noise-free argmax prediction.
LabelMap predict(const ModelParams& params, const SceneImage& image);

}  // namespace s4al
