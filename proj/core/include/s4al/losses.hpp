#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "s4al/rng.hpp"
#include "s4al/tensor.hpp"

namespace s4al {

struct RecoConfig {
  double temperature = 0.5;
  // Pixels whose predicted probability for their own label is <= this are query candidates.
  double confidence_threshold = 0.97;
  int queries_per_class = 32;
  int negatives_per_query = 64;
  // Weight of the contrastive term in the total loss.
  double weight = 1.0;

  void validate() const;
  bool operator==(const RecoConfig&) const = default;
};

struct CrossEntropyResult {
  double value = 0.0;
  std::size_t valid_pixels = 0;
  // Set when the mask had no valid pixel; value is then 0.
  bool no_valid_pixels = false;
  LogitMap grad;
};

// Mean over valid pixels of -log softmax(logits)[label].
CrossEntropyResult masked_cross_entropy(const LogitMap& logits, const PixelLabelMask& mask);

// Pixel indices (row-major over the stacked batch) that make up the
// contrastive terms of one class.
struct RecoClassSample {
  int label = 0;
  // All valid pixels of the class; the positive anchor is their normalised mean.
  std::vector<std::size_t> members;
  std::vector<std::size_t> queries;
  // Shared negative key set for every query of this class.
  std::vector<std::size_t> negatives;
};

struct RecoSample {
  std::vector<RecoClassSample> classes;

  bool empty() const { return classes.empty(); }
  std::size_t query_count() const;
};

// Renormalised mean of the given unit embeddings.
std::vector<double> class_anchor(const EmbeddingMap& emb, const std::vector<std::size_t>& members);

// Probability of drawing each other class as the source of a negative key
// for `anchors[target]`: softmax over anchor dot products, target excluded.
// Returned entries are (index into anchors, probability).
std::vector<std::pair<int, double>> negative_class_distribution(const std::vector<std::vector<double>>& anchors,
                                                                int target);

// Returns an empty sample when fewer than two classes have valid pixels.
RecoSample build_reco_sample(const EmbeddingMap& emb, const PixelLabelMask& mask, const ProbMap& probs,
                             const RecoConfig& cfg, Rng& rng);

// Every valid pixel of a class is a query and every valid pixel of any other
// class is a negative key.
RecoSample build_exhaustive_reco_sample(const PixelLabelMask& mask);

struct RecoResult {
  double value = 0.0;
  std::size_t pairs = 0;
  EmbeddingMap grad;
};

// -log( e^{q.a/t} / (e^{q.a/t} + sum_k e^{q.k/t}) ) averaged over every
// (class, query) pair. The anchors are recomputed from `emb`, so gradients
// flow into every member pixel. Empty sample -> 0.
RecoResult reco_loss(const RecoSample& sample, const EmbeddingMap& emb, const RecoConfig& cfg);

struct TotalLossResult {
  double value = 0.0;
  double cross_entropy = 0.0;
  double reco = 0.0;
  bool reco_skipped = true;
  bool no_valid_pixels = false;
  LogitMap dlogits;
  EmbeddingMap dembeddings;
};

// masked_cross_entropy + weight * reco_loss(build_reco_sample(...)).
// The sample is not drawn when the weight is zero.
TotalLossResult total_loss(const LogitMap& logits, const EmbeddingMap& emb, const PixelLabelMask& mask,
                           const ProbMap& probs, const RecoConfig& cfg, Rng& rng);

// Same as total_loss with a fixed, pre-drawn contrastive sample.
TotalLossResult total_loss_with_sample(const LogitMap& logits, const EmbeddingMap& emb, const PixelLabelMask& mask,
                                       const RecoSample& sample, const RecoConfig& cfg);

}  // namespace s4al
