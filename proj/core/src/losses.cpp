#include "s4al/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>

#include "s4al/errors.hpp"

namespace s4al {
namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

// Valid pixels grouped by label, ascending label order.
std::map<int, std::vector<std::size_t>> pixels_by_class(const PixelLabelMask& mask, int num_channels) {
  std::map<int, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < mask.pixels(); ++i) {
    const int l = mask.labels[i];
    if (l == kIgnoreLabel) continue;
    if (num_channels > 0 && l >= num_channels) throw std::invalid_argument("label exceeds class count");
    groups[l].push_back(i);
  }
  return groups;
}

void check_shapes(const PixelTensor& t, const PixelLabelMask& mask, const char* what) {
  if (t.height != mask.height || t.width != mask.width)
    throw std::invalid_argument(std::string(what) + ": tensor and mask differ in size");
}

}  // namespace

void RecoConfig::validate() const {
  if (!(temperature > 0.0)) throw ConfigError("reco temperature must be > 0");
  if (!(confidence_threshold > 0.0 && confidence_threshold < 1.0))
    throw ConfigError("reco confidence_threshold must be in (0, 1)");
  if (queries_per_class < 1) throw ConfigError("reco queries_per_class must be >= 1");
  if (negatives_per_query < 1) throw ConfigError("reco negatives_per_query must be >= 1");
  if (!(weight >= 0.0)) throw ConfigError("reco weight must be >= 0");
}

std::size_t RecoSample::query_count() const {
  std::size_t n = 0;
  for (const auto& c : classes) n += c.queries.size();
  return n;
}

CrossEntropyResult masked_cross_entropy(const LogitMap& logits, const PixelLabelMask& mask) {
  check_shapes(logits, mask, "masked_cross_entropy");
  CrossEntropyResult r;
  r.grad = LogitMap(logits.height, logits.width, logits.channels, 0.0);
  r.valid_pixels = mask.valid_count();
  if (r.valid_pixels == 0) {
    r.no_valid_pixels = true;
    return r;
  }
  const double inv_n = 1.0 / static_cast<double>(r.valid_pixels);
  double total = 0.0;
  for (std::size_t i = 0; i < logits.pixels(); ++i) {
    const int label = mask.labels[i];
    if (label == kIgnoreLabel) continue;
    if (label >= logits.channels) throw std::invalid_argument("masked_cross_entropy: label exceeds class count");
    auto z = logits.pixel(i);
    auto g = r.grad.pixel(i);
    const double m = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (std::size_t c = 0; c < z.size(); ++c) sum += (g[c] = std::exp(z[c] - m));
    const double lse = m + std::log(sum);
    total += lse - z[label];
    for (std::size_t c = 0; c < z.size(); ++c) g[c] = (g[c] / sum - (static_cast<int>(c) == label ? 1.0 : 0.0)) * inv_n;
  }
  r.value = total * inv_n;
  return r;
}

std::vector<double> class_anchor(const EmbeddingMap& emb, const std::vector<std::size_t>& members) {
  std::vector<double> a(emb.channels, 0.0);
  for (auto i : members) {
    auto e = emb.pixel(i);
    for (int k = 0; k < emb.channels; ++k) a[k] += e[k];
  }
  const double norm = std::sqrt(dot(a, a));
  if (norm > 0)
    for (auto& v : a) v /= norm;
  return a;
}

std::vector<std::pair<int, double>> negative_class_distribution(const std::vector<std::vector<double>>& anchors,
                                                                int target) {
  std::vector<std::pair<int, double>> dist;
  double max_sim = -std::numeric_limits<double>::infinity();
  for (int c = 0; c < static_cast<int>(anchors.size()); ++c) {
    if (c == target) continue;
    const double s = dot(anchors[target], anchors[c]);
    dist.emplace_back(c, s);
    max_sim = std::max(max_sim, s);
  }
  double sum = 0.0;
  for (auto& [c, w] : dist) sum += (w = std::exp(w - max_sim));
  for (auto& [c, w] : dist) w /= sum;
  return dist;
}

RecoSample build_reco_sample(const EmbeddingMap& emb, const PixelLabelMask& mask, const ProbMap& probs,
                             const RecoConfig& cfg, Rng& rng) {
  check_shapes(emb, mask, "build_reco_sample");
  check_shapes(probs, mask, "build_reco_sample");
  const auto groups = pixels_by_class(mask, probs.channels);
  RecoSample sample;
  if (groups.size() < 2) return sample;

  std::vector<std::vector<double>> anchors;
  for (const auto& [label, members] : groups) {
    sample.classes.push_back({label, members, {}, {}});
    anchors.push_back(class_anchor(emb, members));
  }

  for (std::size_t ci = 0; ci < sample.classes.size(); ++ci) {
    auto& cls = sample.classes[ci];
    // Queries: the uncertain pixels of the class, falling back to all of them.
    std::vector<std::size_t> candidates;
    for (auto i : cls.members)
      if (probs.pixel(i)[cls.label] <= cfg.confidence_threshold) candidates.push_back(i);
    if (candidates.empty()) candidates = cls.members;
    const std::size_t take = std::min<std::size_t>(cfg.queries_per_class, candidates.size());
    for (std::size_t k = 0; k < take; ++k) {
      const std::size_t j = k + rng.index(candidates.size() - k);
      std::swap(candidates[k], candidates[j]);
    }
    candidates.resize(take);
    cls.queries = std::move(candidates);

    // Negatives: class drawn from the anchor similarity graph, then a uniform pixel of that class.
    const auto dist = negative_class_distribution(anchors, static_cast<int>(ci));
    cls.negatives.reserve(cfg.negatives_per_query);
    for (int k = 0; k < cfg.negatives_per_query; ++k) {
      const double u = rng.uniform();
      double acc = 0.0;
      int chosen = dist.back().first;
      for (const auto& [c, p] : dist) {
        acc += p;
        if (u < acc) {
          chosen = c;
          break;
        }
      }
      const auto& pool = sample.classes[chosen].members;
      cls.negatives.push_back(pool[rng.index(pool.size())]);
    }
  }
  return sample;
}

RecoSample build_exhaustive_reco_sample(const PixelLabelMask& mask) {
  const auto groups = pixels_by_class(mask, 0);
  RecoSample sample;
  if (groups.size() < 2) return sample;
  for (const auto& [label, members] : groups) {
    RecoClassSample cls{label, members, members, {}};
    for (const auto& [other, pixels] : groups)
      if (other != label) cls.negatives.insert(cls.negatives.end(), pixels.begin(), pixels.end());
    sample.classes.push_back(std::move(cls));
  }
  return sample;
}

RecoResult reco_loss(const RecoSample& sample, const EmbeddingMap& emb, const RecoConfig& cfg) {
  RecoResult r;
  r.grad = EmbeddingMap(emb.height, emb.width, emb.channels, 0.0);
  r.pairs = sample.query_count();
  if (sample.empty() || r.pairs == 0) return r;

  const int d = emb.channels;
  const double inv_t = 1.0 / cfg.temperature;
  const double inv_pairs = 1.0 / static_cast<double>(r.pairs);
  std::vector<double> logits, anchor_raw(d), anchor(d), danchor(d);
  double total = 0.0;

  for (const auto& cls : sample.classes) {
    if (cls.queries.empty()) continue;
    std::fill(anchor_raw.begin(), anchor_raw.end(), 0.0);
    for (auto i : cls.members) {
      auto e = emb.pixel(i);
      for (int k = 0; k < d; ++k) anchor_raw[k] += e[k];
    }
    for (auto& v : anchor_raw) v /= static_cast<double>(cls.members.size());
    const double mean_norm = std::sqrt(dot(anchor_raw, anchor_raw));
    if (!(mean_norm > 0.0)) throw NumericalError("reco_loss: class anchor has zero norm");
    for (int k = 0; k < d; ++k) anchor[k] = anchor_raw[k] / mean_norm;
    std::fill(danchor.begin(), danchor.end(), 0.0);

    logits.resize(cls.negatives.size() + 1);
    for (auto qi : cls.queries) {
      auto q = emb.pixel(qi);
      logits[0] = dot(q, anchor) * inv_t;
      for (std::size_t j = 0; j < cls.negatives.size(); ++j) logits[j + 1] = dot(q, emb.pixel(cls.negatives[j])) * inv_t;
      const double m = *std::max_element(logits.begin(), logits.end());
      double sum = 0.0;
      for (double z : logits) sum += std::exp(z - m);
      const double lse = m + std::log(sum);
      total += lse - logits[0];

      // d/dz of (lse - z0) is softmax - e0; chain through z = q.x / t.
      auto gq = r.grad.pixel(qi);
      const double w_pos = (std::exp(logits[0] - lse) - 1.0) * inv_t * inv_pairs;
      for (int k = 0; k < d; ++k) {
        gq[k] += w_pos * anchor[k];
        danchor[k] += w_pos * q[k];
      }
      for (std::size_t j = 0; j < cls.negatives.size(); ++j) {
        const double w = std::exp(logits[j + 1] - lse) * inv_t * inv_pairs;
        auto key = emb.pixel(cls.negatives[j]);
        auto gk = r.grad.pixel(cls.negatives[j]);
        for (int k = 0; k < d; ++k) {
          gq[k] += w * key[k];
          gk[k] += w * q[k];
        }
      }
    }
    // anchor = mean / |mean|; every member receives (I - a a^T) danchor / (|mean| n).
    const double proj = dot(anchor, danchor);
    const double scale = 1.0 / (mean_norm * static_cast<double>(cls.members.size()));
    for (int k = 0; k < d; ++k) danchor[k] = (danchor[k] - anchor[k] * proj) * scale;
    for (auto i : cls.members) {
      auto g = r.grad.pixel(i);
      for (int k = 0; k < d; ++k) g[k] += danchor[k];
    }
  }
  r.value = total * inv_pairs;
  return r;
}

TotalLossResult total_loss_with_sample(const LogitMap& logits, const EmbeddingMap& emb, const PixelLabelMask& mask,
                                       const RecoSample& sample, const RecoConfig& cfg) {
  auto ce = masked_cross_entropy(logits, mask);
  TotalLossResult r;
  r.cross_entropy = ce.value;
  r.no_valid_pixels = ce.no_valid_pixels;
  r.dlogits = std::move(ce.grad);
  r.dembeddings = EmbeddingMap(emb.height, emb.width, emb.channels, 0.0);
  r.value = r.cross_entropy;
  if (cfg.weight > 0.0 && !sample.empty()) {
    auto rc = reco_loss(sample, emb, cfg);
    r.reco = rc.value;
    r.reco_skipped = false;
    r.value += cfg.weight * rc.value;
    for (std::size_t i = 0; i < rc.grad.values.size(); ++i) r.dembeddings.values[i] = cfg.weight * rc.grad.values[i];
  }
  return r;
}

TotalLossResult total_loss(const LogitMap& logits, const EmbeddingMap& emb, const PixelLabelMask& mask,
                           const ProbMap& probs, const RecoConfig& cfg, Rng& rng) {
  RecoSample sample;
  if (cfg.weight > 0.0) sample = build_reco_sample(emb, mask, probs, cfg, rng);
  return total_loss_with_sample(logits, emb, mask, sample, cfg);
}

}  // namespace s4al
