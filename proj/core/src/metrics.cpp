#include "s4al/metrics.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace s4al {

ConfusionMatrix::ConfusionMatrix(int num_classes)
    : num_classes_(num_classes), counts_(static_cast<std::size_t>(num_classes) * num_classes, 0) {
  if (num_classes < 1) throw std::invalid_argument("ConfusionMatrix: num_classes must be >= 1");
}

std::uint64_t ConfusionMatrix::total() const {
  return std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0});
}

void ConfusionMatrix::accumulate(const LabelMap& pred, const LabelMap& gt) {
  if (pred.height != gt.height || pred.width != gt.width) throw std::logic_error("accumulate: shape mismatch");
  for (std::size_t i = 0; i < gt.pixels(); ++i) {
    const int g = gt.labels[i];
    if (g == kIgnoreLabel) continue;
    const int p = pred.labels[i];
    if (g >= num_classes_ || p >= num_classes_) throw std::logic_error("accumulate: label exceeds class count");
    ++counts_[static_cast<std::size_t>(g) * num_classes_ + p];
  }
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
  if (other.num_classes_ != num_classes_) throw std::logic_error("merge: class count mismatch");
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
}

IouResult iou(const ConfusionMatrix& cm) {
  const int c = cm.num_classes();
  IouResult r;
  r.per_class.assign(c, std::numeric_limits<double>::quiet_NaN());
  double sum = 0.0;
  int included = 0;
  for (int k = 0; k < c; ++k) {
    std::uint64_t row = 0, col = 0;
    for (int j = 0; j < c; ++j) {
      row += cm.at(k, j);
      col += cm.at(j, k);
    }
    const std::uint64_t denom = row + col - cm.at(k, k);
    if (denom == 0) continue;
    r.per_class[k] = static_cast<double>(cm.at(k, k)) / static_cast<double>(denom);
    sum += r.per_class[k];
    ++included;
  }
  r.mean = included ? sum / included : std::numeric_limits<double>::quiet_NaN();
  return r;
}

std::optional<double> efficiency_summary(const std::vector<std::pair<double, double>>& points, double reference_miou) {
  if (points.empty()) throw std::invalid_argument("efficiency_summary: no reports");
  const double target = kEfficiencyTarget * reference_miou;
  std::optional<double> best;
  for (const auto& [fraction, miou] : points)
    if (miou >= target && (!best || fraction < *best)) best = fraction;
  return best;
}

}  // namespace s4al
