#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "s4al/tensor.hpp"

namespace s4al {

// Rows are ground truth, columns are predictions.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(int num_classes);

  int num_classes() const { return num_classes_; }
  std::uint64_t at(int gt, int pred) const { return counts_[static_cast<std::size_t>(gt) * num_classes_ + pred]; }
  std::uint64_t total() const;

  // Skips ignore pixels in `gt`; throws std::logic_error for labels >= C.
  void accumulate(const LabelMap& pred, const LabelMap& gt);
  void merge(const ConfusionMatrix& other);

 private:
  int num_classes_;
  std::vector<std::uint64_t> counts_;
};

struct IouResult {
  // NaN for classes absent from both ground truth and prediction.
  std::vector<double> per_class;
  // Mean over the classes that are present; NaN when none is.
  double mean = 0.0;
};

IouResult iou(const ConfusionMatrix& cm);

// Smallest labelled fraction whose mIoU reaches 95% of the reference, or
// nullopt if none does. Points are (labelled fraction, mIoU).
// Throws std::invalid_argument for an empty list.
std::optional<double> efficiency_summary(const std::vector<std::pair<double, double>>& points, double reference_miou);

inline constexpr double kEfficiencyTarget = 0.95;

}  // namespace s4al
