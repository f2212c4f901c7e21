#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "s4al/tensor.hpp"

namespace s4al {

// Ordered by precedence: a pixel never moves to a lower-precedence state
// except PSEUDO -> UNLABELED when a stale pseudo-label is dropped.
enum class Provenance : std::uint8_t { unlabeled = 0, ground_truth = 1, queried = 2, pseudo = 3 };

bool is_human_label(Provenance p);

struct Tile {
  int row = 0;  // in tile units
  int col = 0;
  bool operator==(const Tile&) const = default;
};

struct RegionRequest {
  int image = 0;  // pool index (train id)
  Tile tile;
};

struct BudgetLedger {
  std::size_t human_pixels = 0;  // GT + QUERIED
  std::size_t queried_pixels = 0;
  std::size_t pseudo_pixels = 0;
  std::size_t total_pixels = 0;

  double human_fraction() const;
  double pseudo_fraction() const;
};

// Per-pixel label provenance over the training images. Images in the
// initial labelled set D_L are fully GT; the rest (D_U) start unlabelled.
class LabelPool {
 public:
  // round(labeled_fraction * n) images, chosen by a seeded shuffle, become GT.
  // Accepts labeled_fraction in (0, 1]; 1 yields a fully supervised pool.
  static LabelPool init(const std::vector<LabelMap>& ground_truth, double labeled_fraction, std::uint64_t seed);

  int size() const { return static_cast<int>(provenance_.size()); }
  int height() const { return height_; }
  int width() const { return width_; }

  bool in_labeled_set(int image) const { return initially_labeled_[image]; }
  std::vector<int> labeled_images() const;
  std::vector<int> unlabeled_images() const;

  const std::vector<Provenance>& provenance(int image) const { return provenance_[image]; }
  const LabelMap& effective(int image) const { return effective_[image]; }
  // Effective labels restricted to pixels whose provenance passes `keep`.
  LabelMap effective_where(int image, bool (*keep)(Provenance)) const;
  bool has_any_label(int image) const;

  // D_U pixels that are UNLABELED or PSEUDO take argmax(probs) when its
  // probability exceeds `threshold` (lowest index on ties) and become
  // UNLABELED otherwise. GT and QUERIED pixels are untouched.
  void assign_pseudo(int image, const ProbMap& probs, double threshold);

  // Reveals the oracle labels of an R x R tile of a D_U image.
  // Throws std::logic_error for D_L images or out-of-bounds tiles.
  void reveal(const RegionRequest& request, int region_size, const LabelMap& oracle);

  BudgetLedger ledger() const;
  // Fraction of PSEUDO pixels whose label matches the oracle; nullopt when there are none.
  std::optional<double> pseudo_precision(const std::vector<LabelMap>& oracle) const;

  // provenance_XXXX.png (enum values) and labels_XXXX.png per image.
  void write_snapshot(const std::filesystem::path& dir) const;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<bool> initially_labeled_;
  std::vector<std::vector<Provenance>> provenance_;
  std::vector<LabelMap> effective_;
};

}  // namespace s4al
