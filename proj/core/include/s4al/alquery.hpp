#pragma once

#include <vector>

#include "s4al/labelpool.hpp"
#include "s4al/tensor.hpp"

namespace s4al {

// Per-pixel Shannon entropy (natural log, 0 ln 0 = 0). Single channel.
PixelTensor pixel_entropy(const ProbMap& probs);

// Non-overlapping R x R tiling of one image. Tiles are indexed row-major.
struct RegionGrid {
  int region_size = 0;
  int rows = 0;
  int cols = 0;
  std::vector<double> scores;
  std::vector<bool> eligible;

  // Throws ConfigError unless R divides both dimensions.
  static RegionGrid make(int height, int width, int region_size);

  int tile_count() const { return rows * cols; }
  Tile tile(int index) const { return {index / cols, index % cols}; }

  // A tile is eligible while it holds at least one pixel that is not GT or QUERIED.
  void mark_eligibility(const std::vector<Provenance>& provenance, int width);
};

// Tile score = mean entropy over all of its pixels; ineligible tiles score -inf.
RegionGrid score_regions(const PixelTensor& entropy, RegionGrid grid);

struct ScoredGrid {
  int image = 0;
  RegionGrid grid;
};

struct RegionQuery {
  int image = 0;
  Tile tile;
  double score = 0.0;
};

// For every grid independently, the `per_image_budget` highest-scoring
// eligible tiles, ties broken by ascending tile index. Output is ordered by
// input grid order, then by rank.
std::vector<RegionQuery> select_regions(const std::vector<ScoredGrid>& grids, int per_image_budget);

}  // namespace s4al
