#include "s4al/alquery.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "s4al/errors.hpp"

namespace s4al {

PixelTensor pixel_entropy(const ProbMap& probs) {
  PixelTensor h(probs.height, probs.width, 1);
  for (std::size_t i = 0; i < probs.pixels(); ++i) {
    double e = 0.0;
    for (double p : probs.pixel(i))
      if (p > 0.0) e -= p * std::log(p);
    h.values[i] = e;
  }
  return h;
}

RegionGrid RegionGrid::make(int height, int width, int region_size) {
  if (region_size < 1 || height % region_size != 0 || width % region_size != 0)
    throw ConfigError("region size must divide the image height and width");
  RegionGrid g;
  g.region_size = region_size;
  g.rows = height / region_size;
  g.cols = width / region_size;
  g.scores.assign(g.tile_count(), 0.0);
  g.eligible.assign(g.tile_count(), true);
  return g;
}

void RegionGrid::mark_eligibility(const std::vector<Provenance>& provenance, int width) {
  for (int t = 0; t < tile_count(); ++t) {
    const Tile tl = tile(t);
    bool open = false;
    for (int y = tl.row * region_size; y < (tl.row + 1) * region_size && !open; ++y)
      for (int x = tl.col * region_size; x < (tl.col + 1) * region_size; ++x)
        if (!is_human_label(provenance[static_cast<std::size_t>(y) * width + x])) {
          open = true;
          break;
        }
    eligible[t] = open;
  }
}

RegionGrid score_regions(const PixelTensor& entropy, RegionGrid grid) {
  if (entropy.height != grid.rows * grid.region_size || entropy.width != grid.cols * grid.region_size)
    throw std::invalid_argument("score_regions: grid does not match entropy map");
  const double area = static_cast<double>(grid.region_size) * grid.region_size;
  for (int t = 0; t < grid.tile_count(); ++t) {
    if (!grid.eligible[t]) {
      grid.scores[t] = -std::numeric_limits<double>::infinity();
      continue;
    }
    const Tile tl = grid.tile(t);
    double sum = 0.0;
    for (int y = tl.row * grid.region_size; y < (tl.row + 1) * grid.region_size; ++y)
      for (int x = tl.col * grid.region_size; x < (tl.col + 1) * grid.region_size; ++x) sum += entropy.at(y, x, 0);
    grid.scores[t] = sum / area;
  }
  return grid;
}

std::vector<RegionQuery> select_regions(const std::vector<ScoredGrid>& grids, int per_image_budget) {
  if (per_image_budget < 1) throw ConfigError("per_image_budget must be >= 1");
  std::vector<RegionQuery> out;
  std::vector<int> order;
  for (const auto& sg : grids) {
    const auto& g = sg.grid;
    order.clear();
    for (int t = 0; t < g.tile_count(); ++t)
      if (g.eligible[t]) order.push_back(t);
    const auto better = [&](int a, int b) {
      return g.scores[a] != g.scores[b] ? g.scores[a] > g.scores[b] : a < b;
    };
    const auto take = std::min<std::size_t>(per_image_budget, order.size());
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(), better);
    for (std::size_t k = 0; k < take; ++k) out.push_back({sg.image, g.tile(order[k]), g.scores[order[k]]});
  }
  return out;
}

}  // namespace s4al
