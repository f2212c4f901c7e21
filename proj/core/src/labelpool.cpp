#include "s4al/labelpool.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "s4al/errors.hpp"
#include "s4al/image_io.hpp"
#include "s4al/rng.hpp"

namespace s4al {

bool is_human_label(Provenance p) { return p == Provenance::ground_truth || p == Provenance::queried; }

double BudgetLedger::human_fraction() const {
  return total_pixels ? static_cast<double>(human_pixels) / static_cast<double>(total_pixels) : 0.0;
}

double BudgetLedger::pseudo_fraction() const {
  return total_pixels ? static_cast<double>(pseudo_pixels) / static_cast<double>(total_pixels) : 0.0;
}

LabelPool LabelPool::init(const std::vector<LabelMap>& ground_truth, double labeled_fraction, std::uint64_t seed) {
  if (ground_truth.empty()) throw ConfigError("label pool needs at least one image");
  if (!(labeled_fraction > 0.0 && labeled_fraction <= 1.0)) throw ConfigError("labeled_fraction must be in (0, 1]");
  const int n = static_cast<int>(ground_truth.size());
  const int n_labeled = static_cast<int>(std::lround(labeled_fraction * n));
  if (n_labeled == 0) throw ConfigError("labeled_fraction selects zero images");

  LabelPool pool;
  pool.height_ = ground_truth.front().height;
  pool.width_ = ground_truth.front().width;
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  Rng rng(derive_seed(seed, {0x9001ULL}));
  for (int i = n - 1; i > 0; --i) std::swap(order[i], order[rng.index(static_cast<std::uint64_t>(i + 1))]);

  pool.initially_labeled_.assign(n, false);
  for (int k = 0; k < n_labeled; ++k) pool.initially_labeled_[order[k]] = true;
  const std::size_t pixels = static_cast<std::size_t>(pool.height_) * pool.width_;
  for (int i = 0; i < n; ++i) {
    const auto& gt = ground_truth[i];
    if (gt.height != pool.height_ || gt.width != pool.width_) throw DataError("label pool images differ in size");
    if (pool.initially_labeled_[i]) {
      pool.provenance_.emplace_back(pixels, Provenance::ground_truth);
      pool.effective_.push_back(gt);
    } else {
      pool.provenance_.emplace_back(pixels, Provenance::unlabeled);
      pool.effective_.emplace_back(pool.height_, pool.width_, kIgnoreLabel);
    }
  }
  return pool;
}

std::vector<int> LabelPool::labeled_images() const {
  std::vector<int> out;
  for (int i = 0; i < size(); ++i)
    if (initially_labeled_[i]) out.push_back(i);
  return out;
}

std::vector<int> LabelPool::unlabeled_images() const {
  std::vector<int> out;
  for (int i = 0; i < size(); ++i)
    if (!initially_labeled_[i]) out.push_back(i);
  return out;
}

LabelMap LabelPool::effective_where(int image, bool (*keep)(Provenance)) const {
  LabelMap out = effective_[image];
  const auto& prov = provenance_[image];
  for (std::size_t i = 0; i < out.pixels(); ++i)
    if (!keep(prov[i])) out.labels[i] = kIgnoreLabel;
  return out;
}

bool LabelPool::has_any_label(int image) const {
  const auto& prov = provenance_[image];
  return std::any_of(prov.begin(), prov.end(), [](Provenance p) { return p != Provenance::unlabeled; });
}

void LabelPool::assign_pseudo(int image, const ProbMap& probs, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) throw ConfigError("pseudo threshold must be in (0, 1)");
  if (probs.height != height_ || probs.width != width_) throw std::logic_error("assign_pseudo: size mismatch");
  if (initially_labeled_[image]) return;
  auto& prov = provenance_[image];
  auto& eff = effective_[image];
  for (std::size_t i = 0; i < prov.size(); ++i) {
    if (prov[i] != Provenance::unlabeled && prov[i] != Provenance::pseudo) continue;
    auto p = probs.pixel(i);
    const auto best = std::max_element(p.begin(), p.end());
    if (*best > threshold) {
      prov[i] = Provenance::pseudo;
      eff.labels[i] = static_cast<std::uint8_t>(best - p.begin());
    } else {
      prov[i] = Provenance::unlabeled;
      eff.labels[i] = kIgnoreLabel;
    }
  }
}

void LabelPool::reveal(const RegionRequest& request, int region_size, const LabelMap& oracle) {
  if (request.image < 0 || request.image >= size()) throw std::logic_error("reveal: image id out of range");
  if (initially_labeled_[request.image]) throw std::logic_error("reveal: tile belongs to the initial labelled set");
  if (region_size < 1 || request.tile.row < 0 || request.tile.col < 0 ||
      (request.tile.row + 1) * region_size > height_ || (request.tile.col + 1) * region_size > width_)
    throw std::logic_error("reveal: tile out of bounds");
  if (oracle.height != height_ || oracle.width != width_) throw std::logic_error("reveal: oracle size mismatch");
  auto& prov = provenance_[request.image];
  auto& eff = effective_[request.image];
  for (int y = request.tile.row * region_size; y < (request.tile.row + 1) * region_size; ++y) {
    for (int x = request.tile.col * region_size; x < (request.tile.col + 1) * region_size; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * width_ + x;
      prov[i] = Provenance::queried;
      eff.labels[i] = oracle.labels[i];
    }
  }
}

BudgetLedger LabelPool::ledger() const {
  BudgetLedger l;
  for (const auto& prov : provenance_) {
    l.total_pixels += prov.size();
    for (auto p : prov) {
      if (is_human_label(p)) ++l.human_pixels;
      if (p == Provenance::queried) ++l.queried_pixels;
      if (p == Provenance::pseudo) ++l.pseudo_pixels;
    }
  }
  return l;
}

std::optional<double> LabelPool::pseudo_precision(const std::vector<LabelMap>& oracle) const {
  std::size_t hit = 0, total = 0;
  for (int img = 0; img < size(); ++img) {
    const auto& prov = provenance_[img];
    for (std::size_t i = 0; i < prov.size(); ++i) {
      if (prov[i] != Provenance::pseudo) continue;
      ++total;
      if (effective_[img].labels[i] == oracle[img].labels[i]) ++hit;
    }
  }
  if (total == 0) return std::nullopt;
  return static_cast<double>(hit) / static_cast<double>(total);
}

void LabelPool::write_snapshot(const std::filesystem::path& dir) const {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw DataError("cannot create " + dir.string() + ": " + ec.message());
  char name[48];
  for (int img = 0; img < size(); ++img) {
    std::vector<std::uint8_t> prov(provenance_[img].size());
    std::transform(provenance_[img].begin(), provenance_[img].end(), prov.begin(),
                   [](Provenance p) { return static_cast<std::uint8_t>(p); });
    std::snprintf(name, sizeof(name), "provenance_%04d.png", img);
    write_png_gray(dir / name, height_, width_, prov);
    std::snprintf(name, sizeof(name), "labels_%04d.png", img);
    write_png_gray(dir / name, effective_[img]);
  }
}

}  // namespace s4al
