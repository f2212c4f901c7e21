#include <doctest.h>

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "oracles.hpp"
#include "s4al/metrics.hpp"
#include "s4al/rng.hpp"

using namespace s4al;

namespace {

LabelMap row(const std::vector<int>& v) {
  LabelMap m(1, static_cast<int>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) m.labels[i] = v[i] < 0 ? kIgnoreLabel : v[i];
  return m;
}

}  // namespace

TEST_SUITE("metrics") {
  TEST_CASE("confusion [[1,1],[1,1]] gives IoU 1/3 per class") {
    ConfusionMatrix cm(2);
    cm.accumulate(row({0, 1, 0, 1}), row({0, 0, 1, 1}));
    CHECK(cm.at(0, 1) == 1);
    CHECK(cm.total() == 4);
    const auto r = iou(cm);
    CHECK(r.per_class[0] == doctest::Approx(1.0 / 3.0));
    CHECK(r.per_class[1] == doctest::Approx(1.0 / 3.0));
    CHECK(r.mean == doctest::Approx(1.0 / 3.0));
  }

  TEST_CASE("absent classes are excluded from the mean") {
    ConfusionMatrix cm(3);
    cm.accumulate(row({0, 0, 1, 0}), row({0, 0, 1, -1}));
    const auto r = iou(cm);
    CHECK(std::isnan(r.per_class[2]));
    CHECK(r.mean == doctest::Approx(1.0));
    CHECK(std::isnan(iou(ConfusionMatrix(2)).mean));
    CHECK_THROWS_AS(cm.accumulate(row({3}), row({0})), std::logic_error);
  }

  TEST_CASE("IoU equals the set definition and is label-permutation invariant") {
    Rng rng(8);
    for (int trial = 0; trial < 50; ++trial) {
      const int C = 2 + static_cast<int>(rng.index(4));
      const std::size_t n = 1 + rng.index(60);
      std::vector<int> p(n), g(n);
      for (std::size_t i = 0; i < n; ++i) {
        p[i] = static_cast<int>(rng.index(C));
        g[i] = rng.bernoulli(0.1) ? -1 : static_cast<int>(rng.index(C));
      }
      ConfusionMatrix cm(C);
      cm.accumulate(row(p), row(g));
      const auto r = iou(cm);
      const auto expect = oracle::set_iou(p, g, C, -1);
      for (int c = 0; c < C; ++c) {
        if (std::isnan(expect[c]))
          CHECK(std::isnan(r.per_class[c]));
        else
          CHECK(r.per_class[c] == doctest::Approx(expect[c]).epsilon(1e-12));
      }
      std::vector<int> perm(C);
      std::iota(perm.begin(), perm.end(), 0);
      for (int i = C - 1; i > 0; --i) std::swap(perm[i], perm[rng.index(i + 1)]);
      std::vector<int> pp(n), pg(n);
      for (std::size_t i = 0; i < n; ++i) {
        pp[i] = perm[p[i]];
        pg[i] = g[i] < 0 ? -1 : perm[g[i]];
      }
      ConfusionMatrix cm2(C);
      cm2.accumulate(row(pp), row(pg));
      const auto r2 = iou(cm2);
      if (std::isnan(r.mean))
        CHECK(std::isnan(r2.mean));
      else
        CHECK(r2.mean == doctest::Approx(r.mean).epsilon(1e-12));
    }
  }

  TEST_CASE("merging matrices equals accumulating once") {
    ConfusionMatrix a(3), b(3), both(3);
    a.accumulate(row({0, 1, 2}), row({0, 2, 2}));
    b.accumulate(row({1, 1}), row({1, 0}));
    both.accumulate(row({0, 1, 2, 1, 1}), row({0, 2, 2, 1, 0}));
    a.merge(b);
    for (int g = 0; g < 3; ++g)
      for (int p = 0; p < 3; ++p) CHECK(a.at(g, p) == both.at(g, p));
  }

  TEST_CASE("efficiency summary") {
    const std::vector<std::pair<double, double>> pts{{0.10, 0.70}, {0.16, 0.77}};
    CHECK(*efficiency_summary(pts, 0.80) == doctest::Approx(0.16));
    CHECK(!efficiency_summary(pts, 0.90).has_value());
    CHECK(*efficiency_summary(pts, 0.0) == doctest::Approx(0.10));
    CHECK_THROWS_AS(efficiency_summary({}, 0.5), std::invalid_argument);
  }
}
