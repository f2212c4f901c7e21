#include <benchmark/benchmark.h>

#include "s4al/alquery.hpp"
#include "s4al/losses.hpp"
#include "s4al/rng.hpp"
#include "s4al/segmodel.hpp"
#include "s4al/synthdata.hpp"

using namespace s4al;

namespace {

void BM_Forward(benchmark::State& state) {
  const auto params = init_model(1, ArchConfig{});
  const auto scene = generate_scene(1, GenerationParams{});
  for (auto _ : state) benchmark::DoNotOptimize(forward(params, scene.image, false));
}
BENCHMARK(BM_Forward)->Unit(benchmark::kMillisecond);

void BM_ForwardBackward(benchmark::State& state) {
  const auto params = init_model(1, ArchConfig{});
  const auto scene = generate_scene(1, GenerationParams{});
  ModelParams grads = params.zeros_like();
  Rng rng(1);
  RecoConfig cfg;
  for (auto _ : state) {
    const auto pass = forward(params, scene.image, true, &rng);
    const auto loss = total_loss(pass.logits, pass.embeddings, scene.labels, softmax_probs(pass.logits), cfg, rng);
    backward(params, pass, loss.dlogits, loss.dembeddings, grads);
  }
}
BENCHMARK(BM_ForwardBackward)->Unit(benchmark::kMillisecond);

void BM_RecoLoss(benchmark::State& state) {
  // Six-image batch of 64x64 embeddings, default sampling sizes.
  GenerationParams gp;
  gp.height = 6 * 64;
  const auto scene = generate_scene(2, gp);
  Rng rng(2);
  EmbeddingMap emb(scene.labels.height, scene.labels.width, 16);
  for (std::size_t i = 0; i < emb.pixels(); ++i) {
    double s = 0.0;
    for (auto& v : emb.pixel(i)) s += (v = rng.normal()) * v;
    for (auto& v : emb.pixel(i)) v /= std::sqrt(s);
  }
  ProbMap probs(emb.height, emb.width, gp.num_classes, 1.0 / gp.num_classes);
  RecoConfig cfg;
  for (auto _ : state) {
    const auto sample = build_reco_sample(emb, scene.labels, probs, cfg, rng);
    benchmark::DoNotOptimize(reco_loss(sample, emb, cfg));
  }
}
BENCHMARK(BM_RecoLoss)->Unit(benchmark::kMillisecond);

void BM_SelectRegions(benchmark::State& state) {
  // 108 unlabelled 64x64 images, 8x8 tiles.
  Rng rng(3);
  std::vector<ScoredGrid> grids;
  for (int i = 0; i < 108; ++i) {
    auto g = RegionGrid::make(64, 64, 8);
    for (auto& s : g.scores) s = rng.uniform();
    g.eligible.assign(g.tile_count(), true);
    grids.push_back({i, g});
  }
  for (auto _ : state) benchmark::DoNotOptimize(select_regions(grids, 4));
}
BENCHMARK(BM_SelectRegions);

}  // namespace

BENCHMARK_MAIN();
