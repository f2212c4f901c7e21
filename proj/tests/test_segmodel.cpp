#include <doctest.h>

#include <cmath>
#include <fstream>

#include "gradcheck.hpp"
#include "oracles.hpp"
#include "s4al/augment.hpp"
#include "s4al/checkpoint.hpp"
#include "s4al/errors.hpp"
#include "s4al/layers.hpp"
#include "s4al/optimizer.hpp"
#include "s4al/segmodel.hpp"
#include "s4al/synthdata.hpp"
#include "test_paths.hpp"

using namespace s4al;

namespace {

SceneImage random_image(int h, int w, Rng& rng) {
  SceneImage img(h, w, 3);
  for (auto& v : img.values) v = rng.uniform();
  return img;
}

}  // namespace

TEST_SUITE("segmodel") {
  TEST_CASE("conv3x3 matches a direct convolution") {
    Rng rng(3);
    const int cin = 2, cout = 3, h = 5, w = 6;
    nn::FeatureMap in(cin, h, w);
    for (auto& v : in.values) v = rng.normal();
    std::vector<double> weight(cout * cin * 9), bias(cout);
    for (auto& v : weight) v = rng.normal();
    for (auto& v : bias) v = rng.normal();
    for (int stride : {1, 2}) {
      nn::FeatureMap out;
      std::vector<double> cols;
      nn::conv3x3_forward(in, weight, bias, cout, stride, out, cols);
      const int oh = nn::conv3x3_out_size(h, stride), ow = nn::conv3x3_out_size(w, stride);
      REQUIRE(out.height == oh);
      REQUIRE(out.width == ow);
      for (int o = 0; o < cout; ++o)
        for (int y = 0; y < oh; ++y)
          for (int x = 0; x < ow; ++x) {
            double s = bias[o];
            for (int c = 0; c < cin; ++c)
              for (int ky = 0; ky < 3; ++ky)
                for (int kx = 0; kx < 3; ++kx) {
                  const int iy = y * stride + ky - 1, ix = x * stride + kx - 1;
                  if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
                  s += weight[((o * cin + c) * 3 + ky) * 3 + kx] * in.values[(c * h + iy) * w + ix];
                }
            CHECK(out.values[(o * oh + y) * ow + x] == doctest::Approx(s).epsilon(1e-12));
          }
    }
  }

  TEST_CASE("bilinear upsampling preserves constants and is adjoint to its backward") {
    Rng rng(5);
    nn::FeatureMap in(2, 3, 4, 1.5);
    nn::FeatureMap out;
    nn::upsample_bilinear_forward(in, 6, 8, out);
    for (double v : out.values) CHECK(v == doctest::Approx(1.5));
    for (auto& v : in.values) v = rng.normal();
    nn::upsample_bilinear_forward(in, 6, 8, out);
    nn::FeatureMap g(2, 6, 8);
    for (auto& v : g.values) v = rng.normal();
    nn::FeatureMap din;
    nn::upsample_bilinear_backward(g, 3, 4, din);
    double lhs = 0.0, rhs = 0.0;
    for (std::size_t i = 0; i < out.values.size(); ++i) lhs += out.values[i] * g.values[i];
    for (std::size_t i = 0; i < in.values.size(); ++i) rhs += in.values[i] * din.values[i];
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
  }

  TEST_CASE("forward shapes, unit embeddings and softmax rows") {
    ArchConfig arch;
    const auto params = init_model(1, arch);
    Rng rng(2);
    const auto img = random_image(16, 24, rng);
    const auto pass = forward(params, img, false);
    CHECK(pass.logits.height == 16);
    CHECK(pass.logits.width == 24);
    CHECK(pass.logits.channels == arch.num_classes);
    CHECK(pass.embeddings.channels == arch.embed_dim);
    for (std::size_t i = 0; i < pass.embeddings.pixels(); ++i) {
      double n = 0.0;
      for (double v : pass.embeddings.pixel(i)) n += v * v;
      CHECK(n == doctest::Approx(1.0).epsilon(1e-12));
    }
    const auto probs = softmax_probs(pass.logits);
    for (std::size_t i = 0; i < probs.pixels(); ++i) {
      double s = 0.0;
      for (double v : probs.pixel(i)) s += v;
      CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
    }
  }

  TEST_CASE("softmax of (ln 2, 0) is (2/3, 1/3)") {
    LogitMap l(1, 1, 2);
    l.values = {std::log(2.0), 0.0};
    const auto p = softmax_probs(l);
    CHECK(p.values[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    CHECK(p.values[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    l.values = {1000.0, 1000.0 - std::log(2.0)};
    const auto q = softmax_probs(l);
    CHECK(q.values[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  }

  TEST_CASE("noise-free forward is deterministic; dropout changes outputs") {
    const auto params = init_model(4, ArchConfig{});
    Rng rng(9);
    const auto img = random_image(16, 16, rng);
    const auto a = forward(params, img, false);
    const auto b = forward(params, img, false);
    CHECK(a.logits.values == b.logits.values);
    Rng noise(1);
    const auto c = forward(params, img, true, &noise);
    CHECK(c.logits.values != a.logits.values);
    CHECK_THROWS(forward(params, img, true, nullptr));
  }

  TEST_CASE("initialisation is deterministic and validates the architecture") {
    ArchConfig arch;
    const auto a = init_model(3, arch), b = init_model(3, arch), c = init_model(4, arch);
    for (std::size_t t = 0; t < a.tensors.size(); ++t) CHECK(a.tensors[t].values == b.tensors[t].values);
    CHECK(a.tensors[0].values != c.tensors[0].values);
    arch.embed_dim = 2;
    CHECK_NOTHROW(init_model(1, arch));
    arch.embed_dim = 1;
    CHECK_THROWS_AS(init_model(1, arch), ConfigError);
    arch = {};
    arch.num_classes = 1;
    CHECK_THROWS_AS(init_model(1, arch), ConfigError);
  }

  TEST_CASE("64x64 input gives 64x64 logits and embeddings") {
    const auto params = init_model(1, ArchConfig{});
    Rng rng(1);
    const auto pass = forward(params, random_image(64, 64, rng), false);
    CHECK(pass.logits.height == 64);
    CHECK(pass.logits.width == 64);
    CHECK(pass.logits.channels == 6);
    CHECK(pass.embeddings.height == 64);
    CHECK(pass.embeddings.channels == 16);
  }

  TEST_CASE("dropout rate zero makes the noisy pass deterministic") {
    ArchConfig arch;
    arch.dropout = 0.0;
    const auto params = init_model(2, arch);
    Rng rng(3);
    const auto img = random_image(16, 16, rng);
    Rng noise(4);
    CHECK(forward(params, img, true, &noise).logits.values == forward(params, img, false).logits.values);
  }

  TEST_CASE("softmax is stable for large logits and uniform for equal ones") {
    LogitMap l(1, 2, 2);
    l.values = {1000.0, 0.0, 3.0, 3.0};
    const auto p = softmax_probs(l);
    CHECK(p.values[0] == 1.0);
    CHECK(p.values[1] == doctest::Approx(0.0));
    CHECK(p.values[2] == doctest::Approx(0.5));
  }

  TEST_CASE("flipping twice restores the labels") {
    const auto scene = generate_scene(3, GenerationParams{});
    const auto once = hflip(scene.image, scene.labels);
    const auto twice = hflip(once.image, once.labels);
    CHECK(twice.labels.labels == scene.labels.labels);
    CHECK(twice.image.values == scene.image.values);
  }

  TEST_CASE("cutout leaves everything outside the square untouched") {
    const auto scene = generate_scene(4, GenerationParams{});
    SceneImage img = scene.image;
    LabelMap lab = scene.labels;
    cutout(img, lab, 10, 20, 16);
    for (int y = 0; y < 64; ++y)
      for (int x = 0; x < 64; ++x) {
        const bool inside = y >= 10 && y < 26 && x >= 20 && x < 36;
        CHECK(lab.at(y, x) == (inside ? kIgnoreLabel : scene.labels.at(y, x)));
        if (!inside) CHECK(img.at(y, x, 0) == scene.image.at(y, x, 0));
      }
  }

  TEST_CASE("input size must be a multiple of 8") {
    const auto params = init_model(4, ArchConfig{});
    SceneImage img(12, 16, 3);
    CHECK_THROWS_AS(forward(params, img, false), ConfigError);
  }

  TEST_CASE("non-finite input raises a numerical error") {
    const auto params = init_model(4, ArchConfig{});
    SceneImage img(8, 8, 3, 0.5);
    img.values[5] = std::nan("");
    CHECK_THROWS_AS(forward(params, img, false), NumericalError);
  }

  TEST_CASE("parameter gradients match finite differences") {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
      const auto r = testing::check_model_gradients(seed);
      CHECK(r.checked > 1000);
      CHECK(r.failed == 0);
      CHECK(r.worst_relative_error < 1e-4);
    }
  }

  TEST_CASE("augmentation keeps image and labels aligned") {
    GenerationParams p;
    p.color_noise = 0.0;
    const auto scene = generate_scene(12, p);
    Rng rng(6);
    for (int trial = 0; trial < 20; ++trial) {
      const auto weak = augment(scene.image, scene.labels, AugmentMode::weak, rng);
      REQUIRE(weak.image.same_shape(scene.image));
      for (std::size_t i = 0; i < weak.labels.pixels(); ++i) {
        const auto l = weak.labels.labels[i];
        if (l == kIgnoreLabel) {
          for (int c = 0; c < 3; ++c) CHECK(weak.image.values[i * 3 + c] == 0.0);
          continue;
        }
        const auto col = class_color(l, p.num_classes);
        for (int c = 0; c < 3; ++c) CHECK(std::abs(weak.image.values[i * 3 + c] - col[c]) < 0.5 / 255.0 + 1e-12);
      }
    }
  }

  TEST_CASE("strong augmentation ignores the cutout square") {
    GenerationParams p;
    const auto scene = generate_scene(13, p);
    Rng rng(7);
    const auto s = augment(scene.image, scene.labels, AugmentMode::strong, rng);
    std::size_t ignored = 0;
    for (auto l : s.labels.labels) ignored += l == kIgnoreLabel;
    CHECK(ignored >= 16u * 16u);
    for (double v : s.image.values) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }

  TEST_CASE("augmentation building blocks") {
    SceneImage img(2, 3, 3);
    for (std::size_t i = 0; i < img.values.size(); ++i) img.values[i] = static_cast<double>(i) / 20.0;
    LabelMap lab(2, 3, 0);
    lab.labels = {0, 1, 2, 3, 4, 5};
    const auto f = hflip(img, lab);
    CHECK(f.labels.labels == std::vector<std::uint8_t>{2, 1, 0, 5, 4, 3});
    CHECK(f.image.at(0, 0, 1) == img.at(0, 2, 1));
    const auto id = rescale_crop(img, lab, 1.0, 0, 0);
    CHECK(id.labels.labels == lab.labels);
    CHECK(id.image.values == img.values);
    SceneImage blurred = img;
    gaussian_blur(blurred, 0.0);
    CHECK(blurred.values == img.values);
    SceneImage jit = img;
    color_jitter(jit, 1.0, 1.0, 1.0);
    for (std::size_t i = 0; i < img.values.size(); ++i) CHECK(jit.values[i] == doctest::Approx(img.values[i]));
    SceneImage cut = img;
    LabelMap cutl = lab;
    cutout(cut, cutl, 0, 1, 1);
    CHECK(cutl.at(0, 1) == kIgnoreLabel);
    CHECK(cut.at(0, 1, 2) == 0.0);
    CHECK(cutl.at(1, 1) == 4);
  }

  TEST_CASE("poly schedule and momentum SGD") {
    CHECK(poly_learning_rate(0.1, 0, 100, 0.9) == doctest::Approx(0.1));
    CHECK(poly_learning_rate(0.1, 50, 100, 0.9) == doctest::Approx(0.1 * std::pow(0.5, 0.9)));
    CHECK(poly_learning_rate(0.1, 100, 100, 0.9) == doctest::Approx(0.0));

    ArchConfig arch = testing::tiny_arch();
    ModelParams w = init_model(1, arch);
    const ModelParams w0 = w;
    ModelParams g = w.zeros_like();
    g.fill(1.0);
    OptimizerConfig cfg;
    cfg.weight_decay = 0.0;
    SgdMomentum opt(w, cfg);
    opt.step(w, g, 0.1);  // v = 1
    opt.step(w, g, 0.1);  // v = 1.9
    for (std::size_t i = 0; i < w.size(); i += 97) CHECK(w.flat(i) == doctest::Approx(w0.flat(i) - 0.29));
  }

  TEST_CASE("checkpoint round trip is exact") {
    const auto dir = test_dir("checkpoint");
    const auto params = init_model(8, ArchConfig{});
    save_checkpoint(dir / "m.ckpt", params, "{\"x\":1}");
    const auto ck = load_checkpoint(dir / "m.ckpt");
    CHECK(ck.config_echo == "{\"x\":1}");
    CHECK(ck.params.arch == params.arch);
    REQUIRE(ck.params.tensors.size() == params.tensors.size());
    for (std::size_t t = 0; t < params.tensors.size(); ++t) CHECK(ck.params.tensors[t].values == params.tensors[t].values);
    CHECK_THROWS_AS(load_checkpoint(dir / "missing.ckpt"), DataError);
    {
      std::ofstream bad(dir / "bad.ckpt", std::ios::binary);
      bad << "NOTACKPT";
    }
    CHECK_THROWS_AS(load_checkpoint(dir / "bad.ckpt"), DataError);
  }
}
