#include "s4al/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "s4al/errors.hpp"
#include "s4al/image_io.hpp"
#include "s4al/rng.hpp"

namespace s4al {
namespace {

constexpr int kMaxCoverageAttempts = 32;

std::array<double, 3> hsv_to_rgb(double h, double s, double v) {
  const double hh = std::fmod(h, 1.0) * 6.0;
  const int sector = static_cast<int>(hh);
  const double f = hh - sector;
  const double p = v * (1 - s), q = v * (1 - s * f), t = v * (1 - s * (1 - f));
  switch (sector) {
    case 0: return {v, t, p};
    case 1: return {q, v, p};
    case 2: return {p, v, t};
    case 3: return {p, q, v};
    case 4: return {t, p, v};
    default: return {v, p, q};
  }
}

double quantize(double v) { return std::round(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0; }

struct Shape {
  int label;
  bool ellipse;
  double cx, cy, rx, ry;

  bool contains(int y, int x) const {
    const double dx = (x + 0.5 - cx) / rx;
    const double dy = (y + 0.5 - cy) / ry;
    if (ellipse) return dx * dx + dy * dy <= 1.0;
    return std::abs(dx) <= 1.0 && std::abs(dy) <= 1.0;
  }
};

std::string image_name(const char* prefix, int id) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s_%04d.png", prefix, id);
  return buf;
}

}  // namespace

void GenerationParams::validate() const {
  if (height < 32 || width < 32) throw ConfigError("dataset height and width must be >= 32");
  if (num_classes < 2 || num_classes > 32) throw ConfigError("num_classes must be in [2, 32]");
  if (!(shape_density >= 0.0) || shape_density > 16.0) throw ConfigError("shape_density must be in [0, 16]");
  if (!(color_noise >= 0.0) || color_noise > 1.0) throw ConfigError("color_noise must be in [0, 1]");
}

std::array<double, 3> class_color(int label, int num_classes) {
  if (label == 0) return {0.5, 0.5, 0.5};
  // Classes 1..C-2 are spread around the hue circle; class C-1 shadows C-2.
  const int spread = std::max(1, num_classes - 2);
  if (num_classes >= 3 && label == num_classes - 1) {
    auto base = class_color(num_classes - 2, num_classes);
    return {std::clamp(base[0] + 0.10, 0.0, 1.0), std::clamp(base[1] - 0.08, 0.0, 1.0),
            std::clamp(base[2] + 0.06, 0.0, 1.0)};
  }
  return hsv_to_rgb(static_cast<double>(label - 1) / spread, 0.75, 0.85);
}

Scene generate_scene(std::uint64_t seed, const GenerationParams& params) {
  params.validate();
  Rng rng(seed);
  const int h = params.height, w = params.width;

  std::vector<int> draw_labels;
  const double whole = std::floor(params.shape_density);
  const double frac = params.shape_density - whole;
  for (int c = 1; c < params.num_classes; ++c) {
    int count = static_cast<int>(whole) + (rng.bernoulli(frac) ? 1 : 0);
    for (int k = 0; k < count; ++k) draw_labels.push_back(c);
  }
  for (std::size_t i = draw_labels.size(); i > 1; --i) {
    std::swap(draw_labels[i - 1], draw_labels[rng.index(i)]);
  }

  const double min_extent = std::max(1.0, std::min(h, w) / 16.0);
  const double max_extent = std::max(min_extent, std::min(h, w) / 6.0);
  std::vector<Shape> shapes;
  for (int label : draw_labels) {
    Shape s;
    s.label = label;
    s.ellipse = rng.bernoulli(0.5);
    s.cx = rng.uniform(0.0, w);
    s.cy = rng.uniform(0.0, h);
    s.rx = rng.uniform(min_extent, max_extent);
    s.ry = rng.uniform(min_extent, max_extent);
    shapes.push_back(s);
  }

  Scene scene{SceneImage(h, w, 3), LabelMap(h, w, 0)};
  for (const auto& s : shapes) {
    const int y0 = std::max(0, static_cast<int>(std::floor(s.cy - s.ry)));
    const int y1 = std::min(h - 1, static_cast<int>(std::ceil(s.cy + s.ry)));
    const int x0 = std::max(0, static_cast<int>(std::floor(s.cx - s.rx)));
    const int x1 = std::min(w - 1, static_cast<int>(std::ceil(s.cx + s.rx)));
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x)
        if (s.contains(y, x)) scene.labels.at(y, x) = static_cast<std::uint8_t>(s.label);
  }

  std::vector<std::array<double, 3>> palette(params.num_classes);
  for (int c = 0; c < params.num_classes; ++c) palette[c] = class_color(c, params.num_classes);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const auto& mean = palette[scene.labels.at(y, x)];
      for (int ch = 0; ch < 3; ++ch)
        scene.image.at(y, x, ch) = quantize(mean[ch] + params.color_noise * rng.normal());
    }
  }
  return scene;
}

std::uint64_t image_seed(std::uint64_t master_seed, std::uint64_t salt, int index) {
  return derive_seed(master_seed, {0x5ce4e5ULL, salt, static_cast<std::uint64_t>(index)});
}

std::vector<double> class_histogram(const std::vector<Scene>& scenes, int num_classes) {
  std::vector<double> counts(num_classes, 0.0);
  double total = 0.0;
  for (const auto& s : scenes) {
    for (auto l : s.labels.labels) {
      if (l < num_classes) counts[l] += 1.0;
    }
    total += static_cast<double>(s.labels.pixels());
  }
  if (total > 0)
    for (auto& c : counts) c /= total;
  return counts;
}

Dataset regenerate(const DatasetManifest& manifest) {
  Dataset ds;
  ds.manifest = manifest;
  ds.scenes.reserve(manifest.image_seeds.size());
  for (auto s : manifest.image_seeds) ds.scenes.push_back(generate_scene(s, manifest.params));
  return ds;
}

Dataset generate_dataset(std::uint64_t master_seed, int n_train, int n_val, const GenerationParams& params) {
  params.validate();
  if (n_train < 1 || n_val < 1) throw ConfigError("n_train and n_val must be >= 1");
  for (int attempt = 0; attempt < kMaxCoverageAttempts; ++attempt) {
    DatasetManifest m;
    m.seed = master_seed;
    m.salt = static_cast<std::uint64_t>(attempt);
    m.n_train = n_train;
    m.n_val = n_val;
    m.params = params;
    for (int i = 0; i < n_train + n_val; ++i) {
      m.image_seeds.push_back(image_seed(master_seed, m.salt, i));
      (i < n_train ? m.train_ids : m.val_ids).push_back(i);
    }
    Dataset ds = regenerate(m);
    // Degenerate densities cannot satisfy coverage; the caller asked for them.
    if (params.shape_density == 0.0) return ds;
    auto hist = class_histogram(ds.scenes, params.num_classes);
    if (std::all_of(hist.begin(), hist.end(), [](double f) { return f >= kMinClassFrequency; })) return ds;
  }
  throw ConfigError("could not generate a dataset with every class above 1% pixel frequency");
}

std::string DatasetManifest::to_json() const {
  nlohmann::ordered_json j;
  j["seed"] = seed;
  j["salt"] = salt;
  j["n_train"] = n_train;
  j["n_val"] = n_val;
  j["params"] = {{"height", params.height},
                 {"width", params.width},
                 {"num_classes", params.num_classes},
                 {"shape_density", params.shape_density},
                 {"color_noise", params.color_noise}};
  j["image_seeds"] = image_seeds;
  j["train_ids"] = train_ids;
  j["val_ids"] = val_ids;
  return j.dump(2);
}

DatasetManifest DatasetManifest::from_json(const std::string& text) {
  try {
    auto j = nlohmann::json::parse(text);
    DatasetManifest m;
    m.seed = j.at("seed").get<std::uint64_t>();
    m.salt = j.at("salt").get<std::uint64_t>();
    m.n_train = j.at("n_train").get<int>();
    m.n_val = j.at("n_val").get<int>();
    const auto& p = j.at("params");
    m.params.height = p.at("height").get<int>();
    m.params.width = p.at("width").get<int>();
    m.params.num_classes = p.at("num_classes").get<int>();
    m.params.shape_density = p.at("shape_density").get<double>();
    m.params.color_noise = p.at("color_noise").get<double>();
    m.image_seeds = j.at("image_seeds").get<std::vector<std::uint64_t>>();
    m.train_ids = j.at("train_ids").get<std::vector<int>>();
    m.val_ids = j.at("val_ids").get<std::vector<int>>();
    if (m.image_seeds.size() != static_cast<std::size_t>(m.n_train + m.n_val) ||
        m.train_ids.size() != static_cast<std::size_t>(m.n_train) ||
        m.val_ids.size() != static_cast<std::size_t>(m.n_val))
      throw DataError("manifest: inconsistent image counts");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("manifest: ") + e.what());
  }
}

std::filesystem::path write_dataset(const Dataset& dataset, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir / "images", ec);
  fs::create_directories(dir / "labels", ec);
  if (ec) throw DataError("cannot create dataset directory " + dir.string() + ": " + ec.message());
  for (std::size_t i = 0; i < dataset.scenes.size(); ++i) {
    write_png_rgb(dir / "images" / image_name("img", static_cast<int>(i)), dataset.scenes[i].image);
    write_png_gray(dir / "labels" / image_name("lbl", static_cast<int>(i)), dataset.scenes[i].labels);
  }
  const auto manifest_path = dir / "manifest.json";
  std::ofstream out(manifest_path);
  if (!out) throw DataError("cannot write " + manifest_path.string());
  out << dataset.manifest.to_json() << "\n";
  if (!out) throw DataError("cannot write " + manifest_path.string());
  return manifest_path;
}

Dataset load_dataset(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw DataError("missing manifest.json in " + dir.string());
  std::stringstream ss;
  ss << in.rdbuf();
  Dataset ds;
  ds.manifest = DatasetManifest::from_json(ss.str());
  const int n = ds.manifest.n_train + ds.manifest.n_val;
  for (int i = 0; i < n; ++i) {
    Scene s{read_png_rgb(dir / "images" / image_name("img", i)),
            read_png_gray(dir / "labels" / image_name("lbl", i))};
    if (s.image.height != ds.manifest.params.height || s.image.width != ds.manifest.params.width ||
        s.labels.height != s.image.height || s.labels.width != s.image.width)
      throw DataError("image " + std::to_string(i) + " does not match manifest dimensions");
    ds.scenes.push_back(std::move(s));
  }
  return ds;
}

}  // namespace s4al
