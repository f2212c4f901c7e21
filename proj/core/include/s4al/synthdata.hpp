#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "s4al/tensor.hpp"

namespace s4al {

struct GenerationParams {
  int height = 64;
  int width = 64;
  int num_classes = 6;
  // Expected number of shapes per non-background class per image.
  double shape_density = 1.5;
  // Per-pixel, per-channel Gaussian colour noise.
  double color_noise = 0.10;

  void validate() const;
  bool operator==(const GenerationParams&) const = default;
};

struct Scene {
  SceneImage image;
  LabelMap labels;
};

// Mean RGB of a class. The last two classes are deliberately close in colour
// so the dataset contains a confusable class pair.
std::array<double, 3> class_color(int label, int num_classes);

// Background class 0 plus axis-aligned rectangles and ellipses, later shapes
// occluding earlier ones. Pixel values are quantised to multiples of 1/255 so
// a PNG round trip is lossless.
Scene generate_scene(std::uint64_t seed, const GenerationParams& params);

struct DatasetManifest {
  std::uint64_t seed = 0;
  // Bumped when a candidate dataset fails the class-coverage check.
  std::uint64_t salt = 0;
  int n_train = 0;
  int n_val = 0;
  GenerationParams params;
  std::vector<std::uint64_t> image_seeds;
  std::vector<int> train_ids;
  std::vector<int> val_ids;

  std::string to_json() const;
  static DatasetManifest from_json(const std::string& text);
};

struct Dataset {
  DatasetManifest manifest;
  std::vector<Scene> scenes;  // indexed by image id

  const Scene& train(int k) const { return scenes[manifest.train_ids[k]]; }
  const Scene& val(int k) const { return scenes[manifest.val_ids[k]]; }
};

inline constexpr double kMinClassFrequency = 0.01;

std::uint64_t image_seed(std::uint64_t master_seed, std::uint64_t salt, int index);

std::vector<double> class_histogram(const std::vector<Scene>& scenes, int num_classes);

// Ids [0, n_train) are train, [n_train, n_train + n_val) are validation.
Dataset generate_dataset(std::uint64_t master_seed, int n_train, int n_val, const GenerationParams& params);

// Rebuilds every scene from the manifest's per-image seeds.
Dataset regenerate(const DatasetManifest& manifest);

// images/img_XXXX.png, labels/lbl_XXXX.png, manifest.json
std::filesystem::path write_dataset(const Dataset& dataset, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);

}  // namespace s4al
