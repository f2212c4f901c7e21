#pragma once

#include "s4al/rng.hpp"
#include "s4al/tensor.hpp"

namespace s4al {

enum class AugmentMode { weak, strong };

struct AugmentedPair {
  SceneImage image;
  LabelMap labels;
};

// weak: nearest-neighbour rescale by s in [0.75, 1.25] then random crop or
// zero/ignore pad back to the original size, plus horizontal flip (p = 0.5).
// Geometry only; output pixels are input pixels or zero padding.
// strong: weak + colour jitter (brightness, contrast, saturation +-0.3),
// Gaussian blur (p = 0.5), and one CutOut square of side min(H, W) / 4 whose
// pixels are zeroed and whose labels become ignore.
AugmentedPair augment(const SceneImage& image, const LabelMap& labels, AugmentMode mode, Rng& rng);

// Building blocks, exposed for testing.
AugmentedPair hflip(const SceneImage& image, const LabelMap& labels);
AugmentedPair rescale_crop(const SceneImage& image, const LabelMap& labels, double scale, int offset_y,
                           int offset_x);
void color_jitter(SceneImage& image, double brightness, double contrast, double saturation);
void gaussian_blur(SceneImage& image, double sigma);
void cutout(SceneImage& image, LabelMap& labels, int top, int left, int side);

}  // namespace s4al
