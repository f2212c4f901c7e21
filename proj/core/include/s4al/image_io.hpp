#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "s4al/tensor.hpp"

namespace s4al {

// 8-bit RGB PNG. Values are rounded to the nearest 1/255 step.
void write_png_rgb(const std::filesystem::path& path, const SceneImage& image);
SceneImage read_png_rgb(const std::filesystem::path& path);

// Single-channel 8-bit PNG.
void write_png_gray(const std::filesystem::path& path, int height, int width,
                    const std::vector<std::uint8_t>& values);
void write_png_gray(const std::filesystem::path& path, const LabelMap& labels);
LabelMap read_png_gray(const std::filesystem::path& path);

}  // namespace s4al
