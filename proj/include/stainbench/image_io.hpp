#pragma once

#include <filesystem>
#include <vector>

#include "stainbench/tensor.hpp"

namespace stainbench {

/// Decodes a PNG into a (1, 3, h, w) float tensor scaled to [0, 1].
/// Grayscale, palette and alpha variants are normalized to 8-bit RGB on load.
Tensor load_image(const std::filesystem::path& path);

/// Encodes a (1, 3, h, w) tensor as 8-bit RGB PNG; values are clamped to
/// [0, 1] and rounded, so save followed by load is exact up to 1/255.
void save_image(const Tensor& image, const std::filesystem::path& path);

/// Sorted list of *.png files directly inside `dir`.
std::vector<std::filesystem::path> list_pngs(const std::filesystem::path& dir);

/// Loads every PNG in `dir`, sorted by filename.
std::vector<Tensor> load_image_dir(const std::filesystem::path& dir);

}  // namespace stainbench
