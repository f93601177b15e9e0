#pragma once

#include <filesystem>

#include "emap/tensor/tensor.hpp"

namespace emap {

/// Writes an H x W plane of [0,1] values as binary PGM (P5). maxval 255 or
/// 65535; values are clamped and rounded to the nearest level.
void write_pgm(const std::filesystem::path& path, const float* values, std::size_t h, std::size_t w,
               unsigned maxval = 255);

/// Reads an 8- or 16-bit binary PGM, or an 8-bit grayscale PNG when built
/// with libpng. Returns (1, 1, H, W) scaled to [0,1].
Tensor read_gray_image(const std::filesystem::path& path);

bool png_supported() noexcept;

}  // namespace emap
