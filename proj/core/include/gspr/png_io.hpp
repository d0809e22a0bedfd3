#pragma once

#include <filesystem>

#include "gspr/image.hpp"

namespace gspr {

// 8-bit RGB(A)/gray PNG -> [0,1] RGB image.
Image read_png_rgb(const std::filesystem::path& path);
void write_png_rgb(const Image& image, const std::filesystem::path& path);

// 16-bit (or 8-bit) single-channel PNG of class ids.
SemanticMap read_png_labels(const std::filesystem::path& path);
void write_png_labels(const SemanticMap& labels, const std::filesystem::path& path);

// Mask as 8-bit gray PNG (0 / 255).
void write_png_mask(const Mask& mask, const std::filesystem::path& path);

}  // namespace gspr
