#pragma once

#include <filesystem>

#include "skelbench/image.hpp"

namespace skelbench {

// Decodes any PNG bit depth / color type. A pixel is foreground iff its
// luminance is >= 128 on the 0-255 scale (BT.601 weights for RGB).
BinaryMask load_png(const std::filesystem::path& path);

// 8-bit grayscale, non-interlaced; foreground = 255, background = 0.
void save_png(const BinaryMask& mask, const std::filesystem::path& path);

} // namespace skelbench
