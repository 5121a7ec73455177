#pragma once

#include "tlgan/image.hpp"

#include <string>

namespace tlgan {

/// Load a PNG or JPEG (by extension, falling back to content sniffing)
/// into an 8-bit image with 1 or 3 channels. Throws DataError on failure.
RasterImage load_image(const std::string& path);

/// Write an 8-bit image as PNG. Output carries no timestamps so identical
/// pixels produce identical bytes.
void save_png(const RasterImage& img, const std::string& path);

/// Write an 8-bit image as JPEG (quality 0-100).
void save_jpeg(const RasterImage& img, const std::string& path, int quality = 95);

}  // namespace tlgan
