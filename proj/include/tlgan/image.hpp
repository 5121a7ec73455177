#pragma once

#include "tlgan/types.hpp"

#include <cstdint>
#include <vector>

namespace tlgan {

/// H x W x C raster with either 8-bit or float-in-[0,1] samples,
/// interleaved row-major. C is 1 (gray) or 3 (RGB).
struct RasterImage {
    enum class Kind { U8, F32 };

    Kind kind = Kind::U8;
    int width = 0;
    int height = 0;
    int channels = 1;
    std::vector<std::uint8_t> bytes;  // Kind::U8
    std::vector<float> floats;        // Kind::F32

    static RasterImage u8(int height, int width, int channels, std::uint8_t fill = 0) {
        RasterImage img;
        img.kind = Kind::U8;
        img.height = height;
        img.width = width;
        img.channels = channels;
        img.bytes.assign(static_cast<size_t>(height) * width * channels, fill);
        return img;
    }

    static RasterImage f32(int height, int width, int channels, float fill = 0.0f) {
        RasterImage img;
        img.kind = Kind::F32;
        img.height = height;
        img.width = width;
        img.channels = channels;
        img.floats.assign(static_cast<size_t>(height) * width * channels, fill);
        return img;
    }

    std::uint8_t& at8(int y, int x, int c = 0) {
        return bytes[(static_cast<size_t>(y) * width + x) * channels + c];
    }
    std::uint8_t at8(int y, int x, int c = 0) const {
        return bytes[(static_cast<size_t>(y) * width + x) * channels + c];
    }
    float& atf(int y, int x, int c = 0) {
        return floats[(static_cast<size_t>(y) * width + x) * channels + c];
    }
    float atf(int y, int x, int c = 0) const {
        return floats[(static_cast<size_t>(y) * width + x) * channels + c];
    }

    /// Sample intensity in [0,255] regardless of kind, luma-converted when RGB.
    double luma255(int y, int x) const;

    bool empty() const { return width == 0 || height == 0; }
};

/// Luma-converted single-channel intensities in [0,255] as a dense array.
ArrayXX<float> to_gray255(const RasterImage& img);

/// Gray [0,255] array back into an 8-bit single-channel image (rounded, clamped).
RasterImage gray255_to_u8(const ArrayXX<float>& gray);

/// Bilinear resize of a raster image to the given size. Kind and channel
/// count are preserved; both dims must be >= 1.
RasterImage resize_bilinear(const RasterImage& img, int target_w, int target_h);

/// 8-bit quantization of a heat map, value = round(255 * v). Used for the
/// golden-file and cache formats.
RasterImage heatmap_to_u8(const HeatMap& map);

/// Inverse of heatmap_to_u8 (values land on the 1/255 lattice).
HeatMap heatmap_from_u8(const RasterImage& img, float scale);

}  // namespace tlgan
