#include "tlgan/image.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace tlgan {

namespace {

inline double luma(double r, double g, double b) { return 0.299 * r + 0.587 * g + 0.114 * b; }

}  // namespace

double RasterImage::luma255(int y, int x) const {
    if (kind == Kind::U8) {
        if (channels == 1) return at8(y, x);
        return luma(at8(y, x, 0), at8(y, x, 1), at8(y, x, 2));
    }
    if (channels == 1) return 255.0 * atf(y, x);
    return 255.0 * luma(atf(y, x, 0), atf(y, x, 1), atf(y, x, 2));
}

ArrayXX<float> to_gray255(const RasterImage& img) {
    ArrayXX<float> gray(img.height, img.width);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) gray(y, x) = static_cast<float>(img.luma255(y, x));
    return gray;
}

RasterImage gray255_to_u8(const ArrayXX<float>& gray) {
    RasterImage out = RasterImage::u8(static_cast<int>(gray.rows()), static_cast<int>(gray.cols()), 1);
    for (int y = 0; y < out.height; ++y)
        for (int x = 0; x < out.width; ++x) {
            const float v = std::clamp(gray(y, x), 0.0f, 255.0f);
            out.at8(y, x) = static_cast<std::uint8_t>(std::lround(v));
        }
    return out;
}

RasterImage resize_bilinear(const RasterImage& img, int target_w, int target_h) {
    if (target_w < 1 || target_h < 1)
        throw std::invalid_argument("resize_bilinear: non-positive target dimensions");
    if (img.empty()) throw std::invalid_argument("resize_bilinear: empty image");

    RasterImage out = img.kind == RasterImage::Kind::U8
                          ? RasterImage::u8(target_h, target_w, img.channels)
                          : RasterImage::f32(target_h, target_w, img.channels);

    const double rx = static_cast<double>(img.width) / target_w;
    const double ry = static_cast<double>(img.height) / target_h;

    for (int y = 0; y < target_h; ++y) {
        const double sy = std::clamp((y + 0.5) * ry - 0.5, 0.0, img.height - 1.0);
        const int y0 = static_cast<int>(sy);
        const int y1 = std::min(y0 + 1, img.height - 1);
        const double fy = sy - y0;
        for (int x = 0; x < target_w; ++x) {
            const double sx = std::clamp((x + 0.5) * rx - 0.5, 0.0, img.width - 1.0);
            const int x0 = static_cast<int>(sx);
            const int x1 = std::min(x0 + 1, img.width - 1);
            const double fx = sx - x0;
            for (int c = 0; c < img.channels; ++c) {
                double v00, v01, v10, v11;
                if (img.kind == RasterImage::Kind::U8) {
                    v00 = img.at8(y0, x0, c);
                    v01 = img.at8(y0, x1, c);
                    v10 = img.at8(y1, x0, c);
                    v11 = img.at8(y1, x1, c);
                } else {
                    v00 = img.atf(y0, x0, c);
                    v01 = img.atf(y0, x1, c);
                    v10 = img.atf(y1, x0, c);
                    v11 = img.atf(y1, x1, c);
                }
                const double top = v00 + fx * (v01 - v00);
                const double bot = v10 + fx * (v11 - v10);
                const double v = top + fy * (bot - top);
                if (img.kind == RasterImage::Kind::U8)
                    out.at8(y, x, c) = static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
                else
                    out.atf(y, x, c) = static_cast<float>(v);
            }
        }
    }
    return out;
}

RasterImage heatmap_to_u8(const HeatMap& map) {
    RasterImage out = RasterImage::u8(map.height(), map.width(), 1);
    for (int y = 0; y < out.height; ++y)
        for (int x = 0; x < out.width; ++x) {
            const float v = std::clamp(map.values(y, x), 0.0f, 1.0f);
            out.at8(y, x) = static_cast<std::uint8_t>(std::lround(255.0f * v));
        }
    return out;
}

HeatMap heatmap_from_u8(const RasterImage& img, float scale) {
    if (img.kind != RasterImage::Kind::U8 || img.channels != 1)
        throw std::invalid_argument("heatmap_from_u8: expected an 8-bit single-channel image");
    HeatMap map = HeatMap::zeros(img.height, img.width, scale);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) map.values(y, x) = img.at8(y, x) / 255.0f;
    return map;
}

}  // namespace tlgan
