#pragma once

#include "tlgan/image.hpp"
#include "tlgan/types.hpp"

#include <cstdint>
#include <utility>
#include <vector>

namespace tlgan {

/// Pixel bounds of the ink-bearing part of a scan, inclusive-exclusive.
struct ContentRegion {
    int x0 = 0, x1 = 0, y0 = 0, y1 = 0;

    int width() const { return x1 - x0; }
    int height() const { return y1 - y0; }
    int short_axis() const { return std::min(width(), height()); }
};

struct PreprocessParams {
    int short_axis_target = 550;
    double lo_frac = 0.50;
    double hi_frac = 0.9995;
    /// Fraction of the inverted-intensity projection-profile maximum that
    /// counts as content when locating the region edges.
    double profile_frac = 0.02;
};

struct PreprocessResult {
    RasterImage image;  // 8-bit single-channel, intensity-windowed
    double scale_x = 1.0;
    double scale_y = 1.0;
    bool degenerate = false;  // constant input, output forced to zeros
};

struct PostprocessParams {
    float threshold = 0.4f;
    int dilation_kw = 3;
    int dilation_kh = 3;
    int dilation_iters = 1;
    int min_box_area_px = 4;
};

/// Locate the content region by projecting inverted intensities onto each
/// axis and keeping the span where the profile exceeds profile_frac of its
/// maximum. Falls back to the full image when there is no signal.
ContentRegion detect_content_region(const RasterImage& img, double profile_frac = 0.02);

/// Resize so the content region's short axis hits the target (aspect
/// preserved) and window intensities so [lo_frac, hi_frac] of the maximum
/// maps onto [0, 255]. Scale factors map original to output coordinates.
PreprocessResult preprocess(const RasterImage& img, const PreprocessParams& params = {});

/// Catmull-Rom (a = -0.5) bicubic resampling of a heat map, clipped to
/// [0,1]. Throws std::invalid_argument for non-positive target dims.
HeatMap bicubic_resize(const HeatMap& map, int target_w, int target_h);

struct CropPair {
    RasterImage image;
    HeatMap map;
    int x0 = 0, y0 = 0;  // crop origin in (padded) image pixels
};

/// Matched random crop of an image and its aligned heat map. The map crop
/// has side crop * map.scale and covers exactly the same field of view;
/// images smaller than the crop are padded with white first. Requires
/// crop * map.scale and 1 / map.scale to be integers so offsets can sit
/// on the map lattice.
CropPair random_crop_pair(const RasterImage& img, const HeatMap& map, int crop,
                          std::uint64_t rng_seed);

/// Threshold, dilate, extract connected components, and emit each
/// component's bounding rectangle as a QuadBox in original-image pixels
/// (coordinates divided by map.scale * scale_back).
std::vector<QuadBox> localize_from_map(const HeatMap& map, const PostprocessParams& params,
                                       std::pair<double, double> scale_back = {1.0, 1.0});

// Binary-mask machinery behind localize_from_map, exposed for tests and
// the contour/labeling cross-check.

using BinaryMask = ArrayXX<std::uint8_t>;  // (height, width), 0 or 1

BinaryMask threshold_mask(const HeatMap& map, float threshold);

/// Morphological dilation with an all-ones kw x kh kernel (odd dims).
BinaryMask dilate(const BinaryMask& mask, int kw, int kh, int iterations = 1);

struct ComponentBox {
    int x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // inclusive pixel bounds
    int area = 0;                        // pixel count
};

/// 8-connected component labeling; the reference extraction route.
std::vector<ComponentBox> component_boxes_labeling(const BinaryMask& mask);

struct ContourBox {
    int x0 = 0, y0 = 0, x1 = 0, y1 = 0;
};

/// Suzuki-Abe style border following. Returns the bounding rectangle of
/// every outer border; must agree with component_boxes_labeling.
std::vector<ContourBox> component_boxes_contour(const BinaryMask& mask);

}  // namespace tlgan
