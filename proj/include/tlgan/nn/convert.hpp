#pragma once

#include "tlgan/image.hpp"
#include "tlgan/nn/tensor.hpp"

#include <algorithm>
#include <stdexcept>
#include <vector>

namespace tlgan::nn {

/// Batch of 8-bit grayscale images as generator input: intensities scaled
/// to [0,1] and replicated onto 3 channels. All images must share dims.
template <class S>
FeatureMap<S> images_to_input(const std::vector<RasterImage>& images) {
    if (images.empty()) throw std::invalid_argument("images_to_input: empty batch");
    const int h = images[0].height, w = images[0].width;
    FeatureMap<S> x = FeatureMap<S>::zeros(3, static_cast<int>(images.size()), h, w);
    for (size_t n = 0; n < images.size(); ++n) {
        const RasterImage& img = images[n];
        if (img.height != h || img.width != w)
            throw std::invalid_argument("images_to_input: mixed sizes in batch");
        for (int y = 0; y < h; ++y) {
            for (int xx = 0; xx < w; ++xx) {
                const S v = static_cast<S>(img.luma255(y, xx) / 255.0);
                const Eigen::Index j = x.col(static_cast<int>(n), y, xx);
                x.data(0, j) = v;
                x.data(1, j) = v;
                x.data(2, j) = v;
            }
        }
    }
    return x;
}

/// Batch of target maps in tanh range: [0,1] values mapped to 2m-1 and
/// replicated onto 3 channels.
template <class S>
FeatureMap<S> maps_to_target(const std::vector<HeatMap>& maps) {
    if (maps.empty()) throw std::invalid_argument("maps_to_target: empty batch");
    const int h = maps[0].height(), w = maps[0].width();
    FeatureMap<S> t = FeatureMap<S>::zeros(3, static_cast<int>(maps.size()), h, w);
    for (size_t n = 0; n < maps.size(); ++n) {
        if (maps[n].height() != h || maps[n].width() != w)
            throw std::invalid_argument("maps_to_target: mixed sizes in batch");
        for (int y = 0; y < h; ++y) {
            for (int xx = 0; xx < w; ++xx) {
                const S v = S(2) * static_cast<S>(maps[n].values(y, xx)) - S(1);
                const Eigen::Index j = t.col(static_cast<int>(n), y, xx);
                t.data(0, j) = v;
                t.data(1, j) = v;
                t.data(2, j) = v;
            }
        }
    }
    return t;
}

/// One batch item of a (-1,1) network output back to a [0,1] heat map:
/// channels averaged, range un-mapped, clipped.
template <class S>
HeatMap output_to_heatmap(const FeatureMap<S>& y, int n, float scale) {
    HeatMap m = HeatMap::zeros(y.height, y.width, scale);
    for (int yy = 0; yy < y.height; ++yy) {
        for (int xx = 0; xx < y.width; ++xx) {
            S s = 0;
            const Eigen::Index j = y.col(n, yy, xx);
            for (int c = 0; c < y.channels(); ++c) s += y.data(c, j);
            s /= static_cast<S>(y.channels());
            const double v = (static_cast<double>(s) + 1.0) / 2.0;
            m.values(yy, xx) = static_cast<float>(std::clamp(v, 0.0, 1.0));
        }
    }
    return m;
}

}  // namespace tlgan::nn
