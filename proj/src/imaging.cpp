#include "tlgan/imaging.hpp"

#include "tlgan/log.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

namespace tlgan {

namespace {

// Catmull-Rom kernel (bicubic with a = -0.5).
double cubic_weight(double t) {
    constexpr double a = -0.5;
    t = std::abs(t);
    if (t <= 1.0) return ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0;
    if (t < 2.0) return a * (((t - 5.0) * t + 8.0) * t - 4.0);
    return 0.0;
}

int checked_round_int(double v, const char* what) {
    double r = std::round(v);
    if (std::abs(v - r) > 1e-9)
        throw std::invalid_argument(std::string(what) + " must be integral, got " +
                                    std::to_string(v));
    return static_cast<int>(r);
}

}  // namespace

ContentRegion detect_content_region(const RasterImage& img, double profile_frac) {
    if (img.empty()) throw std::invalid_argument("detect_content_region: empty image");
    const int w = img.width, h = img.height;
    std::vector<double> col(w, 0.0), row(h, 0.0);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double inv = 255.0 - img.luma255(y, x);
            col[x] += inv;
            row[y] += inv;
        }
    }
    ContentRegion full{0, w, 0, h};
    double cmax = *std::max_element(col.begin(), col.end());
    double rmax = *std::max_element(row.begin(), row.end());
    if (cmax <= 0.0 || rmax <= 0.0) return full;  // blank page

    auto span = [&](const std::vector<double>& profile, double peak) {
        double cut = profile_frac * peak;
        int lo = 0, hi = static_cast<int>(profile.size());
        while (lo < hi && profile[lo] <= cut) ++lo;
        while (hi > lo && profile[hi - 1] <= cut) --hi;
        return std::pair<int, int>{lo, hi};
    };
    auto [x0, x1] = span(col, cmax);
    auto [y0, y1] = span(row, rmax);
    if (x0 >= x1 || y0 >= y1) return full;
    return ContentRegion{x0, x1, y0, y1};
}

PreprocessResult preprocess(const RasterImage& img, const PreprocessParams& params) {
    if (img.empty()) throw std::invalid_argument("preprocess: empty image");
    if (params.short_axis_target < 1)
        throw std::invalid_argument("preprocess: short_axis_target must be >= 1");
    if (!(params.lo_frac >= 0.0 && params.lo_frac < params.hi_frac && params.hi_frac <= 1.0))
        throw std::invalid_argument("preprocess: need 0 <= lo_frac < hi_frac <= 1");

    PreprocessResult out;

    // Constant scans carry no layout signal; emit zeros and flag them.
    ArrayXX<float> gray = to_gray255(img);
    if ((gray == gray(0, 0)).all()) {
        log_warning("preprocess: constant input image, emitting zeros");
        out.image = RasterImage::u8(img.height, img.width, 1, 0);
        out.degenerate = true;
        return out;
    }

    ContentRegion region = detect_content_region(img, params.profile_frac);
    double scale = static_cast<double>(params.short_axis_target) /
                   std::max(1, region.short_axis());
    int out_w = std::max(1, static_cast<int>(std::lround(img.width * scale)));
    int out_h = std::max(1, static_cast<int>(std::lround(img.height * scale)));
    RasterImage resized = resize_bilinear(img, out_w, out_h);
    out.scale_x = static_cast<double>(out_w) / img.width;
    out.scale_y = static_cast<double>(out_h) / img.height;

    ArrayXX<float> g = to_gray255(resized);
    float maxv = g.maxCoeff();
    float lo = static_cast<float>(params.lo_frac) * maxv;
    float hi = static_cast<float>(params.hi_frac) * maxv;
    if (hi <= lo) {  // resampling collapsed the range
        log_warning("preprocess: degenerate intensity window, emitting zeros");
        out.image = RasterImage::u8(out_h, out_w, 1, 0);
        out.degenerate = true;
        return out;
    }
    g = ((g - lo) / (hi - lo)).cwiseMax(0.0f).cwiseMin(1.0f) * 255.0f;
    out.image = gray255_to_u8(g);
    return out;
}

HeatMap bicubic_resize(const HeatMap& map, int target_w, int target_h) {
    if (target_w < 1 || target_h < 1)
        throw std::invalid_argument("bicubic_resize: target dims must be >= 1");
    if (map.height() < 1 || map.width() < 1)
        throw std::invalid_argument("bicubic_resize: empty map");

    const int sw = map.width(), sh = map.height();
    const double rx = static_cast<double>(sw) / target_w;
    const double ry = static_cast<double>(sh) / target_h;

    HeatMap out;
    out.values.resize(target_h, target_w);
    out.scale = map.scale * static_cast<float>(static_cast<double>(target_w) / sw);

    for (int oy = 0; oy < target_h; ++oy) {
        const double sy = (oy + 0.5) * ry - 0.5;
        const int iy0 = static_cast<int>(std::floor(sy));
        const double fy = sy - iy0;
        double wy[4];
        for (int k = 0; k < 4; ++k) wy[k] = cubic_weight(fy - (k - 1));
        for (int ox = 0; ox < target_w; ++ox) {
            const double sx = (ox + 0.5) * rx - 0.5;
            const int ix0 = static_cast<int>(std::floor(sx));
            const double fx = sx - ix0;
            double acc = 0.0;
            for (int ky = 0; ky < 4; ++ky) {
                const int yy = std::clamp(iy0 - 1 + ky, 0, sh - 1);
                double rowacc = 0.0;
                for (int kx = 0; kx < 4; ++kx) {
                    const int xx = std::clamp(ix0 - 1 + kx, 0, sw - 1);
                    rowacc += cubic_weight(fx - (kx - 1)) *
                              static_cast<double>(map.values(yy, xx));
                }
                acc += wy[ky] * rowacc;
            }
            out.values(oy, ox) = static_cast<float>(std::clamp(acc, 0.0, 1.0));
        }
    }
    return out;
}

CropPair random_crop_pair(const RasterImage& img, const HeatMap& map, int crop,
                          std::uint64_t rng_seed) {
    if (crop < 1) throw std::invalid_argument("random_crop_pair: crop must be >= 1");
    if (img.kind != RasterImage::Kind::U8)
        throw std::invalid_argument("random_crop_pair: expects an 8-bit image");
    const double s = map.scale;
    if (!(s > 0.0f && s <= 1.0f))
        throw std::invalid_argument("random_crop_pair: map scale must be in (0,1]");
    const int map_crop = checked_round_int(crop * s, "random_crop_pair: crop * scale");
    // Offsets are drawn on the map lattice so both crops cover the same
    // field of view exactly.
    const int step = checked_round_int(1.0 / s, "random_crop_pair: 1 / scale");

    // Pad to at least the crop size with white paper and empty map.
    RasterImage src = img;
    HeatMap field = map;
    if (img.width < crop || img.height < crop) {
        const int pw = std::max(img.width, crop);
        const int ph = std::max(img.height, crop);
        RasterImage padded = RasterImage::u8(ph, pw, img.channels, 255);
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x)
                for (int c = 0; c < img.channels; ++c)
                    padded.at8(y, x, c) = img.at8(y, x, c);
        const int mph = std::max<int>(map.height(), static_cast<int>(std::lround(ph * s)));
        const int mpw = std::max<int>(map.width(), static_cast<int>(std::lround(pw * s)));
        HeatMap mp = HeatMap::zeros(mph, mpw, s);
        mp.values.topLeftCorner(map.height(), map.width()) = map.values;
        src = std::move(padded);
        field = std::move(mp);
    }
    if (field.height() * step < src.height || field.width() * step < src.width) {
        // Tolerate a map one lattice cell short of covering the image.
        if ((src.height - field.height() * step) >= step ||
            (src.width - field.width() * step) >= step)
            throw std::invalid_argument("random_crop_pair: map does not cover the image");
    }

    const int max_mx = std::min(field.width() - map_crop, (src.width - crop) / step);
    const int max_my = std::min(field.height() - map_crop, (src.height - crop) / step);
    if (max_mx < 0 || max_my < 0)
        throw std::invalid_argument("random_crop_pair: map too small for the crop");
    std::mt19937_64 rng(rng_seed);
    const int mx = max_mx > 0 ? static_cast<int>(rng() % (max_mx + 1)) : 0;
    const int my = max_my > 0 ? static_cast<int>(rng() % (max_my + 1)) : 0;
    const int x0 = mx * step, y0 = my * step;

    RasterImage ic = RasterImage::u8(crop, crop, src.channels);
    for (int y = 0; y < crop; ++y)
        for (int x = 0; x < crop; ++x)
            for (int c = 0; c < src.channels; ++c)
                ic.at8(y, x, c) = src.at8(y0 + y, x0 + x, c);

    HeatMap mc;
    mc.scale = s;
    mc.values = field.values.block(my, mx, map_crop, map_crop);
    return {std::move(ic), std::move(mc), x0, y0};
}

BinaryMask threshold_mask(const HeatMap& map, float threshold) {
    return (map.values >= threshold).cast<std::uint8_t>();
}

BinaryMask dilate(const BinaryMask& mask, int kw, int kh, int iterations) {
    if (kw < 1 || kh < 1 || kw % 2 == 0 || kh % 2 == 0)
        throw std::invalid_argument("dilate: kernel dims must be odd and >= 1");
    if (iterations < 0) throw std::invalid_argument("dilate: iterations must be >= 0");
    const int h = static_cast<int>(mask.rows()), w = static_cast<int>(mask.cols());
    BinaryMask cur = mask, tmp(h, w);
    const int rx = kw / 2, ry = kh / 2;
    for (int it = 0; it < iterations; ++it) {
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                std::uint8_t v = 0;
                for (int d = -rx; d <= rx && !v; ++d) {
                    const int xx = x + d;
                    if (xx >= 0 && xx < w && cur(y, xx)) v = 1;
                }
                tmp(y, x) = v;
            }
        }
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                std::uint8_t v = 0;
                for (int d = -ry; d <= ry && !v; ++d) {
                    const int yy = y + d;
                    if (yy >= 0 && yy < h && tmp(yy, x)) v = 1;
                }
                cur(y, x) = v;
            }
        }
    }
    return cur;
}

std::vector<ComponentBox> component_boxes_labeling(const BinaryMask& mask) {
    const int h = static_cast<int>(mask.rows()), w = static_cast<int>(mask.cols());
    ArrayXX<int> label = ArrayXX<int>::Constant(h, w, -1);
    std::vector<ComponentBox> boxes;
    std::vector<std::pair<int, int>> stack;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (!mask(y, x) || label(y, x) >= 0) continue;
            const int id = static_cast<int>(boxes.size());
            ComponentBox box{x, y, x, y, 0};
            label(y, x) = id;
            stack.push_back({y, x});
            while (!stack.empty()) {
                auto [cy, cx] = stack.back();
                stack.pop_back();
                ++box.area;
                box.x0 = std::min(box.x0, cx);
                box.x1 = std::max(box.x1, cx);
                box.y0 = std::min(box.y0, cy);
                box.y1 = std::max(box.y1, cy);
                for (int dy = -1; dy <= 1; ++dy) {
                    for (int dx = -1; dx <= 1; ++dx) {
                        const int ny = cy + dy, nx = cx + dx;
                        if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
                        if (!mask(ny, nx) || label(ny, nx) >= 0) continue;
                        label(ny, nx) = id;
                        stack.push_back({ny, nx});
                    }
                }
            }
            boxes.push_back(box);
        }
    }
    return boxes;
}

std::vector<ContourBox> component_boxes_contour(const BinaryMask& mask) {
    const int h = static_cast<int>(mask.rows()), w = static_cast<int>(mask.cols());
    ArrayXX<int> f = mask.cast<int>();
    auto val = [&](int y, int x) -> int {
        return (y < 0 || y >= h || x < 0 || x >= w) ? 0 : f(y, x);
    };
    // 8-neighborhood in clockwise order (y grows downward).
    static constexpr int dy8[8] = {0, 1, 1, 1, 0, -1, -1, -1};
    static constexpr int dx8[8] = {1, 1, 0, -1, -1, -1, 0, 1};
    auto dir_index = [](int cy, int cx, int ny, int nx) {
        for (int k = 0; k < 8; ++k)
            if (cy + dy8[k] == ny && cx + dx8[k] == nx) return k;
        return -1;
    };

    std::vector<ContourBox> boxes;
    int nbd = 1;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (f(y, x) == 0) continue;
            const bool outer = f(y, x) == 1 && val(y, x - 1) == 0;
            const bool hole = !outer && f(y, x) >= 1 && val(y, x + 1) == 0;
            if (!outer && !hole) continue;
            ++nbd;
            const int start_x = outer ? x - 1 : x + 1;

            ContourBox box{x, y, x, y};
            const int k0 = dir_index(y, x, y, start_x);
            int k = -1;
            for (int t = 0; t < 8; ++t) {
                const int kk = (k0 + t) & 7;
                if (val(y + dy8[kk], x + dx8[kk]) != 0) {
                    k = kk;
                    break;
                }
            }
            if (k < 0) {  // isolated pixel
                f(y, x) = -nbd;
                if (outer) boxes.push_back(box);
                continue;
            }
            const int i1y = y + dy8[k], i1x = x + dx8[k];
            int i2y = i1y, i2x = i1x;
            int i3y = y, i3x = x;
            while (true) {
                const int kc = dir_index(i3y, i3x, i2y, i2x);
                bool east_zero = false;
                int k4 = -1;
                for (int t = 1; t <= 8; ++t) {
                    const int kk = (kc + 8 - t) & 7;  // counterclockwise
                    const int ny = i3y + dy8[kk], nx = i3x + dx8[kk];
                    if (val(ny, nx) != 0) {
                        k4 = kk;
                        break;
                    }
                    if (kk == 0) east_zero = true;
                }
                const int i4y = i3y + dy8[k4], i4x = i3x + dx8[k4];
                if (east_zero)
                    f(i3y, i3x) = -nbd;
                else if (f(i3y, i3x) == 1)
                    f(i3y, i3x) = nbd;
                box.x0 = std::min(box.x0, i3x);
                box.x1 = std::max(box.x1, i3x);
                box.y0 = std::min(box.y0, i3y);
                box.y1 = std::max(box.y1, i3y);
                if (i4y == y && i4x == x && i3y == i1y && i3x == i1x) break;
                i2y = i3y;
                i2x = i3x;
                i3y = i4y;
                i3x = i4x;
            }
            if (outer) boxes.push_back(box);
        }
    }
    return boxes;
}

std::vector<QuadBox> localize_from_map(const HeatMap& map, const PostprocessParams& params,
                                       std::pair<double, double> scale_back) {
    if (!(map.scale > 0.0f))
        throw std::invalid_argument("localize_from_map: map scale must be positive");
    if (!(scale_back.first > 0.0 && scale_back.second > 0.0))
        throw std::invalid_argument("localize_from_map: scale_back must be positive");

    BinaryMask mask = threshold_mask(map, params.threshold);
    if (params.dilation_iters > 0)
        mask = dilate(mask, params.dilation_kw, params.dilation_kh, params.dilation_iters);

    const double fx = static_cast<double>(map.scale) * scale_back.first;
    const double fy = static_cast<double>(map.scale) * scale_back.second;
    std::vector<QuadBox> out;
    for (const ComponentBox& c : component_boxes_labeling(mask)) {
        if (c.area < params.min_box_area_px) continue;
        const double x0 = c.x0 / fx, y0 = c.y0 / fy;
        const double x1 = (c.x1 + 1) / fx, y1 = (c.y1 + 1) / fy;
        out.push_back(QuadBox::rect(x0, y0, x1, y1));
    }
    return out;
}

}  // namespace tlgan
