#include "tlgan/geometry.hpp"

#include "tlgan/log.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace tlgan {

double cylindrical_gaussian_density(double my, double sigma) {
    return std::exp(-my * my / (2.0 * sigma * sigma)) / (2.0 * M_PI * sigma);
}

HeatMap gaussian_patch(const GaussianPatchSpec& spec) {
    if (spec.width_px < 1 || spec.height_px < 1)
        throw std::invalid_argument("gaussian_patch: patch dimensions must be >= 1");
    if (!(spec.sigma_ratio > 0.0))
        throw std::invalid_argument("gaussian_patch: sigma_ratio must be > 0");

    const int h = spec.height_px;
    const double sigma = spec.sigma_ratio * h;
    const double center = (h - 1) / 2.0;

    HeatMap patch = HeatMap::zeros(h, spec.width_px, 1.0f);
    for (int y = 0; y < h; ++y) {
        const double my = y - center;
        const double v =
            cylindrical_gaussian_density(my, sigma) / cylindrical_gaussian_density(0.0, sigma);
        patch.values.row(y).setConstant(static_cast<float>(v));
    }
    return patch;
}

AffineMap affine_from_quad(const QuadBox& quad, int patch_w, int patch_h) {
    if (patch_w < 1 || patch_h < 1)
        throw std::invalid_argument("affine_from_quad: patch dimensions must be >= 1");
    if (!quad.finite()) throw std::invalid_argument("affine_from_quad: non-finite quad");

    const Vec2& c1 = quad.corners[0];
    const Vec2& c2 = quad.corners[1];
    const Vec2& c3 = quad.corners[2];
    const Vec2& c4 = quad.corners[3];

    AffineMap map;
    map.linear.col(0) = (c2 - c1) / patch_w;
    map.linear.col(1) = (c4 - c1) / patch_h;
    map.offset = c1;

    // Collinear corners collapse the patch onto a line.
    const double det = map.linear.determinant();
    const double extent = std::max((c2 - c1).norm(), (c4 - c1).norm());
    if (std::abs(det) < 1e-12 * std::max(1.0, extent * extent))
        throw std::invalid_argument("affine_from_quad: degenerate quad (collinear corners)");

    // Corner 3 is not a degree of freedom of the affine fit; flag quads
    // that are far from a parallelogram.
    const Vec2 implied = map.apply(Vec2(patch_w, patch_h));
    const double residual = (implied - c3).norm();
    if (residual > 2.0)
        log_warning("affine_from_quad: corner-3 residual " + std::to_string(residual) +
                    " px exceeds 2 px; quad is far from a parallelogram");

    return map;
}

HeatMap render_map(int image_w, int image_h, const std::vector<QuadBox>& quads, double scale,
                   double sigma_ratio, OverlapRule rule) {
    if (image_w < 1 || image_h < 1)
        throw std::invalid_argument("render_map: empty image dimensions");
    if (!(scale > 0.0) || scale > 1.0)
        throw std::invalid_argument("render_map: scale must be in (0,1]");
    if (!(sigma_ratio > 0.0))
        throw std::invalid_argument("render_map: sigma_ratio must be > 0");

    const int map_h = static_cast<int>(std::lround(image_h * scale));
    const int map_w = static_cast<int>(std::lround(image_w * scale));
    HeatMap map = HeatMap::zeros(map_h, map_w, static_cast<float>(scale));

    for (const QuadBox& quad : quads) {
        const QuadBox q = quad.scaled(scale, scale);
        if (!q.finite() || q.area() <= 0.0) {
            log_warning("render_map: skipping degenerate quad");
            continue;
        }

        const double patch_wf = (q.corners[1] - q.corners[0]).norm();
        const double patch_hf = (q.corners[3] - q.corners[0]).norm();
        const int pw = std::max(1, static_cast<int>(std::lround(patch_wf)));
        const int ph = std::max(1, static_cast<int>(std::lround(patch_hf)));

        AffineMap fwd;
        try {
            fwd = affine_from_quad(q, pw, ph);
        } catch (const std::invalid_argument&) {
            log_warning("render_map: skipping quad with collinear corners");
            continue;
        }
        const Mat2 inv = fwd.linear.inverse();

        const double sigma = sigma_ratio * ph;
        const double vc = ph / 2.0;  // continuous cross-axis center of the patch domain

        // Only pixels inside the quad's bounding box can receive mass.
        const Vec2 lo = q.min_corner();
        const Vec2 hi = q.max_corner();
        const int x0 = std::max(0, static_cast<int>(std::floor(lo.x())));
        const int x1 = std::min(map_w - 1, static_cast<int>(std::ceil(hi.x())));
        const int y0 = std::max(0, static_cast<int>(std::floor(lo.y())));
        const int y1 = std::min(map_h - 1, static_cast<int>(std::ceil(hi.y())));

        for (int y = y0; y <= y1; ++y) {
            for (int x = x0; x <= x1; ++x) {
                const Vec2 uv = inv * (Vec2(x, y) - fwd.offset);
                if (uv.x() < 0.0 || uv.x() > pw || uv.y() < 0.0 || uv.y() > ph) continue;
                const double my = uv.y() - vc;
                const float v = static_cast<float>(std::exp(-my * my / (2.0 * sigma * sigma)));
                float& cell = map.values(y, x);
                cell = rule == OverlapRule::Max ? std::max(cell, v) : cell + v;
            }
        }
    }
    return map;
}

}  // namespace tlgan
