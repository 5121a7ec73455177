#pragma once

#include "tlgan/types.hpp"

#include <vector>

namespace tlgan {

/// Parameters of the cylindrical Gaussian rendered into each word box.
/// The profile is constant along x and Gaussian across y with
/// sigma = sigma_ratio * height_px.
struct GaussianPatchSpec {
    int width_px = 1;
    int height_px = 1;
    double sigma_ratio = kDefaultSigmaRatio;

    static constexpr double kDefaultSigmaRatio = 0.25;
};

/// 2-D affine transform p -> linear * p + offset.
struct AffineMap {
    Mat2 linear = Mat2::Identity();
    Vec2 offset = Vec2::Zero();

    Vec2 apply(const Vec2& p) const { return linear * p + offset; }
};

/// How overlapping word boxes combine in a rendered map. Max keeps the
/// target in [0,1]; Sum adds contributions and may exceed 1 (kept for
/// comparison only).
enum class OverlapRule { Max, Sum };

/// Cylindrical Gaussian density at cross-axis offset `my`:
/// 1/(2*pi*sigma) * exp(-my^2 / (2*sigma^2)). The patch renderer divides
/// out the 1/(2*pi*sigma) amplitude so box centerlines peak at exactly 1.
double cylindrical_gaussian_density(double my, double sigma);

/// Peak-normalized cylindrical Gaussian patch of size height_px x width_px.
/// Every row is constant; the profile across y is centered at
/// (height_px - 1) / 2 and the center row of an odd-height patch is
/// exactly 1.0. Throws std::invalid_argument for non-positive dimensions.
HeatMap gaussian_patch(const GaussianPatchSpec& spec);

/// Affine transform that carries the continuous patch domain
/// [0,patch_w] x [0,patch_h] onto a quad: (0,0) -> corner 1,
/// (patch_w,0) -> corner 2, (0,patch_h) -> corner 4. Corner 3 is implied;
/// a residual above 2 px against the actual corner 3 logs a warning.
/// Throws std::invalid_argument for degenerate (collinear) quads.
AffineMap affine_from_quad(const QuadBox& quad, int patch_w, int patch_h);

/// Render the ground-truth text localization map for an image of
/// image_w x image_h pixels. The output grid is round(image_h * scale) x
/// round(image_w * scale); quad coordinates are pre-multiplied by scale.
/// Each quad contributes its warped Gaussian patch; overlaps compose per
/// OverlapRule (Max by default, so values stay in [0,1]).
HeatMap render_map(int image_w, int image_h, const std::vector<QuadBox>& quads, double scale,
                   double sigma_ratio = GaussianPatchSpec::kDefaultSigmaRatio,
                   OverlapRule rule = OverlapRule::Max);

}  // namespace tlgan
