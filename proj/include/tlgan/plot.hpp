#pragma once

#include "tlgan/image.hpp"

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

namespace tlgan {

struct Series {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
};

/// Render line series into an RGB chart: axes with tick labels, a legend,
/// and a 5x7 bitmap font, no external renderer. Pass finite y_lo/y_hi to
/// pin the vertical range, NaN to fit the data.
RasterImage render_chart(const std::vector<Series>& series, const std::string& title,
                         const std::string& x_label, const std::string& y_label, int width = 640,
                         int height = 400, double y_lo = std::nan(""), double y_hi = std::nan(""));

/// Chart a training loss_log.csv (step,d_loss,g_adv,content,feature) on a
/// log10 vertical axis. Throws DataError when the CSV is missing or holds
/// no usable rows.
void plot_loss_curves(const std::filesystem::path& loss_csv, const std::filesystem::path& out_png);

/// Chart a fewshot.csv (n,precision,recall,hmean) with scores on [0,1].
void plot_fewshot_curve(const std::filesystem::path& fewshot_csv,
                        const std::filesystem::path& out_png);

}  // namespace tlgan
