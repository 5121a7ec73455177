#include "tlgan/plot.hpp"

#include "tlgan/image_io.hpp"
#include "tlgan/types.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>

namespace tlgan {

namespace {

struct Glyph {
    char c;
    std::uint8_t rows[7];  // bit 4 is the leftmost of 5 columns
};

// clang-format off
constexpr Glyph kFont[] = {
    {' ', {0x00,0x00,0x00,0x00,0x00,0x00,0x00}},
    {'0', {0x0E,0x11,0x13,0x15,0x19,0x11,0x0E}},
    {'1', {0x04,0x0C,0x04,0x04,0x04,0x04,0x0E}},
    {'2', {0x0E,0x11,0x01,0x02,0x04,0x08,0x1F}},
    {'3', {0x1F,0x02,0x04,0x02,0x01,0x11,0x0E}},
    {'4', {0x02,0x06,0x0A,0x12,0x1F,0x02,0x02}},
    {'5', {0x1F,0x10,0x1E,0x01,0x01,0x11,0x0E}},
    {'6', {0x06,0x08,0x10,0x1E,0x11,0x11,0x0E}},
    {'7', {0x1F,0x01,0x02,0x04,0x08,0x08,0x08}},
    {'8', {0x0E,0x11,0x11,0x0E,0x11,0x11,0x0E}},
    {'9', {0x0E,0x11,0x11,0x0F,0x01,0x02,0x0C}},
    {'A', {0x0E,0x11,0x11,0x1F,0x11,0x11,0x11}},
    {'B', {0x1E,0x11,0x11,0x1E,0x11,0x11,0x1E}},
    {'C', {0x0E,0x11,0x10,0x10,0x10,0x11,0x0E}},
    {'D', {0x1C,0x12,0x11,0x11,0x11,0x12,0x1C}},
    {'E', {0x1F,0x10,0x10,0x1E,0x10,0x10,0x1F}},
    {'F', {0x1F,0x10,0x10,0x1E,0x10,0x10,0x10}},
    {'G', {0x0E,0x11,0x10,0x17,0x11,0x11,0x0F}},
    {'H', {0x11,0x11,0x11,0x1F,0x11,0x11,0x11}},
    {'I', {0x0E,0x04,0x04,0x04,0x04,0x04,0x0E}},
    {'J', {0x07,0x02,0x02,0x02,0x02,0x12,0x0C}},
    {'K', {0x11,0x12,0x14,0x18,0x14,0x12,0x11}},
    {'L', {0x10,0x10,0x10,0x10,0x10,0x10,0x1F}},
    {'M', {0x11,0x1B,0x15,0x15,0x11,0x11,0x11}},
    {'N', {0x11,0x11,0x19,0x15,0x13,0x11,0x11}},
    {'O', {0x0E,0x11,0x11,0x11,0x11,0x11,0x0E}},
    {'P', {0x1E,0x11,0x11,0x1E,0x10,0x10,0x10}},
    {'Q', {0x0E,0x11,0x11,0x11,0x15,0x12,0x0D}},
    {'R', {0x1E,0x11,0x11,0x1E,0x14,0x12,0x11}},
    {'S', {0x0F,0x10,0x10,0x0E,0x01,0x01,0x1E}},
    {'T', {0x1F,0x04,0x04,0x04,0x04,0x04,0x04}},
    {'U', {0x11,0x11,0x11,0x11,0x11,0x11,0x0E}},
    {'V', {0x11,0x11,0x11,0x11,0x11,0x0A,0x04}},
    {'W', {0x11,0x11,0x11,0x15,0x15,0x15,0x0A}},
    {'X', {0x11,0x11,0x0A,0x04,0x0A,0x11,0x11}},
    {'Y', {0x11,0x11,0x0A,0x04,0x04,0x04,0x04}},
    {'Z', {0x1F,0x01,0x02,0x04,0x08,0x10,0x1F}},
    {'.', {0x00,0x00,0x00,0x00,0x00,0x0C,0x0C}},
    {',', {0x00,0x00,0x00,0x00,0x0C,0x04,0x08}},
    {'-', {0x00,0x00,0x00,0x1F,0x00,0x00,0x00}},
    {'+', {0x00,0x04,0x04,0x1F,0x04,0x04,0x00}},
    {':', {0x00,0x0C,0x0C,0x00,0x0C,0x0C,0x00}},
    {'/', {0x01,0x02,0x04,0x04,0x08,0x10,0x00}},
    {'%', {0x18,0x19,0x02,0x04,0x08,0x13,0x03}},
    {'(', {0x02,0x04,0x08,0x08,0x08,0x04,0x02}},
    {')', {0x08,0x04,0x02,0x02,0x02,0x04,0x08}},
    {'_', {0x00,0x00,0x00,0x00,0x00,0x00,0x1F}},
    {'=', {0x00,0x00,0x1F,0x00,0x1F,0x00,0x00}},
    {'?', {0x0E,0x11,0x01,0x02,0x04,0x00,0x04}},
};
// clang-format on

const Glyph& glyph_for(char c) {
    c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    for (const Glyph& g : kFont)
        if (g.c == c) return g;
    return kFont[std::size(kFont) - 1];  // '?'
}

struct Rgb {
    std::uint8_t r, g, b;
};

constexpr Rgb kPalette[] = {
    {214, 69, 65}, {31, 119, 180}, {44, 160, 44}, {255, 127, 14}, {148, 103, 189},
};
constexpr Rgb kAxis{60, 60, 60};
constexpr Rgb kGrid{225, 225, 225};
constexpr Rgb kText{30, 30, 30};

void put_px(RasterImage& img, int x, int y, Rgb c) {
    if (x < 0 || y < 0 || x >= img.width || y >= img.height) return;
    img.at8(y, x, 0) = c.r;
    img.at8(y, x, 1) = c.g;
    img.at8(y, x, 2) = c.b;
}

void draw_line(RasterImage& img, int x0, int y0, int x1, int y1, Rgb c) {
    int dx = std::abs(x1 - x0), sx = x0 < x1 ? 1 : -1;
    int dy = -std::abs(y1 - y0), sy = y0 < y1 ? 1 : -1;
    int err = dx + dy;
    while (true) {
        put_px(img, x0, y0, c);
        if (x0 == x1 && y0 == y1) break;
        int e2 = 2 * err;
        if (e2 >= dy) {
            err += dy;
            x0 += sx;
        }
        if (e2 <= dx) {
            err += dx;
            y0 += sy;
        }
    }
}

void draw_text(RasterImage& img, int x, int y, const std::string& text, Rgb c, int scale = 1) {
    int cx = x;
    for (char ch : text) {
        const Glyph& g = glyph_for(ch);
        for (int row = 0; row < 7; ++row)
            for (int col = 0; col < 5; ++col)
                if (g.rows[row] & (1 << (4 - col)))
                    for (int sy = 0; sy < scale; ++sy)
                        for (int sx = 0; sx < scale; ++sx)
                            put_px(img, cx + col * scale + sx, y + row * scale + sy, c);
        cx += 6 * scale;
    }
}

int text_width(const std::string& text, int scale = 1) {
    return static_cast<int>(text.size()) * 6 * scale - scale;
}

std::string tick_label(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g", v);
    return buf;
}

double nice_step(double range) {
    if (range <= 0.0 || !std::isfinite(range)) return 1.0;
    const double raw = range / 4.0;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    const double mant = raw / mag;
    if (mant < 1.5) return mag;
    if (mant < 3.5) return 2.0 * mag;
    if (mant < 7.5) return 5.0 * mag;
    return 10.0 * mag;
}

std::vector<std::vector<double>> read_csv(const std::filesystem::path& path, std::size_t columns,
                                          const char* expected_header) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("plot: cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw DataError("plot: empty file " + path.string());
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != expected_header)
        throw DataError("plot: " + path.string() + " does not look like '" +
                        std::string(expected_header) + "'");

    std::vector<std::vector<double>> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<double> row;
        const char* p = line.data();
        const char* end = line.data() + line.size();
        while (p <= end) {
            const char* comma = std::find(p, end, ',');
            double v = 0.0;
            auto [ptr, ec] = std::from_chars(p, comma, v);
            if (ec != std::errc() || ptr != comma)
                throw DataError("plot: bad number at " + path.string() + ":" +
                                std::to_string(line_no));
            row.push_back(v);
            if (comma == end) break;
            p = comma + 1;
        }
        if (row.size() != columns)
            throw DataError("plot: wrong column count at " + path.string() + ":" +
                            std::to_string(line_no));
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw DataError("plot: no data rows in " + path.string());
    return rows;
}

}  // namespace

RasterImage render_chart(const std::vector<Series>& series, const std::string& title,
                         const std::string& x_label, const std::string& y_label, int width,
                         int height, double y_lo, double y_hi) {
    if (width < 160 || height < 120)
        throw std::invalid_argument("render_chart: canvas too small");
    RasterImage img = RasterImage::u8(height, width, 3, 255);

    const int ml = 62, mr = 14, mt = 26, mb = 42;
    const int px0 = ml, px1 = width - mr - 1;
    const int py0 = mt, py1 = height - mb - 1;

    double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
    double ymin = xmin, ymax = -xmin;
    for (const auto& s : series)
        for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
            xmin = std::min(xmin, s.x[i]);
            xmax = std::max(xmax, s.x[i]);
            ymin = std::min(ymin, s.y[i]);
            ymax = std::max(ymax, s.y[i]);
        }
    if (!std::isfinite(xmin)) {
        xmin = 0.0;
        xmax = 1.0;
        ymin = 0.0;
        ymax = 1.0;
    }
    if (std::isfinite(y_lo)) ymin = y_lo;
    if (std::isfinite(y_hi)) ymax = y_hi;
    if (xmax == xmin) {
        xmax += 0.5;
        xmin -= 0.5;
    }
    if (ymax == ymin) {
        ymax += 0.5;
        ymin -= 0.5;
    }

    auto to_px = [&](double x) {
        return px0 + static_cast<int>(std::lround((x - xmin) / (xmax - xmin) * (px1 - px0)));
    };
    auto to_py = [&](double y) {
        return py1 - static_cast<int>(std::lround((y - ymin) / (ymax - ymin) * (py1 - py0)));
    };

    // Grid and ticks.
    const double xstep = nice_step(xmax - xmin);
    for (double t = std::ceil(xmin / xstep) * xstep; t <= xmax + 1e-9 * xstep; t += xstep) {
        int px = to_px(t);
        draw_line(img, px, py0, px, py1, kGrid);
        std::string lab = tick_label(t);
        draw_text(img, px - text_width(lab) / 2, py1 + 6, lab, kText);
    }
    const double ystep = nice_step(ymax - ymin);
    for (double t = std::ceil(ymin / ystep) * ystep; t <= ymax + 1e-9 * ystep; t += ystep) {
        int py = to_py(t);
        draw_line(img, px0, py, px1, py, kGrid);
        std::string lab = tick_label(t);
        draw_text(img, px0 - 6 - text_width(lab), py - 3, lab, kText);
    }

    // Axes.
    draw_line(img, px0, py0, px0, py1, kAxis);
    draw_line(img, px0, py1, px1, py1, kAxis);

    // Series.
    for (std::size_t si = 0; si < series.size(); ++si) {
        const Rgb c = kPalette[si % std::size(kPalette)];
        const auto& s = series[si];
        int prev_x = 0, prev_y = 0;
        bool has_prev = false;
        for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) {
                has_prev = false;
                continue;
            }
            int px = std::clamp(to_px(s.x[i]), px0, px1);
            int py = std::clamp(to_py(s.y[i]), py0, py1);
            if (has_prev) {
                draw_line(img, prev_x, prev_y, px, py, c);
            } else {
                put_px(img, px, py, c);
                put_px(img, px + 1, py, c);
                put_px(img, px, py + 1, c);
                put_px(img, px + 1, py + 1, c);
            }
            prev_x = px;
            prev_y = py;
            has_prev = true;
        }
    }

    // Legend, top-right inside the plot area.
    int ly = py0 + 4;
    for (std::size_t si = 0; si < series.size(); ++si) {
        if (series[si].label.empty()) continue;
        const Rgb c = kPalette[si % std::size(kPalette)];
        int lx = px1 - 12 - text_width(series[si].label);
        for (int dy = 0; dy < 7; ++dy)
            for (int dx = 0; dx < 7; ++dx) put_px(img, lx - 10 + dx, ly + dy, c);
        draw_text(img, lx, ly, series[si].label, kText);
        ly += 11;
    }

    draw_text(img, (width - text_width(title, 2)) / 2, 6, title, kText, 2);
    draw_text(img, px0 + ((px1 - px0) - text_width(x_label)) / 2, height - 14, x_label, kText);
    draw_text(img, 4, py0 - 10, y_label, kText);
    return img;
}

void plot_loss_curves(const std::filesystem::path& loss_csv,
                      const std::filesystem::path& out_png) {
    auto rows = read_csv(loss_csv, 5, "step,d_loss,g_adv,content,feature");
    const char* names[] = {"D LOSS", "G ADV", "CONTENT", "FEATURE"};
    std::vector<Series> series(4);
    for (int i = 0; i < 4; ++i) series[i].label = names[i];
    for (const auto& row : rows)
        for (int i = 0; i < 4; ++i) {
            if (row[i + 1] <= 0.0 || !std::isfinite(row[i + 1])) continue;
            series[i].x.push_back(row[0]);
            series[i].y.push_back(std::log10(row[i + 1]));
        }
    bool any = false;
    for (const auto& s : series) any = any || !s.y.empty();
    if (!any) throw DataError("plot: no positive losses in " + loss_csv.string());
    RasterImage img = render_chart(series, "TRAINING LOSSES", "STEP", "LOG10 LOSS");
    save_png(img, out_png.string());
}

void plot_fewshot_curve(const std::filesystem::path& fewshot_csv,
                        const std::filesystem::path& out_png) {
    auto rows = read_csv(fewshot_csv, 4, "n,precision,recall,hmean");
    const char* names[] = {"PRECISION", "RECALL", "HMEAN"};
    std::vector<Series> series(3);
    for (int i = 0; i < 3; ++i) series[i].label = names[i];
    for (const auto& row : rows)
        for (int i = 0; i < 3; ++i) {
            series[i].x.push_back(row[0]);
            series[i].y.push_back(row[i + 1]);
        }
    RasterImage img =
        render_chart(series, "FEW-SHOT SCORES", "TRAINING DOCS", "SCORE", 640, 400, 0.0, 1.05);
    save_png(img, out_png.string());
}

}  // namespace tlgan
