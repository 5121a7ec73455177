#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

namespace tlgan {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

template <class Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <class Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <class Scalar>
using ArrayXX = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Raised when an input file or dataset is malformed or unreadable.
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

/// Raised when an optimization run produces non-finite values.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

/// A word location as four corner points in image pixel coordinates,
/// ordered clockwise starting at the top-left corner.
struct QuadBox {
    std::array<Vec2, 4> corners;

    QuadBox() : corners{Vec2::Zero(), Vec2::Zero(), Vec2::Zero(), Vec2::Zero()} {}
    QuadBox(Vec2 c1, Vec2 c2, Vec2 c3, Vec2 c4) : corners{c1, c2, c3, c4} {}

    /// Axis-aligned rectangle helper: corners (x0,y0)..(x1,y1).
    static QuadBox rect(double x0, double y0, double x1, double y1) {
        return QuadBox({x0, y0}, {x1, y0}, {x1, y1}, {x0, y1});
    }

    /// Signed polygon area via the shoelace formula. Positive for
    /// clockwise winding in image (y-down) coordinates.
    double signed_area() const {
        double a = 0.0;
        for (int i = 0; i < 4; ++i) {
            const Vec2& p = corners[i];
            const Vec2& q = corners[(i + 1) % 4];
            a += p.x() * q.y() - q.x() * p.y();
        }
        return 0.5 * a;
    }

    double area() const { return std::abs(signed_area()); }

    bool finite() const {
        for (const Vec2& c : corners)
            if (!c.allFinite()) return false;
        return true;
    }

    Vec2 min_corner() const {
        Vec2 m = corners[0];
        for (int i = 1; i < 4; ++i) m = m.cwiseMin(corners[i]);
        return m;
    }
    Vec2 max_corner() const {
        Vec2 m = corners[0];
        for (int i = 1; i < 4; ++i) m = m.cwiseMax(corners[i]);
        return m;
    }

    QuadBox scaled(double sx, double sy) const {
        QuadBox out = *this;
        for (Vec2& c : out.corners) {
            c.x() *= sx;
            c.y() *= sy;
        }
        return out;
    }

    QuadBox translated(double dx, double dy) const {
        QuadBox out = *this;
        for (Vec2& c : out.corners) {
            c.x() += dx;
            c.y() += dy;
        }
        return out;
    }
};

/// Single-channel float field in [0,1]. `scale` is map pixels per
/// source-image pixel (0.25 means the map is a quarter of the image).
struct HeatMap {
    ArrayXX<float> values;  // (height, width)
    float scale = 1.0f;

    int height() const { return static_cast<int>(values.rows()); }
    int width() const { return static_cast<int>(values.cols()); }

    static HeatMap zeros(int height, int width, float scale = 1.0f) {
        HeatMap m;
        m.values = ArrayXX<float>::Zero(height, width);
        m.scale = scale;
        return m;
    }
};

}  // namespace tlgan
