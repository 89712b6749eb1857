#pragma once

#include <array>
#include <cmath>
#include <vector>

namespace zsim::geom {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    Vec2() = default;
    Vec2(double x_, double y_) : x(x_), y(y_) {}

    Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double k) const { return {x * k, y * k}; }
    double dot(const Vec2& o) const { return x * o.x + y * o.y; }
    double cross(const Vec2& o) const { return x * o.y - y * o.x; }
    double norm2() const { return x * x + y * y; }
    double norm() const { return std::sqrt(norm2()); }
    Vec2 rotated(double angle) const {
        double c = std::cos(angle), s = std::sin(angle);
        return {c * x - s * y, s * x + c * y};
    }
};

// Oriented rectangle, center + half extents + heading of the long axis.
struct Obb {
    Vec2 center;
    double half_len = 0.0;
    double half_wid = 0.0;
    double heading = 0.0;

    std::array<Vec2, 4> corners() const;
    Obb inflated(double margin) const { return {center, half_len + margin, half_wid + margin, heading}; }
};

// Squared distance from p to segment [a, b]; t_out receives the clamped
// parameter of the closest point.
double point_segment_dist2(const Vec2& p, const Vec2& a, const Vec2& b, double* t_out = nullptr);

double segment_segment_distance(const Vec2& a0, const Vec2& a1, const Vec2& b0, const Vec2& b1);

// Separating-axis overlap test for two oriented rectangles. Touching (zero
// gap) counts as overlap.
bool obb_overlap(const Obb& a, const Obb& b);

// Minimum distance between two oriented rectangles; 0 when they overlap.
double obb_distance(const Obb& a, const Obb& b);

bool point_in_convex_polygon(const Vec2& p, const std::array<Vec2, 4>& poly);

}  // namespace zsim::geom
