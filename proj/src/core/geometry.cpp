#include "core/geometry.hpp"

#include <algorithm>

namespace zsim::geom {

std::array<Vec2, 4> Obb::corners() const {
    double c = std::cos(heading), s = std::sin(heading);
    Vec2 ax{c * half_len, s * half_len};
    Vec2 ay{-s * half_wid, c * half_wid};
    return {Vec2{center.x + ax.x + ay.x, center.y + ax.y + ay.y},
            Vec2{center.x + ax.x - ay.x, center.y + ax.y - ay.y},
            Vec2{center.x - ax.x - ay.x, center.y - ax.y - ay.y},
            Vec2{center.x - ax.x + ay.x, center.y - ax.y + ay.y}};
}

double point_segment_dist2(const Vec2& p, const Vec2& a, const Vec2& b, double* t_out) {
    Vec2 ab = b - a;
    double len2 = ab.norm2();
    double t = 0.0;
    if (len2 > 0.0) t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
    Vec2 closest = a + ab * t;
    if (t_out) *t_out = t;
    return (p - closest).norm2();
}

double segment_segment_distance(const Vec2& a0, const Vec2& a1, const Vec2& b0, const Vec2& b1) {
    // Proper intersection means zero distance.
    auto orient = [](const Vec2& p, const Vec2& q, const Vec2& r) { return (q - p).cross(r - p); };
    double o1 = orient(a0, a1, b0), o2 = orient(a0, a1, b1);
    double o3 = orient(b0, b1, a0), o4 = orient(b0, b1, a1);
    if (((o1 > 0) != (o2 > 0) || o1 == 0 || o2 == 0) && ((o3 > 0) != (o4 > 0) || o3 == 0 || o4 == 0)) {
        // Candidate intersection; the endpoint checks below cover collinear
        // near-misses, so only accept strict straddling here.
        if ((o1 > 0) != (o2 > 0) && (o3 > 0) != (o4 > 0)) return 0.0;
    }
    double d2 = point_segment_dist2(a0, b0, b1);
    d2 = std::min(d2, point_segment_dist2(a1, b0, b1));
    d2 = std::min(d2, point_segment_dist2(b0, a0, a1));
    d2 = std::min(d2, point_segment_dist2(b1, a0, a1));
    return std::sqrt(d2);
}

namespace {

// Projects the corner set of `box` onto `axis` and checks for a gap against
// the other box. Axes are the two edge normals of each box.
bool separated_on_axis(const Vec2& axis, const std::array<Vec2, 4>& a, const std::array<Vec2, 4>& b) {
    double amin = 1e300, amax = -1e300, bmin = 1e300, bmax = -1e300;
    for (const auto& p : a) {
        double v = p.dot(axis);
        amin = std::min(amin, v);
        amax = std::max(amax, v);
    }
    for (const auto& p : b) {
        double v = p.dot(axis);
        bmin = std::min(bmin, v);
        bmax = std::max(bmax, v);
    }
    return amax < bmin || bmax < amin;
}

}  // namespace

bool obb_overlap(const Obb& a, const Obb& b) {
    auto ca = a.corners();
    auto cb = b.corners();
    double cah = std::cos(a.heading), sah = std::sin(a.heading);
    double cbh = std::cos(b.heading), sbh = std::sin(b.heading);
    const Vec2 axes[4] = {{cah, sah}, {-sah, cah}, {cbh, sbh}, {-sbh, cbh}};
    for (const auto& axis : axes) {
        if (separated_on_axis(axis, ca, cb)) return false;
    }
    return true;
}

double obb_distance(const Obb& a, const Obb& b) {
    if (obb_overlap(a, b)) return 0.0;
    auto ca = a.corners();
    auto cb = b.corners();
    double best = 1e300;
    for (int i = 0; i < 4; ++i) {
        for (int j = 0; j < 4; ++j) {
            best = std::min(best, segment_segment_distance(ca[i], ca[(i + 1) & 3], cb[j], cb[(j + 1) & 3]));
        }
    }
    return best;
}

bool point_in_convex_polygon(const Vec2& p, const std::array<Vec2, 4>& poly) {
    bool has_pos = false, has_neg = false;
    for (int i = 0; i < 4; ++i) {
        double c = (poly[(i + 1) & 3] - poly[i]).cross(p - poly[i]);
        has_pos |= c > 0;
        has_neg |= c < 0;
    }
    return !(has_pos && has_neg);
}

}  // namespace zsim::geom
