#include "core/roads.hpp"

#include <algorithm>
#include <cmath>

#include "core/common.hpp"

namespace zsim::roads {

namespace {

struct Polyline {
    std::vector<geom::Vec2> pts;
    std::vector<double> arc;  // cumulative length per vertex

    static Polyline from_xy(const std::vector<float>& xy) {
        Polyline p;
        p.pts.reserve(xy.size() / 2);
        for (size_t i = 0; i + 1 < xy.size(); i += 2) p.pts.push_back({double(xy[i]), double(xy[i + 1])});
        p.arc.resize(p.pts.size(), 0.0);
        for (size_t i = 1; i < p.pts.size(); ++i) {
            p.arc[i] = p.arc[i - 1] + (p.pts[i] - p.pts[i - 1]).norm();
        }
        return p;
    }

    double length() const { return arc.empty() ? 0.0 : arc.back(); }

    // Point at arc-length fraction u in [0, 1].
    geom::Vec2 at_fraction(double u) const {
        double target = u * length();
        size_t i = 1;
        while (i + 1 < pts.size() && arc[i] < target) ++i;
        double seg = arc[i] - arc[i - 1];
        double t = seg > 0 ? (target - arc[i - 1]) / seg : 0.0;
        t = std::clamp(t, 0.0, 1.0);
        return pts[i - 1] + (pts[i] - pts[i - 1]) * t;
    }
};

}  // namespace

RouteFrame RouteFrame::build(const scenario::Route& route) {
    RouteFrame frame;
    for (const auto& lane : route.lanes) {
        Polyline left = Polyline::from_xy(lane.left_xy);
        Polyline right = Polyline::from_xy(lane.right_xy);
        if (left.pts.size() < 2 || right.pts.size() < 2) {
            fail(ErrorKind::invalid_argument, "lane " + std::to_string(lane.lane_id) + ": border too short");
        }
        // Pointwise midpoints; resample the right border by arc fraction when
        // the borders disagree on vertex count.
        size_t n = left.pts.size();
        std::vector<geom::Vec2> center(n);
        std::vector<double> hw(n);
        bool pointwise = right.pts.size() == n;
        for (size_t i = 0; i < n; ++i) {
            geom::Vec2 r =
                pointwise ? right.pts[i] : right.at_fraction(n > 1 ? double(i) / double(n - 1) : 0.0);
            center[i] = (left.pts[i] + r) * 0.5;
            hw[i] = (left.pts[i] - r).norm() * 0.5;
        }
        // Arc length along the centerline, offset to the lane's valid
        // interval start, then clipped to [s_start, s_end].
        std::vector<double> s(n);
        s[0] = double(lane.s_start);
        for (size_t i = 1; i < n; ++i) s[i] = s[i - 1] + (center[i] - center[i - 1]).norm();

        LanePiece piece;
        piece.lane_id = lane.lane_id;
        double clip_end = double(lane.s_end);
        for (size_t i = 0; i < n; ++i) {
            if (s[i] > clip_end && !piece.center.empty()) {
                // Interpolated endpoint at the clip boundary.
                double seg = s[i] - s[i - 1];
                if (seg > 0 && s[i - 1] < clip_end) {
                    double t = (clip_end - s[i - 1]) / seg;
                    piece.center.push_back(center[i - 1] + (center[i] - center[i - 1]) * t);
                    piece.s.push_back(clip_end);
                    piece.half_width.push_back(hw[i - 1] + (hw[i] - hw[i - 1]) * t);
                }
                break;
            }
            piece.center.push_back(center[i]);
            piece.s.push_back(s[i]);
            piece.half_width.push_back(hw[i]);
        }
        if (piece.center.size() < 2) {
            fail(ErrorKind::invalid_argument,
                 "lane " + std::to_string(lane.lane_id) + ": valid interval clips away the centerline");
        }
        // Enforce strict monotonicity (duplicate vertices would stall s).
        for (size_t i = 1; i < piece.s.size(); ++i) {
            if (!(piece.s[i] > piece.s[i - 1])) {
                fail(ErrorKind::invalid_argument,
                     "lane " + std::to_string(lane.lane_id) + ": centerline arc length not increasing");
            }
        }
        frame.route_length = std::max(frame.route_length, piece.s.back());
        frame.lanes.push_back(std::move(piece));
    }
    return frame;
}

double RouteFrame::max_half_width() const {
    double hw = 0.0;
    for (const auto& lane : lanes) {
        for (double h : lane.half_width) hw = std::max(hw, h);
    }
    return hw;
}

namespace {

struct Candidate {
    double dist2 = 1e300;
    double s = 0.0;
    double d = 0.0;
    uint32_t lane_id = 0;
    double half_width = 0.0;
    bool set = false;
};

// Scan every segment of one lane; keep the closest point.
Candidate project_to_lane(const geom::Vec2& pos, const LanePiece& lane) {
    Candidate best;
    for (size_t i = 0; i + 1 < lane.center.size(); ++i) {
        double t = 0.0;
        double d2 = geom::point_segment_dist2(pos, lane.center[i], lane.center[i + 1], &t);
        if (d2 < best.dist2) {
            geom::Vec2 a = lane.center[i], b = lane.center[i + 1];
            geom::Vec2 tangent = b - a;
            double sign = tangent.cross(pos - (a + tangent * t)) >= 0.0 ? 1.0 : -1.0;
            best.dist2 = d2;
            best.s = lane.s[i] + (lane.s[i + 1] - lane.s[i]) * t;
            best.d = sign * std::sqrt(d2);
            best.lane_id = lane.lane_id;
            best.half_width = lane.half_width[i] + (lane.half_width[i + 1] - lane.half_width[i]) * t;
            best.set = true;
        }
    }
    return best;
}

}  // namespace

Projection project(const geom::Vec2& pos, const RouteFrame& frame) {
    if (frame.empty()) fail(ErrorKind::invalid_argument, "project: empty route frame");
    Candidate best;
    bool in_corridor = false;
    for (const auto& lane : frame.lanes) {
        Candidate c = project_to_lane(pos, lane);
        if (!c.set) continue;
        if (std::abs(c.d) <= c.half_width) in_corridor = true;
        if (!best.set || std::abs(c.d) < std::abs(best.d) ||
            (std::abs(c.d) == std::abs(best.d) && c.lane_id < best.lane_id)) {
            best = c;
        }
    }
    Projection p;
    p.s = std::clamp(best.s, 0.0, frame.route_length);
    p.d = best.d;
    p.lane_id = best.lane_id;
    p.in_corridor = in_corridor;
    return p;
}

geom::Vec2 RouteFrame::reconstruct(double s, double d) const {
    const LanePiece* pick = nullptr;
    for (const auto& lane : lanes) {
        if (s >= lane.s.front() - 1e-9 && s <= lane.s.back() + 1e-9) {
            if (!pick || lane.lane_id < pick->lane_id) pick = &lane;
        }
    }
    if (!pick) fail(ErrorKind::invalid_argument, "reconstruct: s outside every valid lane");
    const auto& lane = *pick;
    size_t i = 1;
    while (i + 1 < lane.s.size() && lane.s[i] < s) ++i;
    double seg = lane.s[i] - lane.s[i - 1];
    double t = seg > 0 ? std::clamp((s - lane.s[i - 1]) / seg, 0.0, 1.0) : 0.0;
    geom::Vec2 a = lane.center[i - 1], b = lane.center[i];
    geom::Vec2 p = a + (b - a) * t;
    geom::Vec2 tangent = b - a;
    double len = tangent.norm();
    if (len > 0) tangent = tangent * (1.0 / len);
    geom::Vec2 normal{-tangent.y, tangent.x};  // left of travel
    return p + normal * d;
}

namespace {

bool point_in_any_corridor(const geom::Vec2& p, const RouteFrame& frame) {
    for (const auto& lane : frame.lanes) {
        Candidate c = project_to_lane(p, lane);
        if (c.set && std::abs(c.d) <= c.half_width) return true;
    }
    return false;
}

}  // namespace

bool footprint_on_route(const geom::Obb& box, const RouteFrame& frame, double margin) {
    geom::Obb inflated = box.inflated(margin);
    for (const auto& corner : inflated.corners()) {
        if (!point_in_any_corridor(corner, frame)) return false;
    }
    return true;
}

std::vector<FeaturePoint> nearest_features(const geom::Vec2& pos,
                                           const std::vector<scenario::RoadFeature>& features, int k,
                                           double radius) {
    if (k <= 0) fail(ErrorKind::invalid_argument, "nearest_features: k must be > 0");
    struct Entry {
        double dist2;
        FeaturePoint fp;
    };
    std::vector<Entry> candidates;
    double r2 = radius * radius;
    for (const auto& f : features) {
        for (size_t i = 0; i + 1 < f.xy.size(); i += 2) {
            double dx = double(f.xy[i]) - pos.x;
            double dy = double(f.xy[i + 1]) - pos.y;
            double d2 = dx * dx + dy * dy;
            if (d2 <= r2) {
                candidates.push_back({d2, {f.xy[i], f.xy[i + 1], f.kind, f.directionality, true}});
            }
        }
    }
    size_t keep = std::min<size_t>(size_t(k), candidates.size());
    std::partial_sort(candidates.begin(), candidates.begin() + std::ptrdiff_t(keep), candidates.end(),
                      [](const Entry& a, const Entry& b) { return a.dist2 < b.dist2; });
    std::vector<FeaturePoint> out(static_cast<size_t>(k));
    for (size_t i = 0; i < keep; ++i) out[i] = candidates[i].fp;
    return out;
}

RouteContext RouteContext::build(const scenario::Scenario& s) {
    RouteContext ctx;
    ctx.frame = RouteFrame::build(s.route);
    for (size_t i = 0; i < s.stop_lines.size(); ++i) {
        Projection p = project({double(s.stop_lines[i].pos_x), double(s.stop_lines[i].pos_y)}, ctx.frame);
        if (p.in_corridor) ctx.stop_lines.push_back({int(i), p.s});
    }
    for (size_t i = 0; i < s.traffic_lights.size(); ++i) {
        Projection p =
            project({double(s.traffic_lights[i].stop_x), double(s.traffic_lights[i].stop_y)}, ctx.frame);
        if (p.in_corridor) ctx.lights.push_back({int(i), p.s});
    }
    return ctx;
}

StopInfo stop_info(const Projection& proj, const RouteContext& ctx, const scenario::Scenario& s, int t) {
    StopInfo info;
    double best_stop = 1e300;
    for (const auto& sl : ctx.stop_lines) {
        double ahead = sl.s - proj.s;
        if (ahead > 0.0 && ahead < best_stop) best_stop = ahead;
    }
    if (best_stop < 1e300) info.dist_stop_line = best_stop;
    double best_light = 1e300;
    int best_index = -1;
    for (const auto& li : ctx.lights) {
        double ahead = li.s - proj.s;
        if (ahead > 0.0 && ahead < best_light) {
            best_light = ahead;
            best_index = li.index;
        }
    }
    if (best_index >= 0) {
        info.dist_light = best_light;
        const auto& states = s.traffic_lights[size_t(best_index)].state;
        int step = std::min(t, int(states.size()) - 1);
        info.next_light_state = scenario::LightState(states[size_t(std::max(step, 0))]);
    }
    return info;
}

}  // namespace zsim::roads
