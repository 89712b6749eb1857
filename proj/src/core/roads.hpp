#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "core/geometry.hpp"
#include "core/scenario.hpp"

namespace zsim::roads {

// One lane of the route frame, already clipped to its valid s-interval.
// Vertices carry the global route arc length and the local corridor
// half-width (distance between borders / 2, interpolated linearly).
struct LanePiece {
    uint32_t lane_id = 0;
    std::vector<geom::Vec2> center;
    std::vector<double> s;           // strictly increasing, global route arc length
    std::vector<double> half_width;  // per vertex
};

struct RouteFrame {
    std::vector<LanePiece> lanes;
    double route_length = 0.0;

    static RouteFrame build(const scenario::Route& route);

    bool empty() const { return lanes.empty(); }
    double max_half_width() const;

    // Cartesian point for (s, d) on the closest valid lane; used by tests
    // and the projection-idempotence property.
    geom::Vec2 reconstruct(double s, double d) const;
};

struct Projection {
    double s = 0.0;  // clamped to [0, route_length]
    double d = 0.0;  // signed lateral offset, left of travel positive
    uint32_t lane_id = 0;
    bool in_corridor = false;  // point within some valid lane corridor
};

// Total projection: closest valid lane segment by Euclidean distance,
// ties broken by smaller |d| then lower lane_id.
Projection project(const geom::Vec2& pos, const RouteFrame& frame);

inline double progress_delta(const Projection& prev, const Projection& cur) { return cur.s - prev.s; }

// True iff all four corners of the margin-inflated box lie inside the union
// of valid lane corridors.
bool footprint_on_route(const geom::Obb& box, const RouteFrame& frame, double margin);

struct FeaturePoint {
    float x = 0.f;
    float y = 0.f;
    scenario::FeatureKind kind = scenario::FeatureKind::lane_marking;
    scenario::Directionality directionality = scenario::Directionality::none;
    bool valid = false;
};

// The k nearest feature polyline points within `radius` of pos, sorted by
// distance, padded with invalid entries up to k.
std::vector<FeaturePoint> nearest_features(const geom::Vec2& pos,
                                           const std::vector<scenario::RoadFeature>& features, int k,
                                           double radius);

// Stop lines / signals resolved onto the route s-axis. Entries that do not
// project into a lane corridor are dropped (cross-traffic signals).
struct RouteContext {
    RouteFrame frame;
    struct StopLineAt {
        int index;  // into scenario.stop_lines
        double s;
    };
    struct LightAt {
        int index;  // into scenario.traffic_lights
        double s;
    };
    std::vector<StopLineAt> stop_lines;
    std::vector<LightAt> lights;

    static RouteContext build(const scenario::Scenario& s);
};

struct StopInfo {
    std::optional<double> dist_stop_line;
    scenario::LightState next_light_state = scenario::LightState::unknown;
    std::optional<double> dist_light;
};

// Nearest stop line / signal stop point strictly ahead of proj.s at step t.
StopInfo stop_info(const Projection& proj, const RouteContext& ctx, const scenario::Scenario& s, int t);

}  // namespace zsim::roads
