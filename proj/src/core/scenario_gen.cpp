#include "core/scenario_gen.hpp"

#include <algorithm>
#include <cmath>

#include "core/common.hpp"
#include "core/geometry.hpp"
#include "core/simcore.hpp"

namespace zsim::scenario {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Dense centerline with pose per sample; everything else (borders, agent
// lanes, features) is derived by normal offset.
struct Path {
    std::vector<double> s, x, y, heading;

    double length() const { return s.empty() ? 0.0 : s.back(); }

    size_t locate(double at) const {
        auto it = std::lower_bound(s.begin(), s.end(), at);
        if (it == s.begin()) return 0;
        return size_t(it - s.begin()) - 1;
    }

    geom::Vec2 pos(double at) const {
        size_t i = locate(at);
        if (i + 1 >= s.size()) return {x.back(), y.back()};
        double seg = s[i + 1] - s[i];
        double t = seg > 0 ? std::clamp((at - s[i]) / seg, 0.0, 1.0) : 0.0;
        return {x[i] + (x[i + 1] - x[i]) * t, y[i] + (y[i + 1] - y[i]) * t};
    }

    double heading_at(double at) const {
        size_t i = locate(at);
        if (i + 1 >= s.size()) return heading.back();
        return heading[i];  // piecewise-constant is plenty at 0.25 m sampling
    }

    geom::Vec2 offset_pos(double at, double lateral) const {
        geom::Vec2 p = pos(at);
        double h = heading_at(at);
        return {p.x - std::sin(h) * lateral, p.y + std::cos(h) * lateral};
    }

    std::vector<float> offset_polyline(double lateral, double spacing, double s0, double s1) const {
        std::vector<float> xy;
        s1 = std::min(s1, length());
        for (double at = s0; at < s1; at += spacing) {
            geom::Vec2 p = offset_pos(at, lateral);
            xy.push_back(float(p.x));
            xy.push_back(float(p.y));
        }
        geom::Vec2 p = offset_pos(s1, lateral);
        xy.push_back(float(p.x));
        xy.push_back(float(p.y));
        return xy;
    }
};

struct Segment {
    double length = 0.0;
    double curvature = 0.0;  // 1/radius, signed; 0 = straight
};

Path build_path(const geom::Vec2& origin, double heading0, const std::vector<Segment>& segments,
                double ds = 0.25) {
    Path p;
    double x = origin.x, y = origin.y, h = heading0, s = 0.0;
    p.s.push_back(s);
    p.x.push_back(x);
    p.y.push_back(y);
    p.heading.push_back(h);
    for (const auto& seg : segments) {
        double done = 0.0;
        while (done < seg.length) {
            double step = std::min(ds, seg.length - done);
            x += std::cos(h) * step;
            y += std::sin(h) * step;
            h += seg.curvature * step;
            s += step;
            done += step;
            p.s.push_back(s);
            p.x.push_back(x);
            p.y.push_back(y);
            p.heading.push_back(h);
        }
    }
    return p;
}

enum class Topology { straight, curve, junction };

struct SlowZone {
    double s_begin = 0.0;
    double s_end = 0.0;
    double v = 0.0;
};

struct StopEvent {
    double s = 0.0;
    bool served = false;
};

// Governing speed at arc position `at`: cruise, capped by braking curves
// toward slow zones and unserved stops ahead.
double plan_speed(double at, double cruise, const std::vector<SlowZone>& zones,
                  const std::vector<StopEvent>& stops) {
    constexpr double brake = 1.6;  // below the -2 bin, leaves margin
    double v = cruise;
    for (const auto& z : zones) {
        if (at >= z.s_begin && at <= z.s_end) {
            v = std::min(v, z.v);
        } else if (at < z.s_begin) {
            double dist = z.s_begin - at;
            v = std::min(v, std::sqrt(z.v * z.v + 2.0 * brake * dist));
        }
    }
    for (const auto& st : stops) {
        if (st.served) continue;
        double target = st.s - 1.0;  // creep point just before the line
        if (at < target) {
            double dist = target - at;
            v = std::min(v, std::sqrt(0.0025 + 2.0 * brake * dist));
        } else if (at < st.s + 0.5) {
            v = std::min(v, 0.05);
        }
    }
    return v;
}

struct EgoTrace {
    EgoLog log;
    double final_s = 0.0;
};

// Rolls the bicycle model with binned actions: speed tracking against
// plan_speed, pure-pursuit steering on the path. The produced log is exactly
// reproducible from its own inverse dynamics.
EgoTrace drive_ego(const Path& path, double s0, double v0, double cruise, const std::vector<SlowZone>& zones,
                   std::vector<StopEvent> stops, int num_steps, const sim::SimConfig& scfg, double dt,
                   const dyn::ActionTable& table) {
    EgoTrace out;
    dyn::EgoState e;
    geom::Vec2 p0 = path.pos(s0);
    e.x = p0.x;
    e.y = p0.y;
    e.heading = path.heading_at(s0);
    e.v = v0;
    e.steering = 0.0;
    double s_ego = s0;
    size_t idx = path.locate(s0);

    auto log_state = [&](const dyn::EgoState& st) {
        out.log.x.push_back(float(st.x));
        out.log.y.push_back(float(st.y));
        out.log.heading.push_back(float(st.heading));
        out.log.v.push_back(float(st.v));
    };
    log_state(e);

    for (int t = 0; t + 1 < num_steps; ++t) {
        // march the path pointer to the closest sample
        while (idx + 1 < path.s.size()) {
            double dx0 = path.x[idx] - e.x, dy0 = path.y[idx] - e.y;
            double dx1 = path.x[idx + 1] - e.x, dy1 = path.y[idx + 1] - e.y;
            if (dx1 * dx1 + dy1 * dy1 < dx0 * dx0 + dy0 * dy0) {
                ++idx;
            } else {
                break;
            }
        }
        s_ego = path.s[idx];

        for (auto& st : stops) {
            if (!st.served && e.v < 0.09 && s_ego >= st.s - 1.9 && s_ego <= st.s) st.served = true;
        }

        double target = plan_speed(s_ego, cruise, zones, stops);
        double dv = target - e.v;
        int ai;
        if (e.v < 0.12 && dv < 0.2 && dv > -0.2) {
            ai = table.nearest_accel(0.0);  // hold during a stop, avoid the v=0 clamp
        } else if (dv >= 0.25) {
            ai = table.nearest_accel(2.0);
        } else if (dv >= 0.05) {
            ai = table.nearest_accel(0.5);
        } else if (dv <= -1.2) {
            ai = table.nearest_accel(-4.0);
        } else if (dv <= -0.25) {
            ai = table.nearest_accel(-2.0);
        } else if (dv <= -0.05 && e.v >= 0.06) {
            ai = table.nearest_accel(-0.5);
        } else {
            ai = table.nearest_accel(0.0);
        }

        double lookahead = std::clamp(1.2 + 0.5 * e.v, 2.5, 7.0);
        geom::Vec2 target_pt = path.pos(std::min(s_ego + lookahead, path.length()));
        double alpha = wrap_angle(std::atan2(target_pt.y - e.y, target_pt.x - e.x) - e.heading);
        double delta_des = std::atan(2.0 * scfg.wheelbase * std::sin(alpha) / lookahead);
        delta_des = std::clamp(delta_des, -scfg.limits.delta_max, scfg.limits.delta_max);
        int si;
        if (std::abs(delta_des - e.steering) < 0.003) {
            si = table.nearest_steer(0.0);
        } else {
            si = table.nearest_steer((delta_des - e.steering) / dt);
        }

        auto [a, dd] = table.decode(ai, si);
        e = dyn::bicycle_step(e, a, dd, dt, scfg.wheelbase, scfg.limits);
        log_state(e);
    }
    // final path position
    while (idx + 1 < path.s.size()) {
        double dx0 = path.x[idx] - e.x, dy0 = path.y[idx] - e.y;
        double dx1 = path.x[idx + 1] - e.x, dy1 = path.y[idx + 1] - e.y;
        if (dx1 * dx1 + dy1 * dy1 < dx0 * dx0 + dy0 * dy0) {
            ++idx;
        } else {
            break;
        }
    }
    out.final_s = path.s[idx];
    return out;
}

// Constant-plan traffic moving along an offset of `path` (or its own path),
// logged directly; no dynamics needed for replayed agents.
LoggedAgent drive_along(const Path& path, double lateral, double s_begin, double speed, bool reversed,
                        int num_steps, double dt, const std::string& id, int valid_from = 0,
                        const std::vector<SlowZone>* zones = nullptr, double cruise = 0.0) {
    LoggedAgent a;
    a.id = id;
    a.length = 4.4f;
    a.width = 1.8f;
    double s = s_begin;
    double v = speed;
    for (int t = 0; t < num_steps; ++t) {
        double at = std::clamp(s, 0.0, path.length());
        geom::Vec2 p = path.offset_pos(at, lateral);
        double h = path.heading_at(at);
        if (reversed) h = wrap_angle(h + kPi);
        a.x.push_back(float(p.x));
        a.y.push_back(float(p.y));
        a.heading.push_back(float(h));
        a.speed.push_back(float(v));
        bool in_range = s >= -1.0 && s <= path.length() + 1.0;
        a.valid.push_back(t >= valid_from && in_range ? 1 : 0);
        if (zones) {
            double target = plan_speed(at, cruise, *zones, {});
            if (v < target - 0.05) {
                v = std::min(target, v + 1.5 * dt);
            } else if (v > target + 0.05) {
                v = std::max(target, v - 1.8 * dt);
            }
        }
        s += (reversed ? -v : v) * dt;
    }
    return a;
}

struct Builder {
    const GeneratorConfig& cfg;
    Rng rng;
    sim::SimConfig scfg;
    dyn::ActionTable table = dyn::ActionTable::defaults();

    Scenario build(int index, Topology topo);
};

Scenario Builder::build(int index, Topology topo) {
    Scenario sc;
    sc.id = cfg.id_prefix + "-" + std::to_string(index);
    sc.num_steps = uint32_t(cfg.num_steps);
    sc.dt = cfg.dt;
    sc.speed_limit = float(cfg.speed_limit);

    double cruise = cfg.speed_limit - rng.uniform(0.6, 1.6);
    double v0 = cruise * rng.uniform(0.55, 1.0);
    double heading0 = rng.uniform(-kPi, kPi);
    geom::Vec2 origin{rng.uniform(-200.0, 200.0), rng.uniform(-200.0, 200.0)};
    double horizon_m = cruise * cfg.num_steps * cfg.dt;
    double half_lane = cfg.lane_width * 0.5;

    std::vector<Segment> segments;
    std::vector<SlowZone> zones;
    std::vector<StopEvent> stops;
    double s_junction = 0.0;  // entry of the junction (stop point), if any
    double turn_radius = 0.0;
    bool stop_sign = false;

    switch (topo) {
        case Topology::straight: {
            segments.push_back({horizon_m + 60.0, 0.0});
            break;
        }
        case Topology::curve: {
            double radius = rng.uniform(25.0, 60.0);
            double angle = rng.uniform(kPi / 6, kPi / 2) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
            double arc_len = radius * std::abs(angle);
            double lead = std::max(18.0, 0.35 * horizon_m);
            segments.push_back({lead, 0.0});
            segments.push_back({arc_len, angle > 0 ? 1.0 / radius : -1.0 / radius});
            segments.push_back({horizon_m + 60.0, 0.0});
            double v_turn = std::min(cruise, std::sqrt(2.2 * radius));
            if (v_turn < cruise) zones.push_back({lead - 2.0, lead + arc_len, v_turn});
            break;
        }
        case Topology::junction: {
            turn_radius = rng.uniform(8.0, 12.0);
            stop_sign = rng.uniform() < cfg.stop_sign_share;
            double approach = std::max(26.0, 0.45 * horizon_m);
            s_junction = approach;
            double arc_len = turn_radius * kPi / 2;
            segments.push_back({approach, 0.0});
            segments.push_back({arc_len, -1.0 / turn_radius});  // right turn
            segments.push_back({horizon_m + 60.0, 0.0});
            double v_turn = std::min(cruise, std::sqrt(2.0 * turn_radius));
            zones.push_back({approach - 2.0, approach + arc_len, v_turn});
            if (stop_sign) stops.push_back({approach, false});
            break;
        }
    }

    Path path = build_path(origin, heading0, segments);

    double s0 = 5.0;
    EgoTrace ego = drive_ego(path, s0, v0, cruise, zones, stops, cfg.num_steps, scfg, cfg.dt, table);
    sc.ego = ego.log;

    // goal a little past the final logged position so replaying the log never
    // terminates early
    geom::Vec2 goal = path.pos(std::min(ego.final_s + 4.0, path.length()));
    sc.goal_x = float(goal.x);
    sc.goal_y = float(goal.y);

    double route_end = std::min(ego.final_s + 16.0, path.length());

    // --- route lanes ---------------------------------------------------------
    uint32_t lane_id = 0;
    auto add_lane = [&](double lateral, double ls0, double ls1, double valid0, double valid1) {
        RouteLane lane;
        lane.lane_id = lane_id++;
        lane.left_xy = path.offset_polyline(lateral + half_lane, 2.0, ls0, ls1);
        lane.right_xy = path.offset_polyline(lateral - half_lane, 2.0, ls0, ls1);
        lane.s_start = float(valid0);
        lane.s_end = float(valid1);
        sc.route.lanes.push_back(std::move(lane));
    };
    if (topo == Topology::junction) {
        // ego lane split at the junction so the turn lane is the only valid
        // connection through it; a short straight decoy keeps a sliver of
        // validity past the entry
        add_lane(0.0, 0.0, s_junction, 0.0, s_junction);
        add_lane(0.0, s_junction, route_end, s_junction, route_end);
        // neighbor lane, valid on the approach only
        if (s_junction > 12.0) add_lane(cfg.lane_width, 0.0, s_junction - 4.0, 0.0, s_junction - 4.0);
        // straight-through decoy geometry: continue the approach direction
        {
            Path decoy = build_path(path.pos(s_junction), path.heading_at(s_junction), {{22.0, 0.0}});
            RouteLane lane;
            lane.lane_id = lane_id++;
            lane.left_xy = decoy.offset_polyline(half_lane, 2.0, 0.0, decoy.length());
            lane.right_xy = decoy.offset_polyline(-half_lane, 2.0, 0.0, decoy.length());
            lane.s_start = float(s_junction);
            lane.s_end = float(s_junction + 3.0);
            sc.route.lanes.push_back(std::move(lane));
        }
    } else {
        add_lane(0.0, 0.0, route_end, 0.0, route_end);
        if (topo == Topology::straight && rng.uniform() < 0.3) {
            add_lane(cfg.lane_width, 0.0, route_end, 0.0, route_end);
        }
    }

    // --- road features -------------------------------------------------------
    auto add_feature = [&](FeatureKind kind, Directionality dir, std::vector<float> xy) {
        if (xy.size() >= 4) sc.road_features.push_back({kind, dir, std::move(xy)});
    };
    add_feature(FeatureKind::lane_marking, Directionality::forward,
                path.offset_polyline(half_lane, 2.5, 0.0, route_end));
    add_feature(FeatureKind::lane_marking, Directionality::forward,
                path.offset_polyline(-half_lane, 2.5, 0.0, route_end));
    double edge_right = -half_lane - rng.uniform(0.6, 1.4);
    double edge_left = (topo == Topology::junction ? 1.5 : 1.0) * cfg.lane_width + half_lane + 0.8;
    add_feature(FeatureKind::road_edge, Directionality::none,
                path.offset_polyline(edge_right, 3.0, 0.0, route_end));
    add_feature(FeatureKind::road_edge, Directionality::none,
                path.offset_polyline(edge_left, 3.0, 0.0, route_end));
    if (rng.uniform() < 0.4) {
        add_feature(FeatureKind::bike_lane_boundary, Directionality::forward,
                    path.offset_polyline(-half_lane - 0.4, 2.5, 0.0, route_end * 0.6));
    }

    // --- junction furniture: stop line / signal, crosswalk, cross traffic ----
    int t_green = -1;
    if (topo == Topology::junction) {
        geom::Vec2 line_c = path.pos(s_junction);
        double h = path.heading_at(s_junction);
        geom::Vec2 n{-std::sin(h), std::cos(h)};
        std::vector<float> line_xy = {float(line_c.x - n.x * half_lane), float(line_c.y - n.y * half_lane),
                                      float(line_c.x + n.x * half_lane), float(line_c.y + n.y * half_lane)};
        add_feature(FeatureKind::stop_line, Directionality::none, line_xy);
        std::vector<float> cross_xy;
        for (int i = -2; i <= 2; ++i) {
            geom::Vec2 q = path.offset_pos(s_junction + 2.0, double(i) * 1.2);
            cross_xy.push_back(float(q.x));
            cross_xy.push_back(float(q.y));
        }
        add_feature(FeatureKind::crosswalk, Directionality::both, cross_xy);

        // locate the ego's crossing step
        int t_cross = cfg.num_steps - 1;
        {
            roads::RouteFrame frame = roads::RouteFrame::build(sc.route);
            for (int t = 0; t < cfg.num_steps; ++t) {
                auto p = roads::project({double(sc.ego.x[size_t(t)]), double(sc.ego.y[size_t(t)])}, frame);
                if (p.s >= s_junction) {
                    t_cross = t;
                    break;
                }
            }
        }

        if (stop_sign) {
            StopLine sl;
            sl.xy = line_xy;
            sl.pos_x = float(line_c.x);
            sl.pos_y = float(line_c.y);
            sc.stop_lines.push_back(std::move(sl));
        } else {
            t_green = std::max(1, t_cross - int(rng.uniform(15.0, 25.0)));
            TrafficLight tl;
            tl.signal_id = 1;
            tl.stop_x = float(line_c.x);
            tl.stop_y = float(line_c.y);
            tl.state.assign(size_t(cfg.num_steps), uint8_t(LightState::green));
            int t_unknown_end = t_green > 8 ? 5 : 0;
            int t_yellow = std::min(cfg.num_steps, t_cross + 10);
            for (int t = 0; t < cfg.num_steps; ++t) {
                LightState st;
                if (t < t_unknown_end) {
                    st = LightState::unknown;
                } else if (t < t_green) {
                    st = LightState::red;
                } else if (t < t_yellow) {
                    st = LightState::green;
                } else if (t < t_yellow + 8) {
                    st = LightState::yellow;
                } else {
                    st = LightState::red;
                }
                tl.state[size_t(t)] = uint8_t(st);
            }
            sc.traffic_lights.push_back(std::move(tl));
        }
    }

    // --- other agents --------------------------------------------------------
    int target_agents = int(std::floor(cfg.density * route_end / 50.0 + rng.uniform(0.0, 0.999)));
    int capacity = 0;
    bool lead_ok = topo != Topology::junction;
    int oncoming_cap = std::max(0, int(route_end / 30.0));
    int cross_cap = (topo == Topology::junction && !stop_sign && t_green > 24) ? 1 : 0;
    int adjacent_cap = (topo == Topology::junction && s_junction > 30.0) ? 1 : 0;
    capacity = (lead_ok ? 1 : 0) + oncoming_cap + cross_cap + adjacent_cap;
    if (target_agents > capacity) {
        fail(ErrorKind::config, "generate_synthetic: density " + std::to_string(cfg.density) +
                                    " needs " + std::to_string(target_agents) + " agents but topology `" +
                                    (topo == Topology::straight ? "straight"
                                     : topo == Topology::curve  ? "curve"
                                                                : "junction") +
                                    "` fits only " + std::to_string(capacity) +
                                    " without initial overlap");
    }

    int agent_no = 0;
    int remaining = target_agents;
    double oncoming_lat = (topo == Topology::junction ? 2.0 : 1.0) * cfg.lane_width;
    if (lead_ok && remaining > 0) {
        double gap = rng.uniform(20.0, 32.0);
        double v_lead = cruise + rng.uniform(0.0, 1.5);
        sc.agents.push_back(drive_along(path, 0.0, s0 + gap, v_lead, false, cfg.num_steps, cfg.dt,
                                        "lead-" + std::to_string(agent_no++), 0, &zones, v_lead));
        --remaining;
    }
    if (cross_cap > 0 && remaining > 0) {
        // crosses the junction box while the ego light is red
        double h = path.heading_at(s_junction);
        geom::Vec2 c = path.pos(std::min(s_junction + turn_radius + 2.0, path.length()));
        Path cross = build_path({c.x - std::sin(h) * -40.0, c.y + std::cos(h) * -40.0},
                                wrap_angle(h + kPi / 2), {{80.0, 0.0}});
        double v_cross = 8.0;
        double t_mid = std::max(2.0, (double(t_green) * cfg.dt) - rng.uniform(1.6, 2.4) - 40.0 / v_cross);
        double s_begin = 40.0 - v_cross * t_mid - 40.0;
        sc.agents.push_back(drive_along(cross, 0.0, s_begin + 40.0, v_cross, false, cfg.num_steps, cfg.dt,
                                        "cross-" + std::to_string(agent_no++)));
        --remaining;
    }
    if (adjacent_cap > 0 && remaining > 0) {
        Path decoy_full = build_path(path.pos(0.0), path.heading_at(0.0), {{s_junction + 40.0, 0.0}});
        sc.agents.push_back(drive_along(decoy_full, cfg.lane_width, s0 + rng.uniform(12.0, 24.0),
                                        cruise * 0.9, false, cfg.num_steps, cfg.dt,
                                        "adj-" + std::to_string(agent_no++)));
        --remaining;
    }
    int placed_oncoming = 0;
    while (remaining > 0 && placed_oncoming < oncoming_cap) {
        double v_on = rng.uniform(6.0, 9.0);
        double s_begin = route_end * rng.uniform(0.5, 1.0) + double(placed_oncoming) * 28.0;
        int valid_from = placed_oncoming == 1 ? int(rng.uniform(15.0, 35.0)) : 0;
        sc.agents.push_back(drive_along(path, oncoming_lat, s_begin, v_on, true, cfg.num_steps, cfg.dt,
                                        "onc-" + std::to_string(agent_no++), valid_from));
        ++placed_oncoming;
        --remaining;
    }

    return sc;
}

// Full replay check: the logged ego, driven by its own recovered actions,
// must trigger no done signal, latch no violation event over the whole
// horizon, and land on the logged final arc position.
bool replays_clean(const Scenario& sc, const sim::SimConfig& base) {
    auto shared = std::make_shared<const Scenario>(sc);
    auto batch = std::make_shared<const ScenarioBatch>(make_batch({shared}, int(sc.num_steps)));

    sim::SimConfig cfgs[2] = {base, base};
    cfgs[1].disable_dones = true;
    for (const auto& cfg : cfgs) {
        sim::Env env(batch, cfg);
        auto actions = sim::recover_logged_actions(sc, env.action_table(), cfg);
        sim::ScriptedPolicy policy({actions}, env.action_table().nearest_accel(0.0),
                                   env.action_table().nearest_steer(0.0));
        auto ep = env.rollout(policy, int(sc.num_steps) - 1, 1);
        if (ep.terminal[0] != sim::DoneReason::none) return false;
        if (ep.events[0] != 0) return false;
        double logged = env.logged_progress(0);
        if (logged < 0.5) return false;
        double final_s = ep.s[ep.at(0, int(sc.num_steps) - 2)];
        double ratio = (double(final_s) - env.initial_s(0)) / logged;
        if (std::abs(ratio - 1.0) > 1e-6) return false;
    }
    return true;
}

}  // namespace

GeneratorConfig GeneratorConfig::from_kv(const cfg::KeyValue& kv) {
    GeneratorConfig c;
    c.count = int(kv.get_int("count", c.count));
    c.num_steps = int(kv.get_int("num_steps", c.num_steps));
    c.t_bound = int(kv.get_int("t_bound", c.t_bound));
    c.dt = kv.get_double("dt", c.dt);
    c.mix_straight = kv.get_double("mix_straight", c.mix_straight);
    c.mix_curve = kv.get_double("mix_curve", c.mix_curve);
    c.mix_junction = kv.get_double("mix_junction", c.mix_junction);
    c.stop_sign_share = kv.get_double("stop_sign_share", c.stop_sign_share);
    c.density = kv.get_double("density", c.density);
    c.lane_width = kv.get_double("lane_width", c.lane_width);
    c.speed_limit = kv.get_double("speed_limit", c.speed_limit);
    c.id_prefix = kv.get_string("id_prefix", c.id_prefix);
    return c;
}

cfg::KeyValue GeneratorConfig::to_kv() const {
    cfg::KeyValue kv;
    kv.set("count", int64_t(count));
    kv.set("num_steps", int64_t(num_steps));
    kv.set("t_bound", int64_t(t_bound));
    kv.set("dt", dt);
    kv.set("mix_straight", mix_straight);
    kv.set("mix_curve", mix_curve);
    kv.set("mix_junction", mix_junction);
    kv.set("stop_sign_share", stop_sign_share);
    kv.set("density", density);
    kv.set("lane_width", lane_width);
    kv.set("speed_limit", speed_limit);
    kv.set("id_prefix", id_prefix);
    return kv;
}

void GeneratorConfig::validate() const {
    if (count <= 0) fail(ErrorKind::config, "generator: count must be > 0");
    if (num_steps < 2) fail(ErrorKind::config, "generator: num_steps must be >= 2");
    if (num_steps > t_bound) fail(ErrorKind::config, "generator: num_steps exceeds t_bound");
    if (!(dt > 0.0)) fail(ErrorKind::config, "generator: dt must be > 0");
    if (mix_straight < 0 || mix_curve < 0 || mix_junction < 0 ||
        mix_straight + mix_curve + mix_junction <= 0) {
        fail(ErrorKind::config, "generator: topology mix must be non-negative and non-empty");
    }
    if (density < 0) fail(ErrorKind::config, "generator: density must be >= 0");
    if (lane_width < 2.4) fail(ErrorKind::config, "generator: lane_width too narrow for the ego");
    if (speed_limit <= 2.0) fail(ErrorKind::config, "generator: speed_limit too low");
}

std::vector<Scenario> generate_synthetic(const GeneratorConfig& config, uint64_t seed) {
    config.validate();
    sim::SimConfig scfg;  // generation is checked against simulator defaults
    std::vector<Scenario> out;
    out.reserve(size_t(config.count));
    Rng root(seed);
    double mix_total = config.mix_straight + config.mix_curve + config.mix_junction;
    for (int i = 0; i < config.count; ++i) {
        Rng scenario_rng = root.split(uint64_t(i));
        Scenario sc;
        bool ok = false;
        std::string last_err;
        for (int attempt = 0; attempt < 24 && !ok; ++attempt) {
            Builder b{config, scenario_rng.split(uint64_t(attempt)), scfg};
            double pick = b.rng.uniform() * mix_total;
            Topology topo = pick < config.mix_straight                    ? Topology::straight
                            : pick < config.mix_straight + config.mix_curve ? Topology::curve
                                                                            : Topology::junction;
            sc = b.build(i, topo);
            if (auto msg = validate(sc)) {
                last_err = *msg;
                continue;
            }
            ok = replays_clean(sc, scfg);
            if (!ok) last_err = "log replay not clean";
        }
        if (!ok) {
            fail(ErrorKind::runtime,
                 "generate_synthetic: scenario " + std::to_string(i) + " failed after retries: " + last_err);
        }
        out.push_back(std::move(sc));
    }
    return out;
}

}  // namespace zsim::scenario
