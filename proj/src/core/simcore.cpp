#include "core/simcore.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstring>
#include <sstream>
#include <thread>

#include "core/common.hpp"

namespace zsim::sim {

const char* done_reason_name(DoneReason r) {
    switch (r) {
        case DoneReason::none: return "none";
        case DoneReason::collision: return "collision";
        case DoneReason::off_route: return "off_route";
        case DoneReason::red_light: return "red_light";
        case DoneReason::stop_line: return "stop_line";
        case DoneReason::goal_reached: return "goal_reached";
    }
    return "?";
}

void ObservationBatch::resize(const ObsSpec& s, int b) {
    spec = s;
    batch = b;
    active.assign(size_t(b) * ObsSpec::active_feat, 0.f);
    agents.assign(size_t(b) * size_t(s.n_agents) * ObsSpec::agent_feat, 0.f);
    road.assign(size_t(b) * size_t(s.n_road) * ObsSpec::road_feat, 0.f);
    route.assign(size_t(b) * size_t(s.n_route) * ObsSpec::route_feat, 0.f);
    value_only.assign(size_t(b) * ObsSpec::value_feat, 0.f);
}

void ObservationBatch::zero_row(int b) {
    std::fill_n(active_row(b), ObsSpec::active_feat, 0.f);
    std::fill_n(agents_row(b), size_t(spec.n_agents) * ObsSpec::agent_feat, 0.f);
    std::fill_n(road_row(b), size_t(spec.n_road) * ObsSpec::road_feat, 0.f);
    std::fill_n(route_row(b), size_t(spec.n_route) * ObsSpec::route_feat, 0.f);
    std::fill_n(value_row(b), ObsSpec::value_feat, 0.f);
}

void ObservationBatch::copy_row(const ObservationBatch& src, int src_row, int dst_row) {
    std::copy_n(src.active_row(src_row), ObsSpec::active_feat, active_row(dst_row));
    std::copy_n(src.agents_row(src_row), size_t(spec.n_agents) * ObsSpec::agent_feat, agents_row(dst_row));
    std::copy_n(src.road_row(src_row), size_t(spec.n_road) * ObsSpec::road_feat, road_row(dst_row));
    std::copy_n(src.route_row(src_row), size_t(spec.n_route) * ObsSpec::route_feat, route_row(dst_row));
    std::copy_n(src.value_row(src_row), ObsSpec::value_feat, value_row(dst_row));
}

void StepOut::resize(int b) {
    reward.assign(size_t(b), 0.f);
    event.assign(size_t(b), DoneReason::none);
    s.assign(size_t(b), 0.f);
    a_lat.assign(size_t(b), 0.f);
    a_lon.assign(size_t(b), 0.f);
    v.assign(size_t(b), 0.f);
}

void PolicyOut::resize(int b) {
    accel_idx.assign(size_t(b), 0);
    steer_idx.assign(size_t(b), 0);
    logp.assign(size_t(b), 0.f);
    value.assign(size_t(b), 0.f);
}

void ScriptedPolicy::act(const ObservationBatch& obs, const std::vector<int32_t>& step_index,
                         std::vector<uint64_t>& rng, PolicyOut& out) {
    (void)rng;
    out.resize(obs.batch);
    for (int b = 0; b < obs.batch; ++b) {
        const auto& script = actions_[size_t(b)];
        int t = step_index[size_t(b)];
        if (t >= 0 && size_t(t) < script.size()) {
            out.accel_idx[size_t(b)] = script[size_t(t)].first;
            out.steer_idx[size_t(b)] = script[size_t(t)].second;
        } else {
            out.accel_idx[size_t(b)] = zero_accel_;
            out.steer_idx[size_t(b)] = zero_steer_;
        }
    }
}

// --- batch-internal worker pool --------------------------------------------

class Env::Pool {
public:
    explicit Pool(int threads) {
        int extra = std::max(0, threads - 1);
        for (int i = 0; i < extra; ++i) {
            workers_.emplace_back([this] { worker_loop(); });
        }
    }

    ~Pool() {
        stop_.store(true, std::memory_order_release);
        epoch_.fetch_add(1, std::memory_order_acq_rel);
        for (auto& t : workers_) t.join();
    }

    void run(int64_t n, const std::function<void(int)>& fn) {
        if (workers_.empty() || n <= 1) {
            for (int64_t i = 0; i < n; ++i) fn(int(i));
            return;
        }
        fn_ = &fn;
        n_ = n;
        next_.store(0, std::memory_order_relaxed);
        done_.store(0, std::memory_order_relaxed);
        epoch_.fetch_add(1, std::memory_order_acq_rel);
        work();
        while (done_.load(std::memory_order_acquire) < int(workers_.size())) {
            std::this_thread::yield();
        }
    }

private:
    void worker_loop() {
        uint64_t seen = epoch_.load(std::memory_order_acquire);
        while (true) {
            uint64_t cur;
            while ((cur = epoch_.load(std::memory_order_acquire)) == seen) {
                if (stop_.load(std::memory_order_relaxed)) return;
                std::this_thread::yield();
            }
            seen = cur;
            if (stop_.load(std::memory_order_relaxed)) return;
            work();
            done_.fetch_add(1, std::memory_order_acq_rel);
        }
    }

    void work() {
        while (true) {
            int64_t i = next_.fetch_add(1, std::memory_order_relaxed);
            if (i >= n_) break;
            (*fn_)(int(i));
        }
    }

    std::vector<std::thread> workers_;
    std::atomic<uint64_t> epoch_{0};
    std::atomic<int64_t> next_{0};
    std::atomic<int> done_{0};
    std::atomic<bool> stop_{false};
    const std::function<void(int)>* fn_ = nullptr;
    int64_t n_ = 0;
};

// --- Env --------------------------------------------------------------------

namespace {

geom::Obb ego_box(const dyn::EgoState& e, const SimConfig& cfg) {
    geom::Vec2 center{e.x + std::cos(e.heading) * cfg.ego_center_offset,
                      e.y + std::sin(e.heading) * cfg.ego_center_offset};
    return {center, cfg.ego_length * 0.5, cfg.ego_width * 0.5, e.heading};
}

geom::Obb agent_box(const scenario::LoggedAgent& a, int t) {
    return {{double(a.x[size_t(t)]), double(a.y[size_t(t)])}, double(a.length) * 0.5, double(a.width) * 0.5,
            double(a.heading[size_t(t)])};
}

struct RoutePoint {
    float x, y;
    uint8_t is_left;
    uint8_t lane_valid;
};

}  // namespace

struct Env::RowScratch {
    std::vector<RoutePoint> route_points;
};

namespace {
// Route observation candidates are static per scenario; cache them.
std::vector<RoutePoint> build_route_points(const scenario::Scenario& sc) {
    std::vector<RoutePoint> pts;
    for (const auto& lane : sc.route.lanes) {
        auto add_border = [&](const std::vector<float>& xy, uint8_t is_left) {
            double arc = double(lane.s_start);
            for (size_t i = 0; i + 1 < xy.size(); i += 2) {
                if (i >= 2) {
                    double dx = double(xy[i]) - double(xy[i - 2]);
                    double dy = double(xy[i + 1]) - double(xy[i - 1]);
                    arc += std::sqrt(dx * dx + dy * dy);
                }
                uint8_t valid = arc <= double(lane.s_end) + 0.5 ? 1 : 0;
                pts.push_back({xy[i], xy[i + 1], is_left, valid});
            }
        };
        add_border(lane.left_xy, 1);
        add_border(lane.right_xy, 0);
    }
    return pts;
}
}  // namespace

Env::Env(std::shared_ptr<const scenario::ScenarioBatch> batch, SimConfig config, dyn::ActionTable table)
    : batch_(std::move(batch)), config_(config), table_(std::move(table)) {
    table_.validated();
    int b = batch_->batch;
    contexts_.reserve(size_t(b));
    goal_s_.resize(size_t(b));
    initial_s_.resize(size_t(b));
    logged_progress_.resize(size_t(b));
    stop_flag_offset_.resize(size_t(b));
    scratch_.reserve(size_t(b));
    for (int i = 0; i < b; ++i) {
        const scenario::Scenario& sc = *batch_->items[size_t(i)];
        contexts_.push_back(roads::RouteContext::build(sc));
        const auto& ctx = contexts_.back();
        goal_s_[size_t(i)] = roads::project({double(sc.goal_x), double(sc.goal_y)}, ctx.frame).s;
        double s0 = roads::project({double(sc.ego.x.front()), double(sc.ego.y.front())}, ctx.frame).s;
        double s1 = roads::project({double(sc.ego.x[sc.num_steps - 1]), double(sc.ego.y[sc.num_steps - 1])},
                                   ctx.frame)
                        .s;
        initial_s_[size_t(i)] = s0;
        logged_progress_[size_t(i)] = s1 - s0;
        stop_flag_offset_[size_t(i)] = total_stop_lines_;
        total_stop_lines_ += int(ctx.stop_lines.size());
        RowScratch rs;
        rs.route_points = build_route_points(sc);
        scratch_.push_back(std::move(rs));
    }
    zero_accel_idx_ = table_.nearest_accel(0.0);
    zero_steer_idx_ = table_.nearest_steer(0.0);
    if (config_.threads > 1) pool_ = std::make_unique<Pool>(config_.threads);
}

Env::~Env() = default;

SimStateBatch Env::init_state(uint64_t seed) const {
    int b = batch_->batch;
    SimStateBatch st;
    st.batch = b;
    st.ego.resize(size_t(b));
    st.t.assign(size_t(b), 0);
    st.done.assign(size_t(b), 0);
    st.reason.assign(size_t(b), DoneReason::none);
    st.rng.resize(size_t(b));
    st.proj_s.resize(size_t(b));
    st.proj_d.resize(size_t(b));
    st.proj_in_corridor.resize(size_t(b));
    st.events.assign(size_t(b), 0);
    st.stopped_flags.assign(size_t(total_stop_lines_), 0);
    Rng parent(seed);
    for (int i = 0; i < b; ++i) {
        const scenario::Scenario& sc = *batch_->items[size_t(i)];
        dyn::EgoState e;
        e.x = double(sc.ego.x[0]);
        e.y = double(sc.ego.y[0]);
        e.heading = double(sc.ego.heading[0]);
        e.v = double(sc.ego.v[0]);
        e.steering = recover_initial_steering(sc, config_);
        st.ego[size_t(i)] = e;
        st.rng[size_t(i)] = parent.split(uint64_t(i)).state;
        auto p = roads::project({e.x, e.y}, contexts_[size_t(i)].frame);
        st.proj_s[size_t(i)] = p.s;
        st.proj_d[size_t(i)] = p.d;
        st.proj_in_corridor[size_t(i)] = p.in_corridor;
        // A stop already satisfied at t=0 counts.
        const auto& ctx = contexts_[size_t(i)];
        for (size_t j = 0; j < ctx.stop_lines.size(); ++j) {
            double ahead = ctx.stop_lines[j].s - p.s;
            if (ahead >= 0.0 && ahead <= config_.stop_zone && e.v < config_.stop_slow_speed) {
                st.stopped_flags[size_t(stop_flag_offset_[size_t(i)]) + j] = 1;
            }
        }
    }
    return st;
}

void Env::step_row(int b, const SimStateBatch& state, int32_t ai, int32_t si, SimStateBatch& next,
                   StepOut& out) const {
    const size_t ib = size_t(b);
    if (state.done[ib]) {
        // Absorbing pass-through: frozen state, zero reward.
        next.ego[ib] = state.ego[ib];
        next.t[ib] = state.t[ib];
        next.done[ib] = 1;
        next.reason[ib] = state.reason[ib];
        next.rng[ib] = state.rng[ib];
        next.proj_s[ib] = state.proj_s[ib];
        next.proj_d[ib] = state.proj_d[ib];
        next.proj_in_corridor[ib] = state.proj_in_corridor[ib];
        next.events[ib] = state.events[ib];
        out.reward[ib] = 0.f;
        out.event[ib] = DoneReason::none;
        out.s[ib] = float(state.proj_s[ib]);
        out.a_lat[ib] = 0.f;
        out.a_lon[ib] = 0.f;
        out.v[ib] = float(state.ego[ib].v);
        return;
    }
    const scenario::Scenario& sc = *batch_->items[ib];
    const auto& ctx = contexts_[ib];
    auto [accel, steer_rate] = table_.decode(ai, si);
    const dyn::EgoState e0 = state.ego[ib];
    dyn::EgoState e1 = dyn::bicycle_step(e0, accel, steer_rate, batch_->dt, config_.wheelbase, config_.limits);
    int t1 = state.t[ib] + 1;

    auto p1 = roads::project({e1.x, e1.y}, ctx.frame);

    // dense reward, all terms read from this transition
    double progress = p1.s - state.proj_s[ib];
    double a_lat = e0.v * e0.v * std::tan(e0.steering) / config_.wheelbase;
    double a_lon = accel;
    double dt = batch_->dt;
    double reward = config_.w_progress * progress -
                    config_.w_speed * std::max(0.0, e1.v - double(sc.speed_limit)) * dt -
                    config_.w_lat * a_lat * a_lat * dt - config_.w_lon * a_lon * a_lon * dt;

    geom::Obb box = ego_box(e1, config_);

    // Done conditions, fixed priority: collision > off_route > red_light >
    // stop_line > goal_reached. In evaluation mode every matching condition
    // is latched instead of terminating.
    bool hit_collision = false;
    for (const auto& agent : sc.agents) {
        if (t1 < int(sc.num_steps) && agent.valid[size_t(t1)]) {
            if (geom::obb_overlap(box, agent_box(agent, t1))) {
                hit_collision = true;
                break;
            }
        }
    }
    bool hit_off_route = !roads::footprint_on_route(box, ctx.frame, config_.footprint_margin);
    bool hit_red = false;
    int t_light = std::min(state.t[ib], int(sc.num_steps) - 1);
    for (const auto& li : ctx.lights) {
        if (state.proj_s[ib] < li.s && li.s <= p1.s) {
            // light state sampled at the crossing step
            if (scenario::LightState(sc.traffic_lights[size_t(li.index)].state[size_t(t_light)]) ==
                scenario::LightState::red) {
                hit_red = true;
            }
        }
    }
    bool hit_stop = false;
    for (size_t j = 0; j < ctx.stop_lines.size(); ++j) {
        const auto& sl = ctx.stop_lines[j];
        if (state.proj_s[ib] < sl.s && sl.s <= p1.s) {
            bool stopped_before = state.stopped_flags[size_t(stop_flag_offset_[ib]) + j] != 0;
            if (e0.v > config_.stop_cross_speed && !stopped_before) hit_stop = true;
        }
    }
    bool hit_goal = std::abs(p1.s - goal_s_[ib]) <= config_.goal_radius;

    DoneReason reason = DoneReason::none;
    if (hit_collision) {
        reason = DoneReason::collision;
    } else if (hit_off_route) {
        reason = DoneReason::off_route;
    } else if (hit_red) {
        reason = DoneReason::red_light;
    } else if (hit_stop) {
        reason = DoneReason::stop_line;
    } else if (hit_goal) {
        reason = DoneReason::goal_reached;
    }

    uint8_t events = state.events[ib];
    if (config_.disable_dones) {
        if (hit_collision) events |= event_bit(DoneReason::collision);
        if (hit_off_route) events |= event_bit(DoneReason::off_route);
        if (hit_red) events |= event_bit(DoneReason::red_light);
        if (hit_stop) events |= event_bit(DoneReason::stop_line);
        if (hit_goal) events |= event_bit(DoneReason::goal_reached);
    } else if (reason != DoneReason::none) {
        events |= event_bit(reason);
        if (reason != DoneReason::goal_reached) reward -= config_.terminal_penalty;
        // goal_reached terminates with zero terminal reward
    }

    next.ego[ib] = e1;
    next.t[ib] = t1;
    next.done[ib] = (!config_.disable_dones && reason != DoneReason::none) ? 1 : 0;
    next.reason[ib] = next.done[ib] ? reason : DoneReason::none;
    next.rng[ib] = state.rng[ib];
    next.proj_s[ib] = p1.s;
    next.proj_d[ib] = p1.d;
    next.proj_in_corridor[ib] = p1.in_corridor;
    next.events[ib] = events;

    // Track satisfied stops with the post-step state.
    for (size_t j = 0; j < ctx.stop_lines.size(); ++j) {
        double ahead = ctx.stop_lines[j].s - p1.s;
        if (ahead >= 0.0 && ahead <= config_.stop_zone && e1.v < config_.stop_slow_speed) {
            next.stopped_flags[size_t(stop_flag_offset_[ib]) + j] = 1;
        }
    }

    out.reward[ib] = float(reward);
    out.event[ib] = reason;
    out.s[ib] = float(p1.s);
    out.a_lat[ib] = float(a_lat);
    out.a_lon[ib] = float(a_lon);
    out.v[ib] = float(e1.v);
}

void Env::step(const SimStateBatch& state, const std::vector<int32_t>& accel_idx,
               const std::vector<int32_t>& steer_idx, SimStateBatch& next, StepOut& out) const {
    int b = batch_->batch;
    if (int(accel_idx.size()) != b || int(steer_idx.size()) != b || state.batch != b) {
        fail(ErrorKind::invalid_argument, "env_step: action/state shape mismatch");
    }
    if (&next != &state) next = state;  // copy; rows are then overwritten
    out.resize(b);
    next.stopped_flags = state.stopped_flags;
    auto body = [&](int i) { step_row(i, state, accel_idx[size_t(i)], steer_idx[size_t(i)], next, out); };
    if (pool_ && b >= 8) {
        pool_->run(b, body);
    } else {
        for (int i = 0; i < b; ++i) body(i);
    }
}

void Env::observe_row(int b, const SimStateBatch& state, ObservationBatch& obs) const {
    const size_t ib = size_t(b);
    obs.zero_row(b);
    if (state.done[ib]) return;

    const scenario::Scenario& sc = *batch_->items[ib];
    const auto& ctx = contexts_[ib];
    const dyn::EgoState e = state.ego[ib];
    int t = state.t[ib];
    double c = std::cos(-e.heading), s = std::sin(-e.heading);
    auto to_ego = [&](double wx, double wy, float* out_xy) {
        double dx = wx - e.x, dy = wy - e.y;
        out_xy[0] = float(c * dx - s * dy);
        out_xy[1] = float(s * dx + c * dy);
    };

    // active agent
    {
        roads::Projection proj;
        proj.s = state.proj_s[ib];
        proj.d = state.proj_d[ib];
        auto info = roads::stop_info(proj, ctx, sc, t);
        float* a = obs.active_row(b);
        a[0] = float(e.v);
        a[1] = float(e.steering);
        a[2] = float(info.dist_stop_line ? std::min(*info.dist_stop_line, config_.feature_radius)
                                         : config_.feature_radius);
        int light = int(info.next_light_state);
        a[3 + light] = 1.f;
        a[7] = float(info.dist_light ? std::min(*info.dist_light, config_.feature_radius)
                                     : config_.feature_radius);
        a[8] = sc.speed_limit;
    }

    // other agents, nearest first by bounding-box distance
    {
        geom::Obb ebox = ego_box(e, config_);
        struct Cand {
            double dist;
            int idx;
        };
        std::vector<Cand> cands;
        for (int i = 0; i < int(sc.agents.size()); ++i) {
            const auto& agent = sc.agents[size_t(i)];
            if (t < int(sc.num_steps) && agent.valid[size_t(t)]) {
                double d = geom::obb_distance(ebox, agent_box(agent, t));
                cands.push_back({d, i});
            }
        }
        std::sort(cands.begin(), cands.end(), [](const Cand& x, const Cand& y) {
            return x.dist != y.dist ? x.dist < y.dist : x.idx < y.idx;
        });
        int n = std::min<int>(config_.n_agents, int(cands.size()));
        float* row = obs.agents_row(b);
        for (int k = 0; k < n; ++k) {
            const auto& agent = sc.agents[size_t(cands[size_t(k)].idx)];
            float* f = row + size_t(k) * ObsSpec::agent_feat;
            to_ego(double(agent.x[size_t(t)]), double(agent.y[size_t(t)]), f);
            f[2] = float(wrap_angle(double(agent.heading[size_t(t)]) - e.heading));
            f[3] = agent.speed[size_t(t)];
            f[4] = float(cands[size_t(k)].dist);
            f[5] = 1.f;
        }
    }

    // road network points
    {
        auto pts = roads::nearest_features({e.x, e.y}, sc.road_features, config_.n_road, config_.feature_radius);
        float* row = obs.road_row(b);
        for (int k = 0; k < config_.n_road; ++k) {
            const auto& fp = pts[size_t(k)];
            if (!fp.valid) break;  // sorted; the rest are padding
            float* f = row + size_t(k) * ObsSpec::road_feat;
            to_ego(double(fp.x), double(fp.y), f);
            f[2 + int(fp.kind)] = 1.f;
            f[7 + int(fp.directionality)] = 1.f;
            f[11] = 1.f;
        }
    }

    // route border points
    {
        const auto& pts = scratch_[ib].route_points;
        struct Cand {
            double d2;
            int idx;
        };
        std::vector<Cand> cands;
        cands.reserve(pts.size());
        for (int i = 0; i < int(pts.size()); ++i) {
            double dx = double(pts[size_t(i)].x) - e.x, dy = double(pts[size_t(i)].y) - e.y;
            cands.push_back({dx * dx + dy * dy, i});
        }
        int n = std::min<int>(config_.n_route, int(cands.size()));
        std::partial_sort(cands.begin(), cands.begin() + n, cands.end(), [](const Cand& x, const Cand& y) {
            return x.d2 != y.d2 ? x.d2 < y.d2 : x.idx < y.idx;
        });
        float* row = obs.route_row(b);
        for (int k = 0; k < n; ++k) {
            const auto& rp = pts[size_t(cands[size_t(k)].idx)];
            float* f = row + size_t(k) * ObsSpec::route_feat;
            to_ego(double(rp.x), double(rp.y), f);
            f[2] = rp.is_left ? 1.f : 0.f;
            f[3] = rp.lane_valid ? 1.f : 0.f;
            f[4] = 1.f;
        }
    }

    // value-function-only features
    {
        float* f = obs.value_row(b);
        double dx = double(sc.goal_x) - e.x, dy = double(sc.goal_y) - e.y;
        f[0] = float(std::sqrt(dx * dx + dy * dy));
        f[1] = float(batch_->horizon - t);
    }
}

void Env::observe(const SimStateBatch& state, ObservationBatch& obs) const {
    ObsSpec spec;
    spec.n_agents = config_.n_agents;
    spec.n_road = config_.n_road;
    spec.n_route = config_.n_route;
    if (obs.batch != batch_->batch || !(obs.spec == spec)) obs.resize(spec, batch_->batch);
    auto body = [&](int i) { observe_row(i, state, obs); };
    if (pool_ && batch_->batch >= 8) {
        pool_->run(batch_->batch, body);
    } else {
        for (int i = 0; i < batch_->batch; ++i) body(i);
    }
}

EpisodeBatch Env::rollout(RolloutPolicy& policy, int horizon, uint64_t seed) const {
    int b = batch_->batch;
    EpisodeBatch ep;
    ep.batch = b;
    ep.horizon = horizon;
    ep.dt = batch_->dt;
    size_t total = size_t(b) * size_t(horizon);
    ep.obs.resize(size_t(horizon));
    ep.accel_idx.assign(total, 0);
    ep.steer_idx.assign(total, 0);
    ep.logp.assign(total, 0.f);
    ep.value.assign(total, 0.f);
    ep.reward.assign(total, 0.f);
    ep.s.assign(total, 0.f);
    ep.a_lat.assign(total, 0.f);
    ep.a_lon.assign(total, 0.f);
    ep.v.assign(total, 0.f);
    ep.done.assign(total, 0);
    ep.mask.assign(total, 0);
    ep.bootstrap.assign(size_t(b), 0.f);
    ep.terminal.assign(size_t(b), DoneReason::none);
    ep.events.assign(size_t(b), 0);
    ep.initial_s.resize(size_t(b));
    ep.logged_progress.resize(size_t(b));
    ep.scenario_ids.resize(size_t(b));
    for (int i = 0; i < b; ++i) {
        ep.scenario_ids[size_t(i)] = batch_->items[size_t(i)]->id;
        ep.logged_progress[size_t(i)] = float(logged_progress_[size_t(i)]);
    }

    SimStateBatch state = init_state(seed);
    SimStateBatch next;
    StepOut sout;
    PolicyOut pout;
    for (int i = 0; i < b; ++i) ep.initial_s[size_t(i)] = float(state.proj_s[size_t(i)]);

    for (int t = 0; t < horizon; ++t) {
        observe(state, ep.obs[size_t(t)]);
        policy.act(ep.obs[size_t(t)], state.t, state.rng, pout);
        step(state, pout.accel_idx, pout.steer_idx, next, sout);
        for (int i = 0; i < b; ++i) {
            size_t k = ep.at(i, t);
            ep.mask[k] = state.done[size_t(i)] ? 0 : 1;
            ep.accel_idx[k] = pout.accel_idx[size_t(i)];
            ep.steer_idx[k] = pout.steer_idx[size_t(i)];
            ep.logp[k] = pout.logp[size_t(i)];
            ep.value[k] = pout.value[size_t(i)];
            ep.reward[k] = sout.reward[size_t(i)];
            ep.s[k] = sout.s[size_t(i)];
            ep.a_lat[k] = sout.a_lat[size_t(i)];
            ep.a_lon[k] = sout.a_lon[size_t(i)];
            ep.v[k] = sout.v[size_t(i)];
            ep.done[k] = next.done[size_t(i)];
        }
        std::swap(state, next);
    }
    observe(state, ep.final_obs);
    policy.act(ep.final_obs, state.t, state.rng, pout);
    for (int i = 0; i < b; ++i) {
        ep.bootstrap[size_t(i)] = state.done[size_t(i)] ? 0.f : pout.value[size_t(i)];
        ep.terminal[size_t(i)] = state.reason[size_t(i)];
        ep.events[size_t(i)] = state.events[size_t(i)];
    }
    return ep;
}

double recover_initial_steering(const scenario::Scenario& s, const SimConfig& config) {
    if (s.num_steps < 2) return 0.0;
    double v0 = double(s.ego.v[0]);
    if (v0 * s.dt < 1e-4) return 0.0;
    double dtheta = wrap_angle(double(s.ego.heading[1]) - double(s.ego.heading[0]));
    double delta = std::atan(dtheta * config.wheelbase / (v0 * s.dt));
    return std::clamp(delta, -config.limits.delta_max, config.limits.delta_max);
}

std::vector<std::pair<int32_t, int32_t>> recover_logged_actions(const scenario::Scenario& s,
                                                                const dyn::ActionTable& table,
                                                                const SimConfig& config) {
    int n = int(s.num_steps);
    std::vector<double> delta(size_t(n), 0.0);
    double prev = 0.0;
    for (int t = 0; t + 1 < n; ++t) {
        double v = double(s.ego.v[size_t(t)]);
        if (v * s.dt > 1e-4) {
            double dtheta = wrap_angle(double(s.ego.heading[size_t(t) + 1]) - double(s.ego.heading[size_t(t)]));
            prev = std::clamp(std::atan(dtheta * config.wheelbase / (v * s.dt)), -config.limits.delta_max,
                              config.limits.delta_max);
        }
        delta[size_t(t)] = prev;
    }
    if (n >= 2) delta[size_t(n - 1)] = delta[size_t(n - 2)];
    std::vector<std::pair<int32_t, int32_t>> actions(size_t(n - 1));
    for (int t = 0; t + 1 < n; ++t) {
        double a = (double(s.ego.v[size_t(t) + 1]) - double(s.ego.v[size_t(t)])) / s.dt;
        double dd = (delta[size_t(t) + 1] - delta[size_t(t)]) / s.dt;
        actions[size_t(t)] = {table.nearest_accel(a), table.nearest_steer(dd)};
    }
    return actions;
}

std::vector<BenchRow> bench_step(const scenario::Dataset& ds, const std::vector<int>& batch_sizes, int steps,
                                 int warmup, const SimConfig& config) {
    if (ds.size() == 0) fail(ErrorKind::invalid_argument, "bench: empty dataset");
    std::vector<BenchRow> rows;
    for (int bs : batch_sizes) {
        std::vector<int64_t> indices(static_cast<size_t>(bs));
        for (int i = 0; i < bs; ++i) indices[size_t(i)] = i % ds.size();
        std::vector<std::shared_ptr<const scenario::Scenario>> items;
        int horizon = 2;
        for (int64_t idx : indices) {
            auto sc = ds.load_shared(idx);
            horizon = std::max(horizon, int(sc->num_steps));
            items.push_back(std::move(sc));
        }
        SimConfig cfg = config;
        cfg.disable_dones = true;  // uniform per-step work
        Env env(std::make_shared<const scenario::ScenarioBatch>(scenario::make_batch(items, horizon)), cfg);
        SimStateBatch state = env.init_state(42);
        SimStateBatch next;
        StepOut out;
        std::vector<int32_t> accel(size_t(bs), env.action_table().nearest_accel(0.0));
        std::vector<int32_t> steer(size_t(bs), env.action_table().nearest_steer(0.0));
        for (int i = 0; i < warmup; ++i) {
            env.step(state, accel, steer, next, out);
            std::swap(state, next);
        }
        auto t0 = std::chrono::steady_clock::now();
        for (int i = 0; i < steps; ++i) {
            env.step(state, accel, steer, next, out);
            std::swap(state, next);
        }
        auto t1 = std::chrono::steady_clock::now();
        double ms = std::chrono::duration<double, std::milli>(t1 - t0).count() / double(steps);
        rows.push_back({bs, ms, ms * 1000.0 / double(bs)});
    }
    return rows;
}

std::string bench_csv(const std::vector<BenchRow>& rows) {
    std::ostringstream ss;
    ss << "batch_size,mean_step_ms,amortized_us_per_scenario\n";
    for (const auto& r : rows) {
        ss << r.batch_size << "," << r.mean_step_ms << "," << r.amortized_us_per_scenario << "\n";
    }
    return ss.str();
}

}  // namespace zsim::sim
