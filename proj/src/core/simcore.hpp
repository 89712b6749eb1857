#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "core/dynamics.hpp"
#include "core/roads.hpp"
#include "core/scenario.hpp"

namespace zsim::sim {

struct SimConfig {
    // vehicle
    double wheelbase = 3.0;
    double ego_length = 4.7;
    double ego_width = 1.9;
    double ego_center_offset = 1.5;  // rear axle -> geometric center, along heading
    dyn::Limits limits;

    // done signals
    double goal_radius = 2.0;        // along-route, m
    double footprint_margin = 0.1;   // conservative off-route margin per side
    double stop_cross_speed = 0.5;   // m/s, crossing faster than this counts as running
    double stop_zone = 2.0;          // m before the line where a stop must happen
    double stop_slow_speed = 0.1;    // m/s, counts as stopped
    bool disable_dones = false;      // evaluation mode: latch events, never terminate

    // dense reward
    double w_progress = 1.0;
    double w_speed = 0.1;
    double w_lat = 0.02;
    double w_lon = 0.02;
    double terminal_penalty = 10.0;

    // observation shapes
    int n_agents = 16;
    int n_road = 128;
    int n_route = 64;
    double feature_radius = 100.0;  // nearest-feature search radius and distance cap

    // batch-internal parallelism for env_step (1 = serial)
    int threads = 1;
};

enum class DoneReason : uint8_t {
    none = 0,
    collision = 1,
    off_route = 2,
    red_light = 3,
    stop_line = 4,
    goal_reached = 5,
};

const char* done_reason_name(DoneReason r);

inline uint8_t event_bit(DoneReason r) { return uint8_t(1u << (uint8_t(r) - 1)); }

struct ObsSpec {
    int n_agents = 16;
    int n_road = 128;
    int n_route = 64;

    static constexpr int active_feat = 9;  // v, steering, dist_stop, light one-hot(4), dist_light, limit
    static constexpr int agent_feat = 6;   // rel x, y, heading, speed, bbox distance, valid
    static constexpr int road_feat = 12;   // rel x, y, kind one-hot(5), directionality one-hot(4), valid
    static constexpr int route_feat = 5;   // rel x, y, is_left, lane_valid, valid
    static constexpr int value_feat = 2;   // distance to goal, remaining steps

    bool operator==(const ObsSpec&) const = default;
};

// Fixed-shape per-modality feature arrays; absent slots are zero-filled with
// validity 0. Policy-path modalities never include the value_only features.
struct ObservationBatch {
    ObsSpec spec;
    int batch = 0;
    std::vector<float> active;      // [B][active_feat]
    std::vector<float> agents;      // [B][n_agents][agent_feat]
    std::vector<float> road;        // [B][n_road][road_feat]
    std::vector<float> route;       // [B][n_route][route_feat]
    std::vector<float> value_only;  // [B][value_feat]

    void resize(const ObsSpec& s, int b);
    void zero_row(int b);
    void copy_row(const ObservationBatch& src, int src_row, int dst_row);

    float* active_row(int b) { return active.data() + size_t(b) * ObsSpec::active_feat; }
    float* agents_row(int b) { return agents.data() + size_t(b) * size_t(spec.n_agents) * ObsSpec::agent_feat; }
    float* road_row(int b) { return road.data() + size_t(b) * size_t(spec.n_road) * ObsSpec::road_feat; }
    float* route_row(int b) { return route.data() + size_t(b) * size_t(spec.n_route) * ObsSpec::route_feat; }
    float* value_row(int b) { return value_only.data() + size_t(b) * ObsSpec::value_feat; }
    const float* active_row(int b) const { return active.data() + size_t(b) * ObsSpec::active_feat; }
    const float* agents_row(int b) const {
        return agents.data() + size_t(b) * size_t(spec.n_agents) * ObsSpec::agent_feat;
    }
    const float* road_row(int b) const { return road.data() + size_t(b) * size_t(spec.n_road) * ObsSpec::road_feat; }
    const float* route_row(int b) const {
        return route.data() + size_t(b) * size_t(spec.n_route) * ObsSpec::route_feat;
    }
    const float* value_row(int b) const { return value_only.data() + size_t(b) * ObsSpec::value_feat; }
};

// Per-scenario simulation state, SoA across the batch. Immutable scenario
// data lives in the Env; copying the state is cheap.
struct SimStateBatch {
    int batch = 0;
    std::vector<dyn::EgoState> ego;
    std::vector<int32_t> t;
    std::vector<uint8_t> done;
    std::vector<DoneReason> reason;
    std::vector<uint64_t> rng;
    // cached route projection of the current ego position
    std::vector<double> proj_s, proj_d;
    std::vector<uint8_t> proj_in_corridor;
    // eval-mode latched violation flags (event_bit mask)
    std::vector<uint8_t> events;
    // per applicable stop line: 1 once the ego has stopped inside the zone
    std::vector<uint8_t> stopped_flags;
};

struct StepOut {
    std::vector<float> reward;
    std::vector<DoneReason> event;  // reason triggered at this step (none for pass-through)
    std::vector<float> s;           // route arc position after the step
    std::vector<float> a_lat, a_lon;
    std::vector<float> v;

    void resize(int b);
};

struct PolicyOut {
    std::vector<int32_t> accel_idx, steer_idx;
    std::vector<float> logp;   // joint log-prob of the sampled pair
    std::vector<float> value;  // state-value estimate

    void resize(int b);
};

// Policy abstraction used by rollout: maps observations to sampled actions,
// their behavior log-probs and values. `step_index` carries per-row t for
// scripted policies; `rng` is the per-row stream.
class RolloutPolicy {
public:
    virtual ~RolloutPolicy() = default;
    virtual void act(const ObservationBatch& obs, const std::vector<int32_t>& step_index,
                     std::vector<uint64_t>& rng, PolicyOut& out) = 0;
};

// Replays a fixed per-row action script; emits the zero action when the
// script runs out.
class ScriptedPolicy final : public RolloutPolicy {
public:
    ScriptedPolicy(std::vector<std::vector<std::pair<int32_t, int32_t>>> actions, int zero_accel_idx,
                   int zero_steer_idx)
        : actions_(std::move(actions)), zero_accel_(zero_accel_idx), zero_steer_(zero_steer_idx) {}

    void act(const ObservationBatch& obs, const std::vector<int32_t>& step_index, std::vector<uint64_t>& rng,
             PolicyOut& out) override;

private:
    std::vector<std::vector<std::pair<int32_t, int32_t>>> actions_;
    int zero_accel_, zero_steer_;
};

struct EpisodeBatch {
    int batch = 0;
    int horizon = 0;
    double dt = 0.0;
    std::vector<ObservationBatch> obs;  // T entries, obs[t] precedes step t
    ObservationBatch final_obs;
    // (B, T) row-major, index b * horizon + t
    std::vector<int32_t> accel_idx, steer_idx;
    std::vector<float> logp, value, reward, s, a_lat, a_lon, v;
    std::vector<uint8_t> done, mask;
    std::vector<float> bootstrap;         // B; 0 when the row terminated
    std::vector<DoneReason> terminal;     // B
    std::vector<uint8_t> events;          // B, event_bit mask (eval mode latches)
    std::vector<float> initial_s;         // B
    std::vector<float> logged_progress;   // B, logged final s - initial s
    std::vector<std::string> scenario_ids;
    uint64_t policy_version = 0;

    size_t at(int b, int t) const { return size_t(b) * size_t(horizon) + size_t(t); }
};

// The batched log-replay environment. Steps all scenarios of a batch
// simultaneously; other agents follow their recorded trajectories. Pure over
// the immutable scenario data: identical inputs give identical outputs.
class Env {
public:
    Env(std::shared_ptr<const scenario::ScenarioBatch> batch, SimConfig config,
        dyn::ActionTable table = dyn::ActionTable::defaults());
    ~Env();

    Env(const Env&) = delete;
    Env& operator=(const Env&) = delete;

    int batch_size() const { return batch_->batch; }
    int horizon() const { return batch_->horizon; }
    double dt() const { return batch_->dt; }
    const SimConfig& config() const { return config_; }
    const dyn::ActionTable& action_table() const { return table_; }
    const scenario::ScenarioBatch& batch() const { return *batch_; }
    const roads::RouteContext& route_context(int b) const { return contexts_[size_t(b)]; }
    double goal_s(int b) const { return goal_s_[size_t(b)]; }
    double logged_progress(int b) const { return logged_progress_[size_t(b)]; }
    double initial_s(int b) const { return initial_s_[size_t(b)]; }

    SimStateBatch init_state(uint64_t seed) const;

    // One synchronized step across the batch. Done rows are pass-through:
    // frozen state, zero reward.
    void step(const SimStateBatch& state, const std::vector<int32_t>& accel_idx,
              const std::vector<int32_t>& steer_idx, SimStateBatch& next, StepOut& out) const;

    void observe(const SimStateBatch& state, ObservationBatch& obs) const;

    // Fixed-horizon batched rollout; the policy is queried once per step for
    // the whole batch and never refreshed mid-episode.
    EpisodeBatch rollout(RolloutPolicy& policy, int horizon, uint64_t seed) const;

private:
    struct RowScratch;

    void step_row(int b, const SimStateBatch& state, int32_t accel_idx, int32_t steer_idx, SimStateBatch& next,
                  StepOut& out) const;
    void observe_row(int b, const SimStateBatch& state, ObservationBatch& obs) const;

    std::shared_ptr<const scenario::ScenarioBatch> batch_;
    SimConfig config_;
    dyn::ActionTable table_;
    std::vector<roads::RouteContext> contexts_;
    std::vector<RowScratch> scratch_;
    std::vector<double> goal_s_;
    std::vector<double> initial_s_;
    std::vector<double> logged_progress_;
    std::vector<int> stop_flag_offset_;  // per row, into SimStateBatch::stopped_flags
    int total_stop_lines_ = 0;
    int zero_accel_idx_ = 0, zero_steer_idx_ = 0;

    class Pool;
    mutable std::unique_ptr<Pool> pool_;
};

// Inverse dynamics: recover the discrete action script that reproduces the
// logged ego trajectory under the bicycle model, snapped to table bins.
std::vector<std::pair<int32_t, int32_t>> recover_logged_actions(const scenario::Scenario& s,
                                                                const dyn::ActionTable& table,
                                                                const SimConfig& config);

// Initial steering angle implied by the first two logged headings.
double recover_initial_steering(const scenario::Scenario& s, const SimConfig& config);

struct BenchRow {
    int batch_size = 0;
    double mean_step_ms = 0.0;
    double amortized_us_per_scenario = 0.0;
};

// Wall-clock timing of env.step over `steps` iterations per batch size,
// after `warmup` untimed iterations. Runs with done signals disabled so the
// per-step work stays uniform.
std::vector<BenchRow> bench_step(const scenario::Dataset& ds, const std::vector<int>& batch_sizes, int steps,
                                 int warmup, const SimConfig& config);

std::string bench_csv(const std::vector<BenchRow>& rows);

}  // namespace zsim::sim
