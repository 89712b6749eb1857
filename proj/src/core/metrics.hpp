#pragma once

#include <string>
#include <vector>

#include "core/simcore.hpp"

namespace zsim::metrics {

// Lower bounds of the per-metric mapping intervals.
struct ScoreBounds {
    double progress = 0.8;
    double collision = 0.05;
    double off_route = 0.5;
    double stop_line = 0.5;
    double traffic_light = 0.5;
    double comfort = 0.8;
};

struct ComfortWeights {
    double w_accel = 0.1;
    double w_jerk = 0.05;
};

struct MetricReport {
    std::string scenario_id;
    double relative_progress_raw = 0.0;  // may exceed 1
    double relative_progress = 0.0;      // clamped to [0,1] for scoring
    double collision_free = 1.0;
    double off_route_free = 1.0;
    double stop_line_free = 1.0;
    double traffic_light_free = 1.0;
    double mixed_comfort = 1.0;
    double scenario_score = 0.0;
    bool degenerate = false;  // logged progress too small for the ratio
    bool failed = false;      // collision or off-route event (eval mode failure)
    bool goal_reached = false;
};

// s in [0,1], l in [0,1): linear map onto [l, 1].
double map_score(double s, double l);

double scenario_score(const MetricReport& r, const ScoreBounds& bounds);

// exp(-mean(w_a*(a_lat^2+a_lon^2) + w_j*(j_lat^2+j_lon^2))) over live steps;
// jerk by finite differences of the acceleration traces.
double mixed_comfort(const std::vector<float>& a_lat, const std::vector<float>& a_lon,
                     const std::vector<uint8_t>& mask, double dt, const ComfortWeights& w = {});

// Scores one episode row. In eval mode (episodes run to T) the four
// violation metrics come from the latched event flags; otherwise from the
// terminal done reason.
MetricReport score_episode(const sim::EpisodeBatch& ep, int row, const ScoreBounds& bounds,
                           const ComfortWeights& cw = {});

struct Aggregate {
    int64_t scenarios = 0;   // non-degenerate
    int64_t degenerate = 0;
    double mean_score = 0.0;
    double mean_relative_progress = 0.0;
    double mean_progress_ratio_raw = 0.0;
    double mean_collision_free = 0.0;
    double mean_off_route_free = 0.0;
    double mean_stop_line_free = 0.0;
    double mean_traffic_light_free = 0.0;
    double mean_comfort = 0.0;
    double failure_rate = 0.0;  // 1 - mean(collision_free AND off_route_free)
    double goal_rate = 0.0;
};

Aggregate aggregate(const std::vector<MetricReport>& reports);

std::string reports_csv(std::vector<MetricReport> reports);  // sorted by scenario id
std::string aggregate_json(const Aggregate& a, bool eval_mode);

}  // namespace zsim::metrics
