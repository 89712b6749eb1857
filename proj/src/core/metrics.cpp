#include "core/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <json.hpp>

#include "core/common.hpp"

namespace zsim::metrics {

double map_score(double s, double l) {
    if (!(s >= 0.0 && s <= 1.0)) fail(ErrorKind::invalid_argument, "map_score: s outside [0,1]");
    if (!(l >= 0.0 && l < 1.0)) fail(ErrorKind::invalid_argument, "map_score: l outside [0,1)");
    return s * (1.0 - l) + l;
}

double scenario_score(const MetricReport& r, const ScoreBounds& b) {
    double score = map_score(r.relative_progress, b.progress);
    score *= map_score(r.collision_free, b.collision);
    score *= map_score(r.off_route_free, b.off_route);
    score *= map_score(r.stop_line_free, b.stop_line);
    score *= map_score(r.traffic_light_free, b.traffic_light);
    score *= map_score(r.mixed_comfort, b.comfort);
    return score;
}

double mixed_comfort(const std::vector<float>& a_lat, const std::vector<float>& a_lon,
                     const std::vector<uint8_t>& mask, double dt, const ComfortWeights& w) {
    size_t n = a_lat.size();
    double acc = 0.0;
    int64_t live = 0;
    double prev_lat = 0.0, prev_lon = 0.0;
    bool have_prev = false;
    for (size_t t = 0; t < n; ++t) {
        if (!mask[t]) break;  // masks are 1...1 0...0
        double al = a_lat[t], ao = a_lon[t];
        double jl = 0.0, jo = 0.0;
        if (have_prev) {
            jl = (al - prev_lat) / dt;
            jo = (ao - prev_lon) / dt;
        }
        acc += w.w_accel * (al * al + ao * ao) + w.w_jerk * (jl * jl + jo * jo);
        prev_lat = al;
        prev_lon = ao;
        have_prev = true;
        ++live;
    }
    if (live == 0) return 1.0;
    return std::exp(-acc / double(live));
}

MetricReport score_episode(const sim::EpisodeBatch& ep, int row, const ScoreBounds& bounds,
                           const ComfortWeights& cw) {
    MetricReport r;
    r.scenario_id = ep.scenario_ids[size_t(row)];

    double logged = double(ep.logged_progress[size_t(row)]);
    int last_live = -1;
    for (int t = 0; t < ep.horizon; ++t) {
        if (ep.mask[ep.at(row, t)]) last_live = t;
    }
    double final_s =
        last_live >= 0 ? double(ep.s[ep.at(row, last_live)]) : double(ep.initial_s[size_t(row)]);
    double moved = final_s - double(ep.initial_s[size_t(row)]);
    if (logged <= 0.1) {
        r.degenerate = true;
        r.relative_progress_raw = 0.0;
        r.relative_progress = 0.0;
    } else {
        r.relative_progress_raw = moved / logged;
        r.relative_progress = std::clamp(r.relative_progress_raw, 0.0, 1.0);
    }

    uint8_t ev = ep.events[size_t(row)];
    r.collision_free = (ev & sim::event_bit(sim::DoneReason::collision)) ? 0.0 : 1.0;
    r.off_route_free = (ev & sim::event_bit(sim::DoneReason::off_route)) ? 0.0 : 1.0;
    r.traffic_light_free = (ev & sim::event_bit(sim::DoneReason::red_light)) ? 0.0 : 1.0;
    r.stop_line_free = (ev & sim::event_bit(sim::DoneReason::stop_line)) ? 0.0 : 1.0;
    r.goal_reached = (ev & sim::event_bit(sim::DoneReason::goal_reached)) != 0;
    r.failed = r.collision_free == 0.0 || r.off_route_free == 0.0;

    std::vector<float> alat(size_t(ep.horizon)), alon(size_t(ep.horizon));
    std::vector<uint8_t> mask(size_t(ep.horizon));
    for (int t = 0; t < ep.horizon; ++t) {
        size_t k = ep.at(row, t);
        alat[size_t(t)] = ep.a_lat[k];
        alon[size_t(t)] = ep.a_lon[k];
        mask[size_t(t)] = ep.mask[k];
    }
    r.mixed_comfort = mixed_comfort(alat, alon, mask, ep.dt, cw);
    r.scenario_score = scenario_score(r, bounds);
    return r;
}

Aggregate aggregate(const std::vector<MetricReport>& reports) {
    Aggregate a;
    double failed = 0.0;
    for (const auto& r : reports) {
        if (r.degenerate) {
            ++a.degenerate;
            continue;
        }
        ++a.scenarios;
        a.mean_score += r.scenario_score;
        a.mean_relative_progress += r.relative_progress;
        a.mean_progress_ratio_raw += r.relative_progress_raw;
        a.mean_collision_free += r.collision_free;
        a.mean_off_route_free += r.off_route_free;
        a.mean_stop_line_free += r.stop_line_free;
        a.mean_traffic_light_free += r.traffic_light_free;
        a.mean_comfort += r.mixed_comfort;
        if (r.failed) failed += 1.0;
        if (r.goal_reached) a.goal_rate += 1.0;
    }
    if (a.scenarios > 0) {
        double n = double(a.scenarios);
        a.mean_score /= n;
        a.mean_relative_progress /= n;
        a.mean_progress_ratio_raw /= n;
        a.mean_collision_free /= n;
        a.mean_off_route_free /= n;
        a.mean_stop_line_free /= n;
        a.mean_traffic_light_free /= n;
        a.mean_comfort /= n;
        a.failure_rate = failed / n;
        a.goal_rate /= n;
    }
    return a;
}

std::string reports_csv(std::vector<MetricReport> reports) {
    std::sort(reports.begin(), reports.end(),
              [](const MetricReport& a, const MetricReport& b) { return a.scenario_id < b.scenario_id; });
    std::ostringstream ss;
    ss.precision(10);
    ss << "scenario_id,relative_progress_raw,relative_progress,collision_free,off_route_free,"
          "stop_line_free,traffic_light_free,mixed_comfort,scenario_score\n";
    for (const auto& r : reports) {
        ss << r.scenario_id << "," << r.relative_progress_raw << "," << r.relative_progress << ","
           << r.collision_free << "," << r.off_route_free << "," << r.stop_line_free << ","
           << r.traffic_light_free << "," << r.mixed_comfort << "," << r.scenario_score << "\n";
    }
    return ss.str();
}

std::string aggregate_json(const Aggregate& a, bool eval_mode) {
    nlohmann::json j;
    j["scenarios"] = a.scenarios;
    j["degenerate"] = a.degenerate;
    j["mean_scenario_score"] = a.mean_score;
    j["mean_relative_progress"] = a.mean_relative_progress;
    j["mean_progress_ratio_raw"] = a.mean_progress_ratio_raw;
    j["mean_collision_free"] = a.mean_collision_free;
    j["mean_off_route_free"] = a.mean_off_route_free;
    j["mean_stop_line_free"] = a.mean_stop_line_free;
    j["mean_traffic_light_free"] = a.mean_traffic_light_free;
    j["mean_mixed_comfort"] = a.mean_comfort;
    j["goal_rate"] = a.goal_rate;
    j["eval_mode"] = eval_mode;
    if (eval_mode) j["failure_rate"] = a.failure_rate;
    return j.dump(2);
}

}  // namespace zsim::metrics
