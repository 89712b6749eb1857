#include <fstream>

#include <json.hpp>

#include "core/common.hpp"
#include "core/scenario.hpp"

namespace zsim::scenario {

using nlohmann::json;

namespace {

json agent_to_json(const LoggedAgent& a) {
    return json{{"id", a.id},   {"length", a.length}, {"width", a.width},   {"x", a.x},
                {"y", a.y},     {"heading", a.heading}, {"speed", a.speed}, {"valid", a.valid}};
}

LoggedAgent agent_from_json(const json& j) {
    LoggedAgent a;
    a.id = j.at("id").get<std::string>();
    a.length = j.at("length").get<float>();
    a.width = j.at("width").get<float>();
    a.x = j.at("x").get<std::vector<float>>();
    a.y = j.at("y").get<std::vector<float>>();
    a.heading = j.at("heading").get<std::vector<float>>();
    a.speed = j.at("speed").get<std::vector<float>>();
    a.valid = j.at("valid").get<std::vector<uint8_t>>();
    return a;
}

json to_json(const Scenario& s) {
    json j;
    j["id"] = s.id;
    j["num_steps"] = s.num_steps;
    j["dt"] = s.dt;
    j["ego_log"] = {{"x", s.ego.x}, {"y", s.ego.y}, {"heading", s.ego.heading}, {"v", s.ego.v}};
    j["agents"] = json::array();
    for (const auto& a : s.agents) j["agents"].push_back(agent_to_json(a));
    j["route"] = json::array();
    for (const auto& l : s.route.lanes) {
        j["route"].push_back(json{{"lane_id", l.lane_id},
                                  {"left_border", l.left_xy},
                                  {"right_border", l.right_xy},
                                  {"valid_interval", {l.s_start, l.s_end}}});
    }
    j["road_features"] = json::array();
    for (const auto& f : s.road_features) {
        j["road_features"].push_back(
            json{{"kind", int(f.kind)}, {"directionality", int(f.directionality)}, {"points", f.xy}});
    }
    j["traffic_lights"] = json::array();
    for (const auto& t : s.traffic_lights) {
        j["traffic_lights"].push_back(json{{"signal_id", t.signal_id},
                                           {"stop_point", {t.stop_x, t.stop_y}},
                                           {"state", t.state}});
    }
    j["stop_lines"] = json::array();
    for (const auto& sl : s.stop_lines) {
        j["stop_lines"].push_back(json{{"points", sl.xy}, {"position", {sl.pos_x, sl.pos_y}}});
    }
    j["speed_limit"] = s.speed_limit;
    j["goal"] = {s.goal_x, s.goal_y};
    return j;
}

Scenario from_json(const json& j) {
    Scenario s;
    s.id = j.at("id").get<std::string>();
    s.num_steps = j.at("num_steps").get<uint32_t>();
    s.dt = j.at("dt").get<double>();
    const auto& ego = j.at("ego_log");
    s.ego.x = ego.at("x").get<std::vector<float>>();
    s.ego.y = ego.at("y").get<std::vector<float>>();
    s.ego.heading = ego.at("heading").get<std::vector<float>>();
    s.ego.v = ego.at("v").get<std::vector<float>>();
    for (const auto& a : j.at("agents")) s.agents.push_back(agent_from_json(a));
    for (const auto& l : j.at("route")) {
        RouteLane lane;
        lane.lane_id = l.at("lane_id").get<uint32_t>();
        lane.left_xy = l.at("left_border").get<std::vector<float>>();
        lane.right_xy = l.at("right_border").get<std::vector<float>>();
        lane.s_start = l.at("valid_interval").at(0).get<float>();
        lane.s_end = l.at("valid_interval").at(1).get<float>();
        s.route.lanes.push_back(std::move(lane));
    }
    for (const auto& f : j.at("road_features")) {
        RoadFeature rf;
        rf.kind = FeatureKind(f.at("kind").get<int>());
        rf.directionality = Directionality(f.at("directionality").get<int>());
        rf.xy = f.at("points").get<std::vector<float>>();
        s.road_features.push_back(std::move(rf));
    }
    for (const auto& t : j.at("traffic_lights")) {
        TrafficLight tl;
        tl.signal_id = t.at("signal_id").get<uint32_t>();
        tl.stop_x = t.at("stop_point").at(0).get<float>();
        tl.stop_y = t.at("stop_point").at(1).get<float>();
        tl.state = t.at("state").get<std::vector<uint8_t>>();
        s.traffic_lights.push_back(std::move(tl));
    }
    for (const auto& sl : j.at("stop_lines")) {
        StopLine line;
        line.xy = sl.at("points").get<std::vector<float>>();
        line.pos_x = sl.at("position").at(0).get<float>();
        line.pos_y = sl.at("position").at(1).get<float>();
        s.stop_lines.push_back(std::move(line));
    }
    s.speed_limit = j.at("speed_limit").get<float>();
    s.goal_x = j.at("goal").at(0).get<float>();
    s.goal_y = j.at("goal").at(1).get<float>();
    return s;
}

}  // namespace

std::string scenario_to_json(const Scenario& s) { return to_json(s).dump(); }

void write_jsonl(const std::string& path, const std::vector<Scenario>& scenarios) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) fail(ErrorKind::io, "cannot open for writing: " + path);
    for (const auto& s : scenarios) out << to_json(s).dump() << "\n";
    if (!out) fail(ErrorKind::io, "write failed: " + path);
}

std::vector<Scenario> read_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::io, "cannot open: " + path);
    std::vector<Scenario> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        out.push_back(from_json(json::parse(line)));
    }
    return out;
}

}  // namespace zsim::scenario
