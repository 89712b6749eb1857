#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace zsim::scenario {

enum class LightState : uint8_t { red = 0, yellow = 1, green = 2, unknown = 3 };

enum class FeatureKind : uint8_t {
    lane_marking = 0,
    crosswalk = 1,
    stop_line = 2,
    bike_lane_boundary = 3,
    road_edge = 4,
};

enum class Directionality : uint8_t { none = 0, forward = 1, backward = 2, both = 3 };

constexpr int kNumFeatureKinds = 5;
constexpr int kNumDirectionality = 4;
constexpr int kNumLightStates = 4;

// Per-step ego log, one entry per recorded step (SoA).
struct EgoLog {
    std::vector<float> x;
    std::vector<float> y;
    std::vector<float> heading;
    std::vector<float> v;

    size_t size() const { return x.size(); }
};

struct LoggedAgent {
    std::string id;
    float length = 0.f;
    float width = 0.f;
    // All arrays have num_steps entries; invalid steps are flagged, never absent.
    std::vector<float> x, y, heading, speed;
    std::vector<uint8_t> valid;
};

struct RouteLane {
    uint32_t lane_id = 0;
    std::vector<float> left_xy;   // interleaved x0,y0,x1,y1,...
    std::vector<float> right_xy;  // same point count as left_xy
    float s_start = 0.f;          // valid interval along route arc length
    float s_end = 0.f;
};

struct Route {
    std::vector<RouteLane> lanes;
};

struct RoadFeature {
    FeatureKind kind = FeatureKind::lane_marking;
    Directionality directionality = Directionality::none;
    std::vector<float> xy;  // interleaved, >= 2 points
};

struct TrafficLight {
    uint32_t signal_id = 0;
    float stop_x = 0.f;
    float stop_y = 0.f;
    std::vector<uint8_t> state;  // LightState per step, num_steps entries
};

struct StopLine {
    std::vector<float> xy;  // the painted line, interleaved
    float pos_x = 0.f;      // stop position on the lane
    float pos_y = 0.f;
};

struct Scenario {
    std::string id;
    uint32_t num_steps = 0;
    double dt = 0.1;
    EgoLog ego;
    std::vector<LoggedAgent> agents;
    Route route;
    std::vector<RoadFeature> road_features;
    std::vector<TrafficLight> traffic_lights;
    std::vector<StopLine> stop_lines;
    float speed_limit = 0.f;
    float goal_x = 0.f;
    float goal_y = 0.f;
};

// First violated invariant as a message, or nullopt when valid.
std::optional<std::string> validate(const Scenario& s);

bool operator==(const Scenario& a, const Scenario& b);

// ---------------------------------------------------------------------------
// Container file: 16-byte header (magic "ZSIM", u16 version, u16 reserved,
// f64 dt) followed by a u32-length-prefixed record per scenario. Scalars and
// arrays inside a record are little-endian; float arrays are f32 and carry a
// u32 element count.
// ---------------------------------------------------------------------------

constexpr uint16_t kFormatVersion = 1;

void write_file(const std::string& path, const std::vector<Scenario>& scenarios);

// Debug mirror: one scenario per line, same field names. Binary is canonical.
void write_jsonl(const std::string& path, const std::vector<Scenario>& scenarios);
std::vector<Scenario> read_jsonl(const std::string& path);

std::string scenario_to_json(const Scenario& s);

// Random access over a scenario file. Immutable once opened; safe to share
// across threads.
class Dataset {
public:
    explicit Dataset(const std::string& path);

    int64_t size() const { return int64_t(offsets_.size()); }
    double dt() const { return dt_; }
    const std::string& path() const { return path_; }

    Scenario load(int64_t index) const;
    std::shared_ptr<const Scenario> load_shared(int64_t index) const;

private:
    std::string path_;
    double dt_ = 0.0;
    std::vector<std::pair<uint64_t, uint32_t>> offsets_;  // (file offset, record size)
};

std::vector<Scenario> read_file(const std::string& path);

// B scenarios padded to T steps, batch-major per-step arrays plus shared
// immutable scenario objects for the static side (geometry, agents, lights).
struct ScenarioBatch {
    int batch = 0;
    int horizon = 0;  // T
    double dt = 0.0;
    std::vector<std::shared_ptr<const Scenario>> items;
    // (B, T) row-major
    std::vector<uint8_t> mask;
    std::vector<float> ego_x, ego_y, ego_heading, ego_v;
    std::vector<int32_t> num_steps;

    size_t at(int b, int t) const { return size_t(b) * size_t(horizon) + size_t(t); }
};

ScenarioBatch make_batch(const std::vector<std::shared_ptr<const Scenario>>& scenarios, int horizon);
ScenarioBatch load_batch(const Dataset& ds, const std::vector<int64_t>& indices, int horizon);
ScenarioBatch load_batch(const std::string& path, const std::vector<int64_t>& indices, int horizon);

}  // namespace zsim::scenario
