#include <cstring>
#include <fstream>

#include "core/common.hpp"
#include "core/geometry.hpp"
#include "core/roads.hpp"
#include "core/scenario.hpp"

namespace zsim::scenario {

namespace {

constexpr char kMagic[4] = {'Z', 'S', 'I', 'M'};

// --- little-endian primitives -------------------------------------------

void put_bytes(std::string& out, const void* p, size_t n) { out.append(static_cast<const char*>(p), n); }

template <class T>
void put(std::string& out, T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    put_bytes(out, &v, sizeof(T));
}

void put_string(std::string& out, const std::string& s) {
    put<uint32_t>(out, uint32_t(s.size()));
    put_bytes(out, s.data(), s.size());
}

void put_f32_array(std::string& out, const std::vector<float>& a) {
    put<uint32_t>(out, uint32_t(a.size()));
    put_bytes(out, a.data(), a.size() * sizeof(float));
}

void put_u8_array(std::string& out, const std::vector<uint8_t>& a) {
    put<uint32_t>(out, uint32_t(a.size()));
    put_bytes(out, a.data(), a.size());
}

struct Reader {
    const uint8_t* p;
    const uint8_t* end;
    std::string origin;

    void need(size_t n) const {
        if (size_t(end - p) < n) fail(ErrorKind::io, origin + ": truncated record");
    }
    template <class T>
    T get() {
        need(sizeof(T));
        T v;
        std::memcpy(&v, p, sizeof(T));
        p += sizeof(T);
        return v;
    }
    std::string get_string() {
        uint32_t n = get<uint32_t>();
        need(n);
        std::string s(reinterpret_cast<const char*>(p), n);
        p += n;
        return s;
    }
    std::vector<float> get_f32_array() {
        uint32_t n = get<uint32_t>();
        need(size_t(n) * sizeof(float));
        std::vector<float> a(n);
        std::memcpy(a.data(), p, size_t(n) * sizeof(float));
        p += size_t(n) * sizeof(float);
        return a;
    }
    std::vector<uint8_t> get_u8_array() {
        uint32_t n = get<uint32_t>();
        need(n);
        std::vector<uint8_t> a(p, p + n);
        p += n;
        return a;
    }
};

std::string encode_record(const Scenario& s) {
    std::string out;
    put_string(out, s.id);
    put<uint32_t>(out, s.num_steps);
    put_f32_array(out, s.ego.x);
    put_f32_array(out, s.ego.y);
    put_f32_array(out, s.ego.heading);
    put_f32_array(out, s.ego.v);
    put<uint32_t>(out, uint32_t(s.agents.size()));
    for (const auto& a : s.agents) {
        put_string(out, a.id);
        put<float>(out, a.length);
        put<float>(out, a.width);
        put_f32_array(out, a.x);
        put_f32_array(out, a.y);
        put_f32_array(out, a.heading);
        put_f32_array(out, a.speed);
        put_u8_array(out, a.valid);
    }
    put<uint32_t>(out, uint32_t(s.route.lanes.size()));
    for (const auto& l : s.route.lanes) {
        put<uint32_t>(out, l.lane_id);
        put_f32_array(out, l.left_xy);
        put_f32_array(out, l.right_xy);
        put<float>(out, l.s_start);
        put<float>(out, l.s_end);
    }
    put<uint32_t>(out, uint32_t(s.road_features.size()));
    for (const auto& f : s.road_features) {
        put<uint8_t>(out, uint8_t(f.kind));
        put<uint8_t>(out, uint8_t(f.directionality));
        put_f32_array(out, f.xy);
    }
    put<uint32_t>(out, uint32_t(s.traffic_lights.size()));
    for (const auto& t : s.traffic_lights) {
        put<uint32_t>(out, t.signal_id);
        put<float>(out, t.stop_x);
        put<float>(out, t.stop_y);
        put_u8_array(out, t.state);
    }
    put<uint32_t>(out, uint32_t(s.stop_lines.size()));
    for (const auto& sl : s.stop_lines) {
        put_f32_array(out, sl.xy);
        put<float>(out, sl.pos_x);
        put<float>(out, sl.pos_y);
    }
    put<float>(out, s.speed_limit);
    put<float>(out, s.goal_x);
    put<float>(out, s.goal_y);
    return out;
}

Scenario decode_record(Reader& r, double dt) {
    Scenario s;
    s.dt = dt;
    s.id = r.get_string();
    s.num_steps = r.get<uint32_t>();
    s.ego.x = r.get_f32_array();
    s.ego.y = r.get_f32_array();
    s.ego.heading = r.get_f32_array();
    s.ego.v = r.get_f32_array();
    uint32_t n_agents = r.get<uint32_t>();
    s.agents.resize(n_agents);
    for (auto& a : s.agents) {
        a.id = r.get_string();
        a.length = r.get<float>();
        a.width = r.get<float>();
        a.x = r.get_f32_array();
        a.y = r.get_f32_array();
        a.heading = r.get_f32_array();
        a.speed = r.get_f32_array();
        a.valid = r.get_u8_array();
    }
    uint32_t n_lanes = r.get<uint32_t>();
    s.route.lanes.resize(n_lanes);
    for (auto& l : s.route.lanes) {
        l.lane_id = r.get<uint32_t>();
        l.left_xy = r.get_f32_array();
        l.right_xy = r.get_f32_array();
        l.s_start = r.get<float>();
        l.s_end = r.get<float>();
    }
    uint32_t n_features = r.get<uint32_t>();
    s.road_features.resize(n_features);
    for (auto& f : s.road_features) {
        f.kind = FeatureKind(r.get<uint8_t>());
        f.directionality = Directionality(r.get<uint8_t>());
        f.xy = r.get_f32_array();
    }
    uint32_t n_lights = r.get<uint32_t>();
    s.traffic_lights.resize(n_lights);
    for (auto& t : s.traffic_lights) {
        t.signal_id = r.get<uint32_t>();
        t.stop_x = r.get<float>();
        t.stop_y = r.get<float>();
        t.state = r.get_u8_array();
    }
    uint32_t n_stop = r.get<uint32_t>();
    s.stop_lines.resize(n_stop);
    for (auto& sl : s.stop_lines) {
        sl.xy = r.get_f32_array();
        sl.pos_x = r.get<float>();
        sl.pos_y = r.get<float>();
    }
    s.speed_limit = r.get<float>();
    s.goal_x = r.get<float>();
    s.goal_y = r.get<float>();
    if (r.p != r.end) fail(ErrorKind::io, r.origin + ": trailing bytes in record");
    return s;
}

}  // namespace

std::optional<std::string> validate(const Scenario& s) {
    auto err = [&](const std::string& m) { return std::optional<std::string>("scenario `" + s.id + "`: " + m); };
    if (s.num_steps < 2) return err("num_steps must be >= 2");
    if (!(s.dt > 0.0)) return err("dt must be > 0");
    size_t n = s.num_steps;
    if (s.ego.x.size() != n || s.ego.y.size() != n || s.ego.heading.size() != n || s.ego.v.size() != n) {
        return err("ego_log must have exactly num_steps entries");
    }
    for (const auto& a : s.agents) {
        if (!(a.length > 0.f) || !(a.width > 0.f)) return err("agent `" + a.id + "`: dims must be > 0");
        if (a.x.size() != n || a.y.size() != n || a.heading.size() != n || a.speed.size() != n ||
            a.valid.size() != n) {
            return err("agent `" + a.id + "`: pose arrays must have num_steps entries");
        }
    }
    if (s.route.lanes.empty()) return err("route has no lanes");
    for (const auto& l : s.route.lanes) {
        if (l.left_xy.size() < 4 || l.right_xy.size() < 4) {
            return err("lane " + std::to_string(l.lane_id) + ": border polylines need >= 2 points");
        }
        if (l.left_xy.size() % 2 != 0 || l.right_xy.size() % 2 != 0) {
            return err("lane " + std::to_string(l.lane_id) + ": interleaved xy array has odd length");
        }
        if (!(l.s_end > l.s_start)) {
            return err("lane " + std::to_string(l.lane_id) + ": empty valid interval");
        }
        // Borders of one lane must not intersect each other.
        size_t nl = l.left_xy.size() / 2, nr = l.right_xy.size() / 2;
        for (size_t i = 0; i + 1 < nl; ++i) {
            geom::Vec2 a0{l.left_xy[2 * i], l.left_xy[2 * i + 1]};
            geom::Vec2 a1{l.left_xy[2 * i + 2], l.left_xy[2 * i + 3]};
            for (size_t j = 0; j + 1 < nr; ++j) {
                geom::Vec2 b0{l.right_xy[2 * j], l.right_xy[2 * j + 1]};
                geom::Vec2 b1{l.right_xy[2 * j + 2], l.right_xy[2 * j + 3]};
                if (geom::segment_segment_distance(a0, a1, b0, b1) == 0.0) {
                    return err("lane " + std::to_string(l.lane_id) + ": left/right borders intersect");
                }
            }
        }
    }
    // Valid intervals must cover [0, route_length] without gaps.
    {
        std::vector<std::pair<float, float>> iv;
        float route_len = 0.f;
        for (const auto& l : s.route.lanes) {
            iv.emplace_back(l.s_start, l.s_end);
            route_len = std::max(route_len, l.s_end);
        }
        std::sort(iv.begin(), iv.end());
        float covered = 0.f;
        for (const auto& [a, b] : iv) {
            if (a > covered + 1e-3f) return err("route validity gap at s=" + std::to_string(covered));
            covered = std::max(covered, b);
        }
        if (covered + 1e-3f < route_len) return err("route validity gap before route end");
    }
    for (const auto& f : s.road_features) {
        if (f.xy.size() < 4 || f.xy.size() % 2 != 0) return err("road feature needs >= 2 points");
        if (uint8_t(f.kind) >= kNumFeatureKinds) return err("bad feature kind");
        if (uint8_t(f.directionality) >= kNumDirectionality) return err("bad directionality");
    }
    for (const auto& t : s.traffic_lights) {
        if (t.state.size() != n) return err("traffic light state must have num_steps entries");
        for (uint8_t st : t.state) {
            if (st >= kNumLightStates) return err("bad light state");
        }
    }
    for (const auto& sl : s.stop_lines) {
        if (sl.xy.size() < 4 || sl.xy.size() % 2 != 0) return err("stop line needs >= 2 points");
    }
    // Goal must sit within one route-width of the route envelope.
    {
        roads::RouteFrame frame = roads::RouteFrame::build(s.route);
        auto proj = roads::project({s.goal_x, s.goal_y}, frame);
        double width = 2.0 * frame.max_half_width();
        if (std::abs(proj.d) > width) return err("goal is more than one route-width off the route");
    }
    return std::nullopt;
}

bool operator==(const Scenario& a, const Scenario& b) {
    auto agent_eq = [](const LoggedAgent& x, const LoggedAgent& y) {
        return x.id == y.id && x.length == y.length && x.width == y.width && x.x == y.x && x.y == y.y &&
               x.heading == y.heading && x.speed == y.speed && x.valid == y.valid;
    };
    if (!(a.id == b.id && a.num_steps == b.num_steps && a.dt == b.dt && a.ego.x == b.ego.x && a.ego.y == b.ego.y &&
          a.ego.heading == b.ego.heading && a.ego.v == b.ego.v && a.speed_limit == b.speed_limit &&
          a.goal_x == b.goal_x && a.goal_y == b.goal_y)) {
        return false;
    }
    if (a.agents.size() != b.agents.size()) return false;
    for (size_t i = 0; i < a.agents.size(); ++i) {
        if (!agent_eq(a.agents[i], b.agents[i])) return false;
    }
    if (a.route.lanes.size() != b.route.lanes.size()) return false;
    for (size_t i = 0; i < a.route.lanes.size(); ++i) {
        const auto& x = a.route.lanes[i];
        const auto& y = b.route.lanes[i];
        if (!(x.lane_id == y.lane_id && x.left_xy == y.left_xy && x.right_xy == y.right_xy &&
              x.s_start == y.s_start && x.s_end == y.s_end)) {
            return false;
        }
    }
    if (a.road_features.size() != b.road_features.size()) return false;
    for (size_t i = 0; i < a.road_features.size(); ++i) {
        const auto& x = a.road_features[i];
        const auto& y = b.road_features[i];
        if (!(x.kind == y.kind && x.directionality == y.directionality && x.xy == y.xy)) return false;
    }
    if (a.traffic_lights.size() != b.traffic_lights.size()) return false;
    for (size_t i = 0; i < a.traffic_lights.size(); ++i) {
        const auto& x = a.traffic_lights[i];
        const auto& y = b.traffic_lights[i];
        if (!(x.signal_id == y.signal_id && x.stop_x == y.stop_x && x.stop_y == y.stop_y && x.state == y.state)) {
            return false;
        }
    }
    if (a.stop_lines.size() != b.stop_lines.size()) return false;
    for (size_t i = 0; i < a.stop_lines.size(); ++i) {
        const auto& x = a.stop_lines[i];
        const auto& y = b.stop_lines[i];
        if (!(x.xy == y.xy && x.pos_x == y.pos_x && x.pos_y == y.pos_y)) return false;
    }
    return true;
}

void write_file(const std::string& path, const std::vector<Scenario>& scenarios) {
    if (scenarios.empty()) fail(ErrorKind::invalid_argument, "write_file: no scenarios");
    double dt = scenarios[0].dt;
    for (size_t i = 0; i < scenarios.size(); ++i) {
        if (auto msg = validate(scenarios[i])) {
            fail(ErrorKind::invalid_argument, "scenario " + std::to_string(i) + " rejected: " + *msg);
        }
        if (scenarios[i].dt != dt) {
            fail(ErrorKind::invalid_argument,
                 "scenario " + std::to_string(i) + " rejected: dt differs from file dt");
        }
    }
    std::string buf;
    buf.append(kMagic, 4);
    put<uint16_t>(buf, kFormatVersion);
    put<uint16_t>(buf, 0);  // reserved
    put<double>(buf, dt);
    for (const auto& s : scenarios) {
        std::string rec = encode_record(s);
        put<uint32_t>(buf, uint32_t(rec.size()));
        buf += rec;
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::io, "cannot open for writing: " + path);
    out.write(buf.data(), std::streamsize(buf.size()));
    if (!out) fail(ErrorKind::io, "write failed: " + path);
}

Dataset::Dataset(const std::string& path) : path_(path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::io, "cannot open scenario file: " + path);
    char magic[4];
    uint16_t version = 0, reserved = 0;
    in.read(magic, 4);
    in.read(reinterpret_cast<char*>(&version), 2);
    in.read(reinterpret_cast<char*>(&reserved), 2);
    in.read(reinterpret_cast<char*>(&dt_), 8);
    if (!in || std::memcmp(magic, kMagic, 4) != 0) fail(ErrorKind::io, path + ": not a ZSIM scenario file");
    if (version != kFormatVersion) {
        fail(ErrorKind::io, path + ": unsupported format version " + std::to_string(version));
    }
    uint64_t off = 16;
    while (true) {
        uint32_t len = 0;
        in.read(reinterpret_cast<char*>(&len), 4);
        if (in.eof()) break;
        if (!in) fail(ErrorKind::io, path + ": truncated record header");
        offsets_.emplace_back(off + 4, len);
        off += 4 + uint64_t(len);
        in.seekg(std::streamoff(off));
        if (!in) fail(ErrorKind::io, path + ": truncated record body");
        in.peek();
        if (in.eof()) break;
    }
}

Scenario Dataset::load(int64_t index) const {
    if (index < 0 || index >= size()) {
        fail(ErrorKind::invalid_argument,
             "scenario index " + std::to_string(index) + " out of range (dataset has " +
                 std::to_string(size()) + ")");
    }
    auto [off, len] = offsets_[size_t(index)];
    std::ifstream in(path_, std::ios::binary);
    if (!in) fail(ErrorKind::io, "cannot open scenario file: " + path_);
    std::vector<uint8_t> buf(len);
    in.seekg(std::streamoff(off));
    in.read(reinterpret_cast<char*>(buf.data()), len);
    if (!in) fail(ErrorKind::io, path_ + ": truncated record");
    Reader r{buf.data(), buf.data() + buf.size(), path_ + "[" + std::to_string(index) + "]"};
    return decode_record(r, dt_);
}

std::shared_ptr<const Scenario> Dataset::load_shared(int64_t index) const {
    return std::make_shared<const Scenario>(load(index));
}

std::vector<Scenario> read_file(const std::string& path) {
    Dataset ds(path);
    std::vector<Scenario> out;
    out.reserve(size_t(ds.size()));
    for (int64_t i = 0; i < ds.size(); ++i) out.push_back(ds.load(i));
    return out;
}

ScenarioBatch make_batch(const std::vector<std::shared_ptr<const Scenario>>& scenarios, int horizon) {
    if (scenarios.empty()) fail(ErrorKind::invalid_argument, "make_batch: empty scenario list");
    ScenarioBatch b;
    b.batch = int(scenarios.size());
    b.horizon = horizon;
    b.dt = scenarios[0]->dt;
    b.items = scenarios;
    size_t total = size_t(b.batch) * size_t(horizon);
    b.mask.assign(total, 0);
    b.ego_x.assign(total, 0.f);
    b.ego_y.assign(total, 0.f);
    b.ego_heading.assign(total, 0.f);
    b.ego_v.assign(total, 0.f);
    b.num_steps.resize(size_t(b.batch));
    for (int i = 0; i < b.batch; ++i) {
        const Scenario& s = *scenarios[size_t(i)];
        if (int(s.num_steps) > horizon) {
            fail(ErrorKind::invalid_argument,
                 "scenario `" + s.id + "` has " + std::to_string(s.num_steps) + " steps > T=" +
                     std::to_string(horizon));
        }
        if (s.dt != b.dt) fail(ErrorKind::invalid_argument, "mixed dt within batch");
        b.num_steps[size_t(i)] = int32_t(s.num_steps);
        for (uint32_t t = 0; t < s.num_steps; ++t) {
            size_t k = b.at(i, int(t));
            b.mask[k] = 1;
            b.ego_x[k] = s.ego.x[t];
            b.ego_y[k] = s.ego.y[t];
            b.ego_heading[k] = s.ego.heading[t];
            b.ego_v[k] = s.ego.v[t];
        }
    }
    return b;
}

ScenarioBatch load_batch(const Dataset& ds, const std::vector<int64_t>& indices, int horizon) {
    if (indices.empty()) fail(ErrorKind::invalid_argument, "load_batch: empty index list");
    std::vector<std::shared_ptr<const Scenario>> scenarios;
    scenarios.reserve(indices.size());
    for (int64_t idx : indices) scenarios.push_back(ds.load_shared(idx));
    return make_batch(scenarios, horizon);
}

ScenarioBatch load_batch(const std::string& path, const std::vector<int64_t>& indices, int horizon) {
    Dataset ds(path);
    return load_batch(ds, indices, horizon);
}

}  // namespace zsim::scenario
