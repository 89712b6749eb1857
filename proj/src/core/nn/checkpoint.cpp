#include "core/nn/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include <json.hpp>

#include "core/config.hpp"

namespace zsim::nn {

namespace {

constexpr char kMagic[4] = {'Z', 'C', 'K', 'P'};
constexpr uint16_t kVersion = 1;

template <class T>
void put(std::string& out, T v) {
    out.append(reinterpret_cast<const char*>(&v), sizeof(T));
}

void put_string(std::string& out, const std::string& s) {
    put<uint32_t>(out, uint32_t(s.size()));
    out += s;
}

struct Reader {
    const uint8_t* p;
    const uint8_t* end;
    std::string origin;

    void need(size_t n) const {
        if (size_t(end - p) < n) fail(ErrorKind::io, origin + ": truncated checkpoint");
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
};

ModelConfig config_from_text(const std::string& text) {
    auto kv = cfg::KeyValue::parse_text(text, "<checkpoint config>");
    ModelConfig c;
    c.latent = int(kv.get_int("latent", c.latent));
    c.heads = int(kv.get_int("heads", c.heads));
    c.trunk_blocks = int(kv.get_int("trunk_blocks", c.trunk_blocks));
    c.value_embed = int(kv.get_int("value_embed", c.value_embed));
    c.obs.n_agents = int(kv.get_int("n_agents", c.obs.n_agents));
    c.obs.n_road = int(kv.get_int("n_road", c.obs.n_road));
    c.obs.n_route = int(kv.get_int("n_route", c.obs.n_route));
    c.n_accel = int(kv.get_int("n_accel", c.n_accel));
    c.n_steer = int(kv.get_int("n_steer", c.n_steer));
    return c;
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& c) {
    c.config.validate();
    ParamIndex index = ParamIndex::build(c.config);
    if (int64_t(c.params.size()) != index.total) {
        fail(ErrorKind::invalid_argument, "save_checkpoint: parameter count mismatch");
    }
    if (c.opt && (c.opt->m.size() != c.params.size() || c.opt->v.size() != c.params.size())) {
        fail(ErrorKind::invalid_argument, "save_checkpoint: optimizer state size mismatch");
    }
    std::string buf;
    buf.append(kMagic, 4);
    put<uint16_t>(buf, kVersion);
    put<uint8_t>(buf, c.opt ? 1 : 0);
    std::string cfg_text = c.config.dump();
    put<uint64_t>(buf, fnv1a(cfg_text));
    put_string(buf, cfg_text);
    put<uint32_t>(buf, uint32_t(c.table.accel_bins.size()));
    for (double v : c.table.accel_bins) put<double>(buf, v);
    put<uint32_t>(buf, uint32_t(c.table.steer_rate_bins.size()));
    for (double v : c.table.steer_rate_bins) put<double>(buf, v);
    put<uint32_t>(buf, uint32_t(index.entries.size()));
    for (const auto& e : index.entries) {
        put_string(buf, e.name);
        put<int64_t>(buf, e.offset);
        put<int32_t>(buf, e.rows);
        put<int32_t>(buf, e.cols);
    }
    put<uint64_t>(buf, uint64_t(c.params.size()));
    buf.append(reinterpret_cast<const char*>(c.params.data()), c.params.size() * sizeof(float));
    if (c.opt) {
        put<int64_t>(buf, c.opt->step);
        buf.append(reinterpret_cast<const char*>(c.opt->m.data()), c.opt->m.size() * sizeof(float));
        buf.append(reinterpret_cast<const char*>(c.opt->v.data()), c.opt->v.size() * sizeof(float));
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::io, "cannot open for writing: " + path);
    out.write(buf.data(), std::streamsize(buf.size()));
    if (!out) fail(ErrorKind::io, "write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::io, "cannot open checkpoint: " + path);
    std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    Reader r{reinterpret_cast<const uint8_t*>(buf.data()),
             reinterpret_cast<const uint8_t*>(buf.data()) + buf.size(), path};
    r.need(4);
    if (std::memcmp(r.p, kMagic, 4) != 0) fail(ErrorKind::io, path + ": not a ZCKP checkpoint");
    r.p += 4;
    uint16_t version = r.get<uint16_t>();
    if (version != kVersion) fail(ErrorKind::io, path + ": unsupported checkpoint version");
    uint8_t has_opt = r.get<uint8_t>();
    uint64_t cfg_hash = r.get<uint64_t>();
    std::string cfg_text = r.get_string();
    if (fnv1a(cfg_text) != cfg_hash) fail(ErrorKind::io, path + ": config hash mismatch");

    Checkpoint c;
    c.config = config_from_text(cfg_text);
    uint32_t na = r.get<uint32_t>();
    c.table.accel_bins.resize(na);
    for (auto& v : c.table.accel_bins) v = r.get<double>();
    uint32_t ns = r.get<uint32_t>();
    c.table.steer_rate_bins.resize(ns);
    for (auto& v : c.table.steer_rate_bins) v = r.get<double>();

    ParamIndex index = ParamIndex::build(c.config);
    uint32_t n_entries = r.get<uint32_t>();
    if (n_entries != index.entries.size()) fail(ErrorKind::io, path + ": entry index mismatch");
    for (const auto& e : index.entries) {
        std::string name = r.get_string();
        int64_t offset = r.get<int64_t>();
        int32_t rows = r.get<int32_t>();
        int32_t cols = r.get<int32_t>();
        if (name != e.name || offset != e.offset || rows != e.rows || cols != e.cols) {
            fail(ErrorKind::io, path + ": parameter layout mismatch at `" + name + "`");
        }
    }
    uint64_t n_params = r.get<uint64_t>();
    if (int64_t(n_params) != index.total) fail(ErrorKind::io, path + ": parameter count mismatch");
    c.params.resize(n_params);
    r.need(n_params * sizeof(float));
    std::memcpy(c.params.data(), r.p, n_params * sizeof(float));
    r.p += n_params * sizeof(float);
    if (has_opt) {
        AdamState st;
        st.step = r.get<int64_t>();
        st.m.resize(n_params);
        st.v.resize(n_params);
        r.need(2 * n_params * sizeof(float));
        std::memcpy(st.m.data(), r.p, n_params * sizeof(float));
        r.p += n_params * sizeof(float);
        std::memcpy(st.v.data(), r.p, n_params * sizeof(float));
        r.p += n_params * sizeof(float);
        c.opt = std::move(st);
    }
    if (r.p != r.end) fail(ErrorKind::io, path + ": trailing bytes");
    return c;
}

std::string checkpoint_info_json(const std::string& path) {
    Checkpoint c = load_checkpoint(path);
    nlohmann::json j;
    j["config_hash"] = c.config.hash();
    j["param_count"] = ParamIndex::build(c.config).total;
    j["latent"] = c.config.latent;
    j["heads"] = c.config.heads;
    j["trunk_blocks"] = c.config.trunk_blocks;
    j["accel_bins"] = c.table.accel_bins;
    j["steer_rate_bins"] = c.table.steer_rate_bins;
    j["has_optimizer_state"] = c.opt.has_value();
    return j.dump();
}

}  // namespace zsim::nn
