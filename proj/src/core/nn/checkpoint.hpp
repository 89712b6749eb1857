#pragma once

#include <optional>
#include <string>

#include "core/dynamics.hpp"
#include "core/nn/model.hpp"

namespace zsim::nn {

// Optimizer state persisted alongside the parameters so training can resume.
struct AdamState {
    std::vector<float> m, v;
    int64_t step = 0;
};

struct Checkpoint {
    ModelConfig config;
    dyn::ActionTable table;  // serialized with the weights; a policy and its
                             // action table cannot be separated
    std::vector<float> params;
    std::optional<AdamState> opt;

    static Checkpoint from_model(const Model<float>& m, const dyn::ActionTable& table) {
        Checkpoint c;
        c.config = m.cfg;
        c.table = table;
        c.params = m.params;
        return c;
    }

    Model<float> to_model() const {
        Model<float> m = Model<float>::make(config);
        if (int64_t(params.size()) != m.index.total) {
            fail(ErrorKind::io, "checkpoint parameter count does not match its config");
        }
        m.params = params;
        return m;
    }
};

// File layout: magic "ZCKP", u16 version, u8 has_optimizer, u64 config hash,
// config text, action table (f64 bins), named entry index, then the flat
// little-endian f32 parameter block. Round-trips bit-exactly.
void save_checkpoint(const std::string& path, const Checkpoint& c);
Checkpoint load_checkpoint(const std::string& path);

std::string checkpoint_info_json(const std::string& path);

}  // namespace zsim::nn
