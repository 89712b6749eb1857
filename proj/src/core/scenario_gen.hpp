#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "core/config.hpp"
#include "core/scenario.hpp"

namespace zsim::scenario {

struct GeneratorConfig {
    int count = 200;
    int num_steps = 96;   // logged states per scenario
    int t_bound = 96;     // padding bound T; num_steps <= t_bound
    double dt = 0.1;
    // topology mix, normalized internally
    double mix_straight = 0.4;
    double mix_curve = 0.3;
    double mix_junction = 0.3;
    double stop_sign_share = 0.25;  // junction scenarios controlled by a stop sign
    double density = 0.5;           // other agents per 50 m of route
    double lane_width = 3.5;
    double speed_limit = 10.0;  // m/s
    std::string id_prefix = "syn";

    static GeneratorConfig from_kv(const cfg::KeyValue& kv);
    cfg::KeyValue to_kv() const;
    void validate() const;
};

// Deterministic in (config, seed). Every returned scenario passes validate()
// and replays its own log through the simulator without a single done signal.
std::vector<Scenario> generate_synthetic(const GeneratorConfig& config, uint64_t seed);

}  // namespace zsim::scenario
