#pragma once

#include <cstdint>
#include <vector>

#include "core/nn/checkpoint.hpp"

namespace zsim::train {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

class Adam {
public:
    Adam(AdamConfig cfg, size_t n) : cfg_(cfg) {
        state_.m.assign(n, 0.f);
        state_.v.assign(n, 0.f);
    }

    void update(std::vector<float>& params, const std::vector<float>& grad);

    const nn::AdamState& state() const { return state_; }
    nn::AdamState& state() { return state_; }
    const AdamConfig& config() const { return cfg_; }

private:
    AdamConfig cfg_;
    nn::AdamState state_;
};

}  // namespace zsim::train
