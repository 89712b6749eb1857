#include "core/train/optimizer.hpp"

#include <cmath>

#include "core/common.hpp"

namespace zsim::train {

void Adam::update(std::vector<float>& params, const std::vector<float>& grad) {
    if (params.size() != state_.m.size() || grad.size() != state_.m.size()) {
        fail(ErrorKind::invalid_argument, "adam: shape mismatch");
    }
    ++state_.step;
    double b1 = cfg_.beta1, b2 = cfg_.beta2;
    double bc1 = 1.0 - std::pow(b1, double(state_.step));
    double bc2 = 1.0 - std::pow(b2, double(state_.step));
    for (size_t i = 0; i < params.size(); ++i) {
        double g = double(grad[i]);
        double m = b1 * double(state_.m[i]) + (1.0 - b1) * g;
        double v = b2 * double(state_.v[i]) + (1.0 - b2) * g * g;
        state_.m[i] = float(m);
        state_.v[i] = float(v);
        params[i] = float(double(params[i]) - cfg_.lr * (m / bc1) / (std::sqrt(v / bc2) + cfg_.eps));
    }
}

}  // namespace zsim::train
