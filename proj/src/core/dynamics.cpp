#include "core/dynamics.hpp"

#include <algorithm>
#include <cmath>

#include "core/common.hpp"

namespace zsim::dyn {

EgoState bicycle_step(const EgoState& s, double accel, double steer_rate, double dt, double wheelbase,
                      const Limits& lim) {
    EgoState n;
    n.x = s.x + s.v * std::cos(s.heading) * dt;
    n.y = s.y + s.v * std::sin(s.heading) * dt;
    n.heading = wrap_angle(s.heading + s.v / wheelbase * std::tan(s.steering) * dt);
    n.v = std::max(s.v + accel * dt, lim.v_min);
    n.steering = std::clamp(s.steering + steer_rate * dt, -lim.delta_max, lim.delta_max);
    return n;
}

ActionTable ActionTable::defaults() {
    ActionTable t;
    t.accel_bins = {-4.0, -2.0, -0.5, 0.0, 0.5, 2.0, 4.0};
    t.steer_rate_bins = {-0.4, -0.1, 0.0, 0.1, 0.4};
    return t;
}

namespace {

void check_bins(const std::vector<double>& bins, const char* name) {
    if (bins.empty()) fail(ErrorKind::invalid_argument, std::string(name) + ": empty bin list");
    bool has_zero = false;
    for (size_t i = 0; i < bins.size(); ++i) {
        if (bins[i] == 0.0) has_zero = true;
        if (i > 0 && bins[i] <= bins[i - 1]) {
            fail(ErrorKind::invalid_argument, std::string(name) + ": bins must be strictly increasing");
        }
        if (bins[i] != -bins[bins.size() - 1 - i]) {
            fail(ErrorKind::invalid_argument, std::string(name) + ": bins must be symmetric about 0");
        }
    }
    if (!has_zero) fail(ErrorKind::invalid_argument, std::string(name) + ": bins must contain 0");
}

int nearest_bin(const std::vector<double>& bins, double v) {
    int best = 0;
    double best_d = std::abs(v - bins[0]);
    for (int i = 1; i < int(bins.size()); ++i) {
        double d = std::abs(v - bins[i]);
        if (d < best_d) {
            best = i;
            best_d = d;
        }
    }
    return best;
}

}  // namespace

const ActionTable& ActionTable::validated() const {
    check_bins(accel_bins, "accel_bins");
    check_bins(steer_rate_bins, "steer_rate_bins");
    return *this;
}

std::pair<double, double> ActionTable::decode(int accel_idx, int steer_idx) const {
    if (accel_idx < 0 || accel_idx >= num_accel() || steer_idx < 0 || steer_idx >= num_steer()) {
        fail(ErrorKind::invalid_argument, "action index out of range");
    }
    return {accel_bins[size_t(accel_idx)], steer_rate_bins[size_t(steer_idx)]};
}

int ActionTable::nearest_accel(double a) const { return nearest_bin(accel_bins, a); }
int ActionTable::nearest_steer(double r) const { return nearest_bin(steer_rate_bins, r); }

}  // namespace zsim::dyn
