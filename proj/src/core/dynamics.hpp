#pragma once

#include <cstdint>
#include <utility>
#include <vector>

namespace zsim::dyn {

// Rear-axle reference point. heading is wrapped to (-pi, pi].
struct EgoState {
    double x = 0.0;
    double y = 0.0;
    double heading = 0.0;
    double v = 0.0;
    double steering = 0.0;  // front wheel angle, rad
};

struct Limits {
    double delta_max = 0.55;  // |steering| bound, rad
    double v_min = 0.0;       // no reverse
};

// Explicit Euler update of the kinematic bicycle model. All right-hand sides
// read the pre-step state; clamping happens after integration.
EgoState bicycle_step(const EgoState& s, double accel, double steer_rate, double dt, double wheelbase,
                      const Limits& lim = {});

// Discrete action set: one bin list per control. Both lists must be
// symmetric about 0, contain 0 and be strictly increasing.
struct ActionTable {
    std::vector<double> accel_bins;
    std::vector<double> steer_rate_bins;

    static ActionTable defaults();

    // Throws on invariant violation, returns *this for chaining.
    const ActionTable& validated() const;

    int num_accel() const { return int(accel_bins.size()); }
    int num_steer() const { return int(steer_rate_bins.size()); }
    int num_actions() const { return num_accel() * num_steer(); }

    std::pair<double, double> decode(int accel_idx, int steer_idx) const;

    // Indices of the bins closest to the requested continuous controls
    // (ties resolve to the lower index).
    int nearest_accel(double a) const;
    int nearest_steer(double r) const;
};

}  // namespace zsim::dyn
