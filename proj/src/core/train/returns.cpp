#include "core/train/returns.hpp"

#include <algorithm>
#include <cmath>

#include "core/common.hpp"

namespace zsim::train {

std::vector<double> discounted_return(const std::vector<float>& rewards, const std::vector<uint8_t>& mask,
                                      double gamma) {
    if (rewards.size() != mask.size()) fail(ErrorKind::invalid_argument, "discounted_return: shape mismatch");
    size_t n = rewards.size();
    std::vector<double> g(n, 0.0);
    double acc = 0.0;
    for (size_t i = n; i-- > 0;) {
        if (!mask[i]) {
            acc = 0.0;
            g[i] = 0.0;
            continue;
        }
        acc = double(rewards[i]) + gamma * acc;
        g[i] = acc;
    }
    return g;
}

VtraceOut vtrace(const std::vector<double>& values, double bootstrap, const std::vector<float>& rewards,
                 const std::vector<uint8_t>& dones, const std::vector<uint8_t>& mask,
                 const std::vector<double>& log_rhos, double gamma, double rho_bar, double c_bar) {
    size_t n = values.size();
    if (rewards.size() != n || dones.size() != n || mask.size() != n || log_rhos.size() != n) {
        fail(ErrorKind::invalid_argument, "vtrace: shape mismatch");
    }
    VtraceOut out;
    out.vs.assign(n, 0.0);
    out.advantages.assign(n, 0.0);

    // reverse recursion on acc_t = vs_t - v_t
    double acc = 0.0;
    for (size_t i = n; i-- > 0;) {
        if (!mask[i]) {
            out.vs[i] = values[i];
            acc = 0.0;
            continue;
        }
        bool live_next = i + 1 < n && mask[i + 1];
        double v_next = live_next ? values[i + 1] : bootstrap;
        double not_done = dones[i] ? 0.0 : 1.0;
        double rho = std::min(rho_bar, std::exp(log_rhos[i]));
        double c = std::min(c_bar, std::exp(log_rhos[i]));
        double delta = rho * (double(rewards[i]) + gamma * v_next * not_done - values[i]);
        acc = delta + gamma * c * not_done * acc;
        out.vs[i] = values[i] + acc;
    }
    for (size_t i = 0; i < n; ++i) {
        if (!mask[i]) continue;
        bool live_next = i + 1 < n && mask[i + 1];
        double vs_next = live_next ? out.vs[i + 1] : bootstrap;
        double not_done = dones[i] ? 0.0 : 1.0;
        double rho = std::min(rho_bar, std::exp(log_rhos[i]));
        out.advantages[i] = rho * (double(rewards[i]) + gamma * vs_next * not_done - values[i]);
    }
    return out;
}

}  // namespace zsim::train
