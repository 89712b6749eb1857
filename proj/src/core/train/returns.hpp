#pragma once

#include <cstdint>
#include <vector>

namespace zsim::train {

// G_t = sum_{k>=t} gamma^{k-t} r_k over masked steps (mask is 1...1 0...0).
std::vector<double> discounted_return(const std::vector<float>& rewards, const std::vector<uint8_t>& mask,
                                      double gamma);

struct VtraceOut {
    std::vector<double> vs;          // value targets
    std::vector<double> advantages;  // rho_t * (r_t + gamma*vs_{t+1}*(1-done_t) - v_t)
};

// V-trace off-policy correction over one sequence. `log_rhos` is
// log pi(a_t) - log mu(a_t); truncation uses `bootstrap` as the value past
// the end; masked steps yield vs_t = v_t and zero advantage.
VtraceOut vtrace(const std::vector<double>& values, double bootstrap, const std::vector<float>& rewards,
                 const std::vector<uint8_t>& dones, const std::vector<uint8_t>& mask,
                 const std::vector<double>& log_rhos, double gamma, double rho_bar, double c_bar);

}  // namespace zsim::train
