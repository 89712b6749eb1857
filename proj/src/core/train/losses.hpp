#pragma once

#include <cmath>
#include <span>

#include "core/nn/model.hpp"
#include "core/train/replay.hpp"
#include "core/train/returns.hpp"

namespace zsim::train {

struct BCLossOut {
    double loss = 0.0;
    double ce_accel = 0.0;
    double ce_steer = 0.0;
    double value_mse = 0.0;
};

// Cross-entropy on both action heads plus scaled value MSE against the
// discounted-return targets; mean over the batch rows. Gradients accumulate
// into `grad` (flat, model layout); per-worker partials are reduced in slot
// order so a run is reproducible for a fixed thread count.
template <class T>
BCLossOut bc_loss_and_grad(const nn::Model<T>& model, const sim::ObservationBatch& obs,
                           std::span<const int32_t> rows, std::span<const int32_t> target_accel,
                           std::span<const int32_t> target_steer, std::span<const float> value_target,
                           double value_scale, std::vector<T>* grad_out, int threads) {
    int64_t n = int64_t(rows.size());
    if (grad_out) grad_out->assign(model.params.size(), T(0));
    if (n == 0) return {};
    struct Slot {
        std::vector<T> grad;
        double loss = 0, cea = 0, ces = 0, mse = 0;
    };
    std::vector<Slot> slots(size_t(std::max(1, threads)));
    int used = parallel_chunks(n, threads, [&](int slot, int64_t lo, int64_t hi) {
        Slot& s = slots[size_t(slot)];
        if (grad_out) s.grad.assign(model.params.size(), T(0));
        nn::RowCache<T> cache;
        T inv_n = T(1.0 / double(n));
        for (int64_t i = lo; i < hi; ++i) {
            int row = int(rows[size_t(i)]);
            nn::forward_row(model, obs, row, cache);
            nn::Vec<T> lsa = nn::log_softmax(cache.logits_accel);
            nn::Vec<T> lss = nn::log_softmax(cache.logits_steer);
            int ta = target_accel[size_t(i)];
            int ts = target_steer[size_t(i)];
            double verr = double(cache.value) - double(value_target[size_t(i)]);
            s.cea += -double(lsa[ta]);
            s.ces += -double(lss[ts]);
            s.mse += verr * verr;
            if (grad_out) {
                nn::Vec<T> da = lsa.array().exp().matrix();
                da[ta] -= T(1);
                nn::Vec<T> ds = lss.array().exp().matrix();
                ds[ts] -= T(1);
                da *= inv_n;
                ds *= inv_n;
                T dv = T(value_scale * 2.0 * verr / double(n));
                nn::backward_row(model, cache, da, ds, dv, s.grad);
            }
        }
    });
    BCLossOut out;
    for (int i = 0; i < used; ++i) {
        out.ce_accel += slots[size_t(i)].cea;
        out.ce_steer += slots[size_t(i)].ces;
        out.value_mse += slots[size_t(i)].mse;
        if (grad_out) {
            const auto& g = slots[size_t(i)].grad;
            for (size_t k = 0; k < g.size(); ++k) (*grad_out)[k] += g[k];
        }
    }
    out.ce_accel /= double(n);
    out.ce_steer /= double(n);
    out.value_mse /= double(n);
    out.loss = out.ce_accel + out.ce_steer + value_scale * out.value_mse;
    return out;
}

struct PPOConfig {
    double clip = 0.3;
    double value_scale = 1e-2;
    double entropy_coef = 3e-2;
    double gamma = 0.99;
    double rho_bar = 1.0;
    double c_bar = 1.0;
    bool normalize_advantages = true;
};

// Per-sequence V-trace outputs plus the normalized advantages used by the
// clipped surrogate; treated as constants by ppo_loss_and_grad.
struct VtraceBatch {
    std::vector<std::vector<double>> vs;
    std::vector<std::vector<double>> adv;  // normalized when configured
    int64_t live_steps = 0;
};

struct PPOLossOut {
    double loss = 0.0;
    double policy_term = 0.0;
    double value_term = 0.0;
    double entropy = 0.0;
    int64_t live_steps = 0;
};

// First pass: forward every live step, compute V-trace targets/advantages
// from the current values and the stored behavior log-probs, then normalize
// advantages across the whole batch.
template <class T>
VtraceBatch vtrace_batch(const nn::Model<T>& model, std::span<const TransitionSequence> seqs,
                         const PPOConfig& cfg, int threads) {
    VtraceBatch out;
    size_t ns = seqs.size();
    out.vs.resize(ns);
    out.adv.resize(ns);
    std::vector<std::vector<double>> logpi(ns);
    parallel_for(int64_t(ns), threads, [&](int64_t lo, int64_t hi) {
        nn::RowCache<T> cache;
        for (int64_t i = lo; i < hi; ++i) {
            const auto& seq = seqs[size_t(i)];
            int len = seq.length;
            std::vector<double> values(size_t(len), 0.0);
            std::vector<double> lp(size_t(len), 0.0);
            for (int k = 0; k < len; ++k) {
                if (!seq.mask[size_t(k)]) continue;
                nn::forward_row(model, seq.obs, k, cache);
                values[size_t(k)] = double(cache.value);
                nn::Vec<T> lsa = nn::log_softmax(cache.logits_accel);
                nn::Vec<T> lss = nn::log_softmax(cache.logits_steer);
                lp[size_t(k)] = double(lsa[seq.accel_idx[size_t(k)]]) + double(lss[seq.steer_idx[size_t(k)]]);
            }
            std::vector<double> log_rhos(size_t(len), 0.0);
            for (int k = 0; k < len; ++k) {
                if (seq.mask[size_t(k)]) log_rhos[size_t(k)] = lp[size_t(k)] - double(seq.logmu[size_t(k)]);
            }
            auto vt = vtrace(values, double(seq.bootstrap), seq.reward, seq.done, seq.mask, log_rhos,
                             cfg.gamma, cfg.rho_bar, cfg.c_bar);
            out.vs[size_t(i)] = std::move(vt.vs);
            out.adv[size_t(i)] = std::move(vt.advantages);
            logpi[size_t(i)] = std::move(lp);
        }
    });
    // batch advantage normalization over live steps
    double sum = 0.0, sum2 = 0.0;
    int64_t live = 0;
    for (size_t i = 0; i < ns; ++i) {
        for (int k = 0; k < seqs[i].length; ++k) {
            if (!seqs[i].mask[size_t(k)]) continue;
            double a = out.adv[i][size_t(k)];
            sum += a;
            sum2 += a * a;
            ++live;
        }
    }
    out.live_steps = live;
    if (cfg.normalize_advantages && live > 1) {
        double mean = sum / double(live);
        double var = std::max(0.0, sum2 / double(live) - mean * mean);
        double inv = 1.0 / (std::sqrt(var) + 1e-8);
        for (size_t i = 0; i < ns; ++i) {
            for (int k = 0; k < seqs[i].length; ++k) {
                if (seqs[i].mask[size_t(k)]) out.adv[i][size_t(k)] = (out.adv[i][size_t(k)] - mean) * inv;
            }
        }
    }
    return out;
}

// Clipped-surrogate PPO loss with V-trace value targets and an entropy
// bonus; vt (targets and advantages) is input data, not differentiated
// through. Masked steps contribute exactly zero.
template <class T>
PPOLossOut ppo_loss_and_grad(const nn::Model<T>& model, std::span<const TransitionSequence> seqs,
                             const VtraceBatch& vt, const PPOConfig& cfg, std::vector<T>* grad_out,
                             int threads) {
    if (grad_out) grad_out->assign(model.params.size(), T(0));
    int64_t live = 0;
    for (const auto& s : seqs) {
        for (int k = 0; k < s.length; ++k) live += s.mask[size_t(k)] ? 1 : 0;
    }
    PPOLossOut out;
    out.live_steps = live;
    if (live == 0) return out;

    struct Slot {
        std::vector<T> grad;
        double policy = 0, value = 0, entropy = 0;
    };
    std::vector<Slot> slots(size_t(std::max(1, threads)));
    double inv_n = 1.0 / double(live);
    int used = parallel_chunks(int64_t(seqs.size()), threads, [&](int slot, int64_t lo, int64_t hi) {
        Slot& s = slots[size_t(slot)];
        if (grad_out) s.grad.assign(model.params.size(), T(0));
        nn::RowCache<T> cache;
        for (int64_t i = lo; i < hi; ++i) {
            const auto& seq = seqs[size_t(i)];
            for (int k = 0; k < seq.length; ++k) {
                if (!seq.mask[size_t(k)]) continue;
                nn::forward_row(model, seq.obs, k, cache);
                nn::Vec<T> lsa = nn::log_softmax(cache.logits_accel);
                nn::Vec<T> lss = nn::log_softmax(cache.logits_steer);
                int ai = seq.accel_idx[size_t(k)], si = seq.steer_idx[size_t(k)];
                double lp = double(lsa[ai]) + double(lss[si]);
                double ratio = std::exp(lp - double(seq.logmu[size_t(k)]));
                double adv = vt.adv[size_t(i)][size_t(k)];
                double unclipped = ratio * adv;
                double clipped = std::clamp(ratio, 1.0 - cfg.clip, 1.0 + cfg.clip) * adv;
                s.policy += -std::min(unclipped, clipped);

                double verr = double(cache.value) - vt.vs[size_t(i)][size_t(k)];
                s.value += verr * verr;

                nn::Vec<T> pa = lsa.array().exp().matrix();
                nn::Vec<T> ps = lss.array().exp().matrix();
                double ha = 0.0, hs = 0.0;
                for (int j = 0; j < pa.size(); ++j) ha -= double(pa[j]) * double(lsa[j]);
                for (int j = 0; j < ps.size(); ++j) hs -= double(ps[j]) * double(lss[j]);
                s.entropy += ha + hs;

                if (!grad_out) continue;
                // policy gradient flows only when the min picks the
                // unclipped branch or the clip is inactive
                bool flow = unclipped <= clipped || (ratio >= 1.0 - cfg.clip && ratio <= 1.0 + cfg.clip);
                nn::Vec<T> da = nn::Vec<T>::Zero(pa.size());
                nn::Vec<T> ds = nn::Vec<T>::Zero(ps.size());
                if (flow) {
                    T coef = T(-adv * ratio * inv_n);
                    da = pa * -coef;
                    da[ai] += coef;
                    ds = ps * -coef;
                    ds[si] += coef;
                }
                // entropy bonus: d(-c_e * H)/dlogit_j = c_e/N * p_j (lp_j + H)
                T ce = T(cfg.entropy_coef * inv_n);
                for (int j = 0; j < pa.size(); ++j) da[j] += ce * pa[j] * (lsa[j] + T(ha));
                for (int j = 0; j < ps.size(); ++j) ds[j] += ce * ps[j] * (lss[j] + T(hs));
                T dv = T(cfg.value_scale * 2.0 * verr * inv_n);
                nn::backward_row(model, cache, da, ds, dv, s.grad);
            }
        }
    });
    for (int i = 0; i < used; ++i) {
        out.policy_term += slots[size_t(i)].policy;
        out.value_term += slots[size_t(i)].value;
        out.entropy += slots[size_t(i)].entropy;
        if (grad_out) {
            const auto& g = slots[size_t(i)].grad;
            for (size_t k = 0; k < g.size(); ++k) (*grad_out)[k] += g[k];
        }
    }
    out.policy_term *= inv_n;
    out.value_term *= inv_n;
    out.entropy *= inv_n;
    out.loss = out.policy_term + cfg.value_scale * out.value_term - cfg.entropy_coef * out.entropy;
    return out;
}

}  // namespace zsim::train
