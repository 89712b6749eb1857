#pragma once

#include <memory>

#include "core/nn/model.hpp"
#include "core/simcore.hpp"

namespace zsim::train {

// Immutable policy snapshot published by a learner; actors hold the
// shared_ptr for a whole episode so behavior log-probs stay consistent.
struct PolicySnapshot {
    uint64_t version = 0;
    nn::Model<float> model;
};

// Samples both heads independently (joint log-prob is the sum); argmax mode
// for deterministic evaluation.
class NNPolicy final : public sim::RolloutPolicy {
public:
    NNPolicy(std::shared_ptr<const PolicySnapshot> snapshot, bool use_argmax, int threads)
        : snapshot_(std::move(snapshot)), argmax_(use_argmax), threads_(threads) {}

    uint64_t version() const { return snapshot_->version; }

    void act(const sim::ObservationBatch& obs, const std::vector<int32_t>& step_index,
             std::vector<uint64_t>& rng, sim::PolicyOut& out) override {
        (void)step_index;
        out.resize(obs.batch);
        const nn::Model<float>& m = snapshot_->model;
        parallel_for(obs.batch, threads_, [&](int64_t lo, int64_t hi) {
            nn::RowCache<float> cache;
            for (int64_t b = lo; b < hi; ++b) {
                nn::forward_row(m, obs, int(b), cache);
                out.value[size_t(b)] = cache.value;
                if (argmax_) {
                    int ai = nn::argmax(cache.logits_accel);
                    int si = nn::argmax(cache.logits_steer);
                    out.accel_idx[size_t(b)] = ai;
                    out.steer_idx[size_t(b)] = si;
                    nn::Vec<float> lsa = nn::log_softmax(cache.logits_accel);
                    nn::Vec<float> lss = nn::log_softmax(cache.logits_steer);
                    out.logp[size_t(b)] = lsa[ai] + lss[si];
                } else {
                    Rng r;
                    r.state = rng[size_t(b)];
                    double lpa = 0, lps = 0;
                    out.accel_idx[size_t(b)] = nn::sample_categorical(cache.logits_accel, r, &lpa);
                    out.steer_idx[size_t(b)] = nn::sample_categorical(cache.logits_steer, r, &lps);
                    out.logp[size_t(b)] = float(lpa + lps);
                    rng[size_t(b)] = r.state;
                }
            }
        });
    }

private:
    std::shared_ptr<const PolicySnapshot> snapshot_;
    bool argmax_;
    int threads_;
};

}  // namespace zsim::train
