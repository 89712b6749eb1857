#include "core/train/replay.hpp"

#include <algorithm>
#include <numeric>

namespace zsim::train {

std::vector<TransitionSequence> cut_sequences(const sim::EpisodeBatch& ep, int seq_len) {
    if (seq_len <= 0) fail(ErrorKind::invalid_argument, "cut_sequences: seq_len must be > 0");
    std::vector<TransitionSequence> out;
    for (int b = 0; b < ep.batch; ++b) {
        for (int t0 = 0; t0 < ep.horizon; t0 += seq_len) {
            if (!ep.mask[ep.at(b, t0)]) break;  // first done already passed
            TransitionSequence seq;
            seq.length = seq_len;
            seq.scenario_id = ep.scenario_ids[size_t(b)];
            seq.policy_version = ep.policy_version;
            seq.obs.resize(ep.obs[size_t(t0)].spec, seq_len);
            seq.accel_idx.assign(size_t(seq_len), 0);
            seq.steer_idx.assign(size_t(seq_len), 0);
            seq.logmu.assign(size_t(seq_len), 0.f);
            seq.reward.assign(size_t(seq_len), 0.f);
            seq.done.assign(size_t(seq_len), 0);
            seq.mask.assign(size_t(seq_len), 0);
            bool terminated = false;
            for (int k = 0; k < seq_len; ++k) {
                int t = t0 + k;
                if (t >= ep.horizon) break;
                size_t src = ep.at(b, t);
                if (!ep.mask[src]) break;
                seq.obs.copy_row(ep.obs[size_t(t)], b, k);
                seq.accel_idx[size_t(k)] = ep.accel_idx[src];
                seq.steer_idx[size_t(k)] = ep.steer_idx[src];
                seq.logmu[size_t(k)] = ep.logp[src];
                seq.reward[size_t(k)] = ep.reward[src];
                seq.done[size_t(k)] = ep.done[src];
                seq.mask[size_t(k)] = 1;
                if (ep.done[src]) terminated = true;
            }
            int next = t0 + seq_len;
            if (terminated) {
                seq.bootstrap = 0.f;
            } else if (next < ep.horizon && ep.mask[ep.at(b, next)]) {
                seq.bootstrap = ep.value[ep.at(b, next)];  // behavior value at the next state
            } else {
                seq.bootstrap = ep.bootstrap[size_t(b)];
            }
            out.push_back(std::move(seq));
        }
    }
    return out;
}

void ReplayTable::push(TransitionSequence seq) {
    std::lock_guard<std::mutex> g(mu_);
    items_.push_back(std::move(seq));
    while (items_.size() > capacity_) items_.pop_front();
}

size_t ReplayTable::size() const {
    std::lock_guard<std::mutex> g(mu_);
    return items_.size();
}

std::vector<TransitionSequence> ReplayTable::sample(size_t n, Rng& rng) const {
    std::lock_guard<std::mutex> g(mu_);
    size_t take = std::min(n, items_.size());
    std::vector<size_t> order(items_.size());
    std::iota(order.begin(), order.end(), size_t(0));
    // partial Fisher-Yates: the first `take` entries are a uniform sample
    // without replacement
    for (size_t i = 0; i < take; ++i) {
        size_t j = i + size_t(rng.uniform_int(uint64_t(order.size() - i)));
        std::swap(order[i], order[j]);
    }
    std::vector<TransitionSequence> out;
    out.reserve(take);
    for (size_t i = 0; i < take; ++i) out.push_back(items_[order[i]]);
    return out;
}

}  // namespace zsim::train
