#pragma once

#include <deque>
#include <mutex>
#include <string>
#include <vector>

#include "core/common.hpp"
#include "core/simcore.hpp"

namespace zsim::train {

// Fixed-length slice of one scenario's episode. Observation rows double as
// the step axis (row k = step k). Padded steps carry mask 0.
struct TransitionSequence {
    int length = 0;
    sim::ObservationBatch obs;
    std::vector<int32_t> accel_idx, steer_idx;
    std::vector<float> logmu;
    std::vector<float> reward;
    std::vector<uint8_t> done;
    std::vector<uint8_t> mask;
    float bootstrap = 0.f;  // 0 when the sequence ends terminated
    uint64_t policy_version = 0;
    std::string scenario_id;
};

// Cuts every episode row into contiguous length-`seq_len` slices. Fully
// masked slices are dropped; sequences never mix scenarios.
std::vector<TransitionSequence> cut_sequences(const sim::EpisodeBatch& ep, int seq_len);

// Bounded FIFO with sampling without replacement per call. Single
// writer-group / single reader with internal locking.
class ReplayTable {
public:
    explicit ReplayTable(size_t capacity) : capacity_(capacity) {}

    void push(TransitionSequence seq);
    size_t size() const;

    // min(n, size()) distinct sequences; copies, the table keeps its entries
    // until evicted by capacity.
    std::vector<TransitionSequence> sample(size_t n, Rng& rng) const;

private:
    size_t capacity_;
    mutable std::mutex mu_;
    std::deque<TransitionSequence> items_;
};

}  // namespace zsim::train
