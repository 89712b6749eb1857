#pragma once

#include <future>
#include <memory>
#include <optional>

#include "core/scenario.hpp"

namespace zsim::scenario {

// Streams the dataset as batches of `batch_size` in file order; the final
// batch may be short. With prefetch enabled, batch k+1 is decoded on a
// staging thread while the consumer works on batch k, so next() only blocks
// on decode for batch 0. Delivered batches are identical either way.
class BatchStream {
public:
    BatchStream(std::shared_ptr<const Dataset> dataset, int batch_size, int horizon, bool prefetch = true);
    ~BatchStream();

    BatchStream(const BatchStream&) = delete;
    BatchStream& operator=(const BatchStream&) = delete;

    // nullopt once the dataset is exhausted. Decode errors surface on the
    // batch where they occur.
    std::optional<ScenarioBatch> next();

    int64_t num_batches() const;

private:
    ScenarioBatch load(int64_t batch_index) const;

    std::shared_ptr<const Dataset> dataset_;
    int batch_size_;
    int horizon_;
    bool prefetch_;
    int64_t cursor_ = 0;  // next batch index to hand out
    std::future<ScenarioBatch> staged_;
};

}  // namespace zsim::scenario
