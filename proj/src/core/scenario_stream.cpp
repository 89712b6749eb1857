#include "core/scenario_stream.hpp"

#include "core/common.hpp"

namespace zsim::scenario {

BatchStream::BatchStream(std::shared_ptr<const Dataset> dataset, int batch_size, int horizon, bool prefetch)
    : dataset_(std::move(dataset)), batch_size_(batch_size), horizon_(horizon), prefetch_(prefetch) {
    if (batch_size_ <= 0) fail(ErrorKind::invalid_argument, "batch_size must be > 0");
    if (dataset_->size() == 0) fail(ErrorKind::invalid_argument, "batch_iterator: dataset is empty");
}

BatchStream::~BatchStream() {
    if (staged_.valid()) {
        try {
            staged_.get();
        } catch (...) {
        }
    }
}

int64_t BatchStream::num_batches() const {
    return (dataset_->size() + batch_size_ - 1) / batch_size_;
}

ScenarioBatch BatchStream::load(int64_t batch_index) const {
    int64_t begin = batch_index * batch_size_;
    int64_t end = std::min(begin + batch_size_, dataset_->size());
    std::vector<int64_t> indices;
    indices.reserve(size_t(end - begin));
    for (int64_t i = begin; i < end; ++i) indices.push_back(i);
    return load_batch(*dataset_, indices, horizon_);
}

std::optional<ScenarioBatch> BatchStream::next() {
    if (cursor_ >= num_batches()) return std::nullopt;
    ScenarioBatch batch = [&] {
        if (staged_.valid()) return staged_.get();
        return load(cursor_);
    }();
    ++cursor_;
    if (prefetch_ && cursor_ < num_batches()) {
        staged_ = std::async(std::launch::async, [this, idx = cursor_] { return load(idx); });
    }
    return batch;
}

}  // namespace zsim::scenario
