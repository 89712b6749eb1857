#pragma once

#include <condition_variable>
#include <cstdint>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "core/train/replay.hpp"

namespace zsim::train {

// Wire framing shared by every transport: u32 little-endian length of the
// body, then body = u8 message type + payload.
enum class FrameType : uint8_t { grad = 1, params = 2, seq = 3 };

struct Frame {
    FrameType type = FrameType::grad;
    std::string payload;
};

std::string encode_frame(const Frame& f);

// Incremental decoder: feed bytes, pop complete frames.
class FrameDecoder {
public:
    void feed(const void* data, size_t n);
    bool pop(Frame& out);

private:
    std::string buf_;
};

std::string encode_floats(const std::vector<float>& v);
std::vector<float> decode_floats(const std::string& payload);

std::string encode_sequence(const TransitionSequence& seq);
TransitionSequence decode_sequence(const std::string& payload);

// Blocking loopback TCP channel carrying frames.
class TcpChannel {
public:
    static TcpChannel listen_one(uint16_t& port_inout);  // binds 127.0.0.1, accepts one peer
    static TcpChannel connect(uint16_t port);
    TcpChannel(TcpChannel&&) noexcept;
    TcpChannel& operator=(TcpChannel&&) noexcept;
    ~TcpChannel();

    void send(const Frame& f);
    Frame recv();  // throws on peer close

private:
    explicit TcpChannel(int fd) : fd_(fd) {}
    int fd_ = -1;
    FrameDecoder decoder_;
};

// Elementwise arithmetic mean across workers, identical bits delivered to
// every worker. Reduction order is fixed (worker 0, 1, ...) so the result
// matches a serial mean exactly.
class AllReducer {
public:
    virtual ~AllReducer() = default;
    virtual void allreduce_mean(int worker, std::vector<float>& grad) = 0;
};

// Shared-memory barrier variant for in-process workers.
class InprocReducer final : public AllReducer {
public:
    explicit InprocReducer(int workers);
    void allreduce_mean(int worker, std::vector<float>& grad) override;

private:
    int workers_;
    std::mutex mu_;
    std::condition_variable cv_;
    int arrived_ = 0;
    int departed_ = 0;
    uint64_t round_ = 0;
    std::vector<std::vector<float>*> slots_;
    std::vector<float> mean_;
};

// Star topology over loopback sockets: worker 0 gathers GRAD frames (worker
// id prefixed), sums in id order, divides, broadcasts the result.
class SocketReducer final : public AllReducer {
public:
    static std::unique_ptr<SocketReducer> create(int workers);  // call once; thread-safe per worker after
    void allreduce_mean(int worker, std::vector<float>& grad) override;
    ~SocketReducer() override;

private:
    SocketReducer() = default;
    int workers_ = 0;
    std::vector<TcpChannel> hub_side_;   // index: worker-1, owned by worker 0
    std::vector<TcpChannel> leaf_side_;  // index: worker-1, used by that worker
};

// Straggler guard used by trainers around blocking reduce calls.
struct DisconnectError : Error {
    explicit DisconnectError(const std::string& msg) : Error(ErrorKind::runtime, msg) {}
};

}  // namespace zsim::train
