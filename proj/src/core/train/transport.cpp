#include "core/train/transport.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cstring>
#include <future>
#include <thread>

namespace zsim::train {

namespace {

template <class T>
void put(std::string& out, T v) {
    out.append(reinterpret_cast<const char*>(&v), sizeof(T));
}

struct Cursor {
    const uint8_t* p;
    const uint8_t* end;

    void need(size_t n) const {
        if (size_t(end - p) < n) fail(ErrorKind::io, "transport: truncated payload");
    }
    template <class T>
    T get() {
        need(sizeof(T));
        T v;
        std::memcpy(&v, p, sizeof(T));
        p += sizeof(T);
        return v;
    }
    std::string get_bytes(size_t n) {
        need(n);
        std::string s(reinterpret_cast<const char*>(p), n);
        p += n;
        return s;
    }
};

}  // namespace

std::string encode_frame(const Frame& f) {
    std::string out;
    put<uint32_t>(out, uint32_t(f.payload.size() + 1));
    put<uint8_t>(out, uint8_t(f.type));
    out += f.payload;
    return out;
}

void FrameDecoder::feed(const void* data, size_t n) {
    buf_.append(static_cast<const char*>(data), n);
}

bool FrameDecoder::pop(Frame& out) {
    if (buf_.size() < 4) return false;
    uint32_t len = 0;
    std::memcpy(&len, buf_.data(), 4);
    if (len < 1) fail(ErrorKind::io, "transport: empty frame body");
    if (buf_.size() < 4 + size_t(len)) return false;
    out.type = FrameType(uint8_t(buf_[4]));
    out.payload.assign(buf_.data() + 5, size_t(len) - 1);
    buf_.erase(0, 4 + size_t(len));
    return true;
}

std::string encode_floats(const std::vector<float>& v) {
    std::string out;
    put<uint64_t>(out, uint64_t(v.size()));
    out.append(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(float));
    return out;
}

std::vector<float> decode_floats(const std::string& payload) {
    Cursor c{reinterpret_cast<const uint8_t*>(payload.data()),
             reinterpret_cast<const uint8_t*>(payload.data()) + payload.size()};
    uint64_t n = c.get<uint64_t>();
    c.need(n * sizeof(float));
    std::vector<float> v(n);
    std::memcpy(v.data(), c.p, n * sizeof(float));
    return v;
}

namespace {

void put_f32s(std::string& out, const std::vector<float>& v) {
    put<uint32_t>(out, uint32_t(v.size()));
    out.append(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(float));
}
void put_i32s(std::string& out, const std::vector<int32_t>& v) {
    put<uint32_t>(out, uint32_t(v.size()));
    out.append(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(int32_t));
}
void put_u8s(std::string& out, const std::vector<uint8_t>& v) {
    put<uint32_t>(out, uint32_t(v.size()));
    out.append(reinterpret_cast<const char*>(v.data()), v.size());
}
std::vector<float> get_f32s(Cursor& c) {
    uint32_t n = c.get<uint32_t>();
    c.need(size_t(n) * sizeof(float));
    std::vector<float> v(n);
    std::memcpy(v.data(), c.p, size_t(n) * sizeof(float));
    c.p += size_t(n) * sizeof(float);
    return v;
}
std::vector<int32_t> get_i32s(Cursor& c) {
    uint32_t n = c.get<uint32_t>();
    c.need(size_t(n) * sizeof(int32_t));
    std::vector<int32_t> v(n);
    std::memcpy(v.data(), c.p, size_t(n) * sizeof(int32_t));
    c.p += size_t(n) * sizeof(int32_t);
    return v;
}
std::vector<uint8_t> get_u8s(Cursor& c) {
    uint32_t n = c.get<uint32_t>();
    c.need(n);
    std::vector<uint8_t> v(c.p, c.p + n);
    c.p += n;
    return v;
}

}  // namespace

std::string encode_sequence(const TransitionSequence& seq) {
    std::string out;
    put<int32_t>(out, seq.length);
    put<int32_t>(out, seq.obs.spec.n_agents);
    put<int32_t>(out, seq.obs.spec.n_road);
    put<int32_t>(out, seq.obs.spec.n_route);
    put<float>(out, seq.bootstrap);
    put<uint64_t>(out, seq.policy_version);
    put<uint32_t>(out, uint32_t(seq.scenario_id.size()));
    out += seq.scenario_id;
    put_f32s(out, seq.obs.active);
    put_f32s(out, seq.obs.agents);
    put_f32s(out, seq.obs.road);
    put_f32s(out, seq.obs.route);
    put_f32s(out, seq.obs.value_only);
    put_i32s(out, seq.accel_idx);
    put_i32s(out, seq.steer_idx);
    put_f32s(out, seq.logmu);
    put_f32s(out, seq.reward);
    put_u8s(out, seq.done);
    put_u8s(out, seq.mask);
    return out;
}

TransitionSequence decode_sequence(const std::string& payload) {
    Cursor c{reinterpret_cast<const uint8_t*>(payload.data()),
             reinterpret_cast<const uint8_t*>(payload.data()) + payload.size()};
    TransitionSequence seq;
    seq.length = c.get<int32_t>();
    sim::ObsSpec spec;
    spec.n_agents = c.get<int32_t>();
    spec.n_road = c.get<int32_t>();
    spec.n_route = c.get<int32_t>();
    seq.bootstrap = c.get<float>();
    seq.policy_version = c.get<uint64_t>();
    uint32_t idn = c.get<uint32_t>();
    seq.scenario_id = c.get_bytes(idn);
    seq.obs.resize(spec, seq.length);
    seq.obs.active = get_f32s(c);
    seq.obs.agents = get_f32s(c);
    seq.obs.road = get_f32s(c);
    seq.obs.route = get_f32s(c);
    seq.obs.value_only = get_f32s(c);
    seq.accel_idx = get_i32s(c);
    seq.steer_idx = get_i32s(c);
    seq.logmu = get_f32s(c);
    seq.reward = get_f32s(c);
    seq.done = get_u8s(c);
    seq.mask = get_u8s(c);
    if (c.p != c.end) fail(ErrorKind::io, "transport: trailing bytes in sequence");
    return seq;
}

// --- TcpChannel ---------------------------------------------------------------

TcpChannel TcpChannel::listen_one(uint16_t& port_inout) {
    int srv = ::socket(AF_INET, SOCK_STREAM, 0);
    if (srv < 0) fail(ErrorKind::io, "socket() failed");
    int one = 1;
    ::setsockopt(srv, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = htons(port_inout);
    if (::bind(srv, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
        ::close(srv);
        fail(ErrorKind::io, "bind() failed");
    }
    socklen_t alen = sizeof(addr);
    ::getsockname(srv, reinterpret_cast<sockaddr*>(&addr), &alen);
    port_inout = ntohs(addr.sin_port);
    if (::listen(srv, 1) != 0) {
        ::close(srv);
        fail(ErrorKind::io, "listen() failed");
    }
    int fd = ::accept(srv, nullptr, nullptr);
    ::close(srv);
    if (fd < 0) fail(ErrorKind::io, "accept() failed");
    one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
    return TcpChannel(fd);
}

TcpChannel TcpChannel::connect(uint16_t port) {
    int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) fail(ErrorKind::io, "socket() failed");
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = htons(port);
    if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
        ::close(fd);
        fail(ErrorKind::io, "connect() failed");
    }
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
    return TcpChannel(fd);
}

TcpChannel::TcpChannel(TcpChannel&& o) noexcept : fd_(o.fd_), decoder_(std::move(o.decoder_)) {
    o.fd_ = -1;
}

TcpChannel& TcpChannel::operator=(TcpChannel&& o) noexcept {
    if (this != &o) {
        if (fd_ >= 0) ::close(fd_);
        fd_ = o.fd_;
        decoder_ = std::move(o.decoder_);
        o.fd_ = -1;
    }
    return *this;
}

TcpChannel::~TcpChannel() {
    if (fd_ >= 0) ::close(fd_);
}

void TcpChannel::send(const Frame& f) {
    std::string wire = encode_frame(f);
    size_t off = 0;
    while (off < wire.size()) {
        ssize_t n = ::send(fd_, wire.data() + off, wire.size() - off, MSG_NOSIGNAL);
        if (n <= 0) throw DisconnectError("transport: peer closed during send");
        off += size_t(n);
    }
}

Frame TcpChannel::recv() {
    Frame f;
    char buf[65536];
    while (!decoder_.pop(f)) {
        ssize_t n = ::recv(fd_, buf, sizeof(buf), 0);
        if (n <= 0) throw DisconnectError("transport: peer closed during recv");
        decoder_.feed(buf, size_t(n));
    }
    return f;
}

// --- InprocReducer --------------------------------------------------------------

InprocReducer::InprocReducer(int workers) : workers_(workers) {
    slots_.assign(size_t(workers), nullptr);
}

void InprocReducer::allreduce_mean(int worker, std::vector<float>& grad) {
    std::unique_lock<std::mutex> l(mu_);
    uint64_t my_round = round_;
    slots_[size_t(worker)] = &grad;
    if (++arrived_ == workers_) {
        for (int w = 1; w < workers_; ++w) {
            if (slots_[size_t(w)]->size() != slots_[0]->size()) {
                fail(ErrorKind::invalid_argument, "allreduce: gradient shape mismatch");
            }
        }
        size_t n = slots_[0]->size();
        mean_.assign(n, 0.f);
        for (size_t k = 0; k < n; ++k) {
            double acc = 0.0;
            for (int w = 0; w < workers_; ++w) acc += double((*slots_[size_t(w)])[k]);
            mean_[k] = float(acc / double(workers_));
        }
        arrived_ = 0;
        ++round_;
        cv_.notify_all();
    } else {
        cv_.wait(l, [&] { return round_ != my_round; });
    }
    grad = mean_;
}

// --- SocketReducer --------------------------------------------------------------

std::unique_ptr<SocketReducer> SocketReducer::create(int workers) {
    auto r = std::unique_ptr<SocketReducer>(new SocketReducer());
    r->workers_ = workers;
    for (int w = 1; w < workers; ++w) {
        std::promise<TcpChannel> accepted;
        std::promise<uint16_t> port_ready;
        std::thread acceptor([&] {
            int srv = ::socket(AF_INET, SOCK_STREAM, 0);
            sockaddr_in addr{};
            addr.sin_family = AF_INET;
            addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
            addr.sin_port = 0;
            ::bind(srv, reinterpret_cast<sockaddr*>(&addr), sizeof(addr));
            socklen_t alen = sizeof(addr);
            ::getsockname(srv, reinterpret_cast<sockaddr*>(&addr), &alen);
            ::listen(srv, 1);
            port_ready.set_value(ntohs(addr.sin_port));
            int fd = ::accept(srv, nullptr, nullptr);
            ::close(srv);
            int one = 1;
            ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
            accepted.set_value(TcpChannel(fd));
        });
        uint16_t chosen = port_ready.get_future().get();
        r->leaf_side_.push_back(TcpChannel::connect(chosen));
        r->hub_side_.push_back(accepted.get_future().get());
        acceptor.join();
    }
    return r;
}

SocketReducer::~SocketReducer() = default;

void SocketReducer::allreduce_mean(int worker, std::vector<float>& grad) {
    if (worker == 0) {
        size_t n = grad.size();
        std::vector<double> acc(n);
        for (size_t k = 0; k < n; ++k) acc[k] = double(grad[k]);
        for (int w = 1; w < workers_; ++w) {
            Frame f = hub_side_[size_t(w - 1)].recv();
            if (f.type != FrameType::grad) fail(ErrorKind::io, "allreduce: unexpected frame type");
            std::vector<float> g = decode_floats(f.payload);
            if (g.size() != n) fail(ErrorKind::invalid_argument, "allreduce: gradient shape mismatch");
            for (size_t k = 0; k < n; ++k) acc[k] += double(g[k]);
        }
        for (size_t k = 0; k < n; ++k) grad[k] = float(acc[k] / double(workers_));
        Frame out{FrameType::grad, encode_floats(grad)};
        for (auto& ch : hub_side_) ch.send(out);
    } else {
        leaf_side_[size_t(worker - 1)].send({FrameType::grad, encode_floats(grad)});
        Frame f = leaf_side_[size_t(worker - 1)].recv();
        grad = decode_floats(f.payload);
    }
}

}  // namespace zsim::train
