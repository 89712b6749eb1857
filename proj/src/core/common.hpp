#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace zsim {

enum class ErrorKind { invalid_argument, config, io, runtime };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
    ErrorKind kind() const { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& msg) { throw Error(kind, msg); }

// Counter-free splitmix64 generator. Used everywhere instead of <random>
// distributions so that streams are reproducible across compilers.
struct Rng {
    uint64_t state = 0x9e3779b97f4a7c15ull;

    explicit Rng(uint64_t seed = 0) : state(seed + 0x9e3779b97f4a7c15ull) {}

    uint64_t next_u64() {
        uint64_t z = (state += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // uniform in [0, 1)
    double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    // uniform integer in [0, n)
    uint64_t uniform_int(uint64_t n) { return n == 0 ? 0 : next_u64() % n; }

    // Independent child stream; `tag` decorrelates siblings from the same parent.
    Rng split(uint64_t tag) {
        uint64_t mixed = next_u64() ^ (tag * 0xd1342543de82ef95ull + 0x2545f4914f6cdd1dull);
        return Rng(mixed);
    }
};

inline double wrap_angle(double a) {
    constexpr double two_pi = 6.283185307179586476925286766559;
    a = std::fmod(a, two_pi);
    if (a <= -3.14159265358979323846) a += two_pi;
    if (a > 3.14159265358979323846) a -= two_pi;
    return a;
}

// FNV-1a, used for config hashes and checkpoint headers.
inline uint64_t fnv1a(const void* data, size_t n, uint64_t h = 0xcbf29ce484222325ull) {
    const auto* p = static_cast<const uint8_t*>(data);
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}
inline uint64_t fnv1a(const std::string& s) { return fnv1a(s.data(), s.size()); }

// Runs fn(i) for i in [0, n) on up to `threads` workers. Work is split into
// contiguous chunks so per-chunk results can be reduced in a fixed order by
// the caller; per-index outputs are bit-identical for any thread count.
void parallel_for(int64_t n, int threads, const std::function<void(int64_t, int64_t)>& fn);

// Like parallel_for but hands each worker its slot index so callers can keep
// per-worker accumulators and reduce them in slot order. Returns the number
// of slots used.
int parallel_chunks(int64_t n, int threads, const std::function<void(int, int64_t, int64_t)>& fn);

inline int hardware_threads() {
    unsigned n = std::thread::hardware_concurrency();
    return n == 0 ? 1 : int(n);
}

}  // namespace zsim
