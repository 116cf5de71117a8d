#pragma once

#include <cstdint>
#include <cmath>

namespace martint {

// Counter-based splittable RNG. Every stream is keyed by a hash of
// (seed, a, b) and the i-th draw is a pure function of (key, i), so streams
// are independent of generation order and cheap to fork per site / replica.

inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

inline std::uint64_t stream_key(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
    return mix64(mix64(mix64(seed) ^ a) ^ b);
}

class CounterRng {
public:
    explicit CounterRng(std::uint64_t key) : key_(key) {}
    CounterRng(std::uint64_t seed, std::uint64_t a, std::uint64_t b)
        : key_(stream_key(seed, a, b)) {}

    std::uint64_t next_u64() {
        std::uint64_t z = key_ + (++ctr_) * 0x9e3779b97f4a7c15ull;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // uniform in the open interval (0,1); never returns 0 or 1
    double u01() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53 + 0x1.0p-54;
    }

    double exponential(double rate) { return -std::log1p(-u01()) / rate; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * u01(); }

    std::uint64_t counter() const { return ctr_; }

private:
    std::uint64_t key_;
    std::uint64_t ctr_ = 0;
};

} // namespace martint
