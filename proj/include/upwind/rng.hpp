#pragma once

#include <cstdint>

namespace upwind {

/// Counter-based generator: the n-th draw of stream s under seed k is a pure
/// function of (k, s, n). Particle i owns stream i, so its path does not
/// depend on how many other particles exist or which thread runs it.
class CounterRng {
public:
    CounterRng(std::uint64_t seed, std::uint64_t stream)
        : key_(mix(seed + 0x9E3779B97F4A7C15ULL * (stream + 1))) {}

    void seek(std::uint64_t counter) { counter_ = counter; }
    std::uint64_t counter() const { return counter_; }

    std::uint64_t next() {
        const std::uint64_t x = key_ ^ (0xD1B54A32D192ED03ULL * (counter_++ + 1));
        return mix(mix(x) + key_);
    }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

private:
    // SplitMix64 finalizer.
    static std::uint64_t mix(std::uint64_t z) {
        z += 0x9E3779B97F4A7C15ULL;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

}  // namespace upwind
