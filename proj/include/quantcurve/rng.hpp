#pragma once

#include <cstdint>

#include "normal.hpp"

namespace quantcurve {

// Counter-based generator.  The k-th output of a stream with key `key` is
//
//   mix(key + (k+1) * 0x9E3779B97F4A7C15)
//
// where mix is the SplitMix64 finalizer.  Streams are derived from a
// (seed, stream) pair by key = mix(mix(seed) ^ stream), so replication r of
// cell c can draw from stream (c << 20) + r with no shared state and no
// cross-stream correlation.  Random access by counter makes any evaluation
// order reproduce the same draws.
class CounterRng {
public:
    static std::uint64_t mix(std::uint64_t z) {
        z ^= z >> 30;
        z *= 0xBF58476D1CE4E5B9ULL;
        z ^= z >> 27;
        z *= 0x94D049BB133111EBULL;
        z ^= z >> 31;
        return z;
    }

    static std::uint64_t stream_key(std::uint64_t seed, std::uint64_t stream) {
        return mix(mix(seed) ^ stream);
    }

    CounterRng(std::uint64_t seed, std::uint64_t stream)
        : key_(stream_key(seed, stream)) {}

    std::uint64_t next_u64() {
        ++counter_;
        return mix(key_ + counter_ * 0x9E3779B97F4A7C15ULL);
    }

    std::uint64_t at(std::uint64_t counter) const {
        return mix(key_ + (counter + 1) * 0x9E3779B97F4A7C15ULL);
    }

    // Uniform on the open interval (0,1); never returns an endpoint.
    double uniform() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Standard normal by inverse transform; deterministic per counter.
    double normal() { return normal_quantile(uniform()); }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

}  // namespace quantcurve
