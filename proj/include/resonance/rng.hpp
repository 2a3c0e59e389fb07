#pragma once

#include <cstdint>

namespace resonance {

// SplitMix64 finalizer. Bijective on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

// Stream identifiers so independent consumers of the same seed never
// share a counter sequence.
enum class Stream : std::uint64_t {
    BackgroundEvents = 1,
    SignalEvents = 2,
    Shuffle = 3,
    FoldAssign = 4,
    NetInit = 5,
    BatchShuffle = 6,
    ValSplit = 7,
    KmeansInit = 8,
    McReplica = 9,
    SubsampleFit = 10,
    RankJitter = 11,
    TestData = 100,
};

// Counter-based generator: the i-th output is a pure function of
// (seed, stream, i), so per-event substreams can be drawn in any order
// or in parallel and still reproduce the sequential result.
class StreamRng {
  public:
    StreamRng(std::uint64_t seed, std::uint64_t stream)
        : state_(mix64(seed ^ mix64(stream ^ 0xD1B54A32D192ED03ull))) {}
    StreamRng(std::uint64_t seed, Stream tag, std::uint64_t index = 0)
        : StreamRng(seed, (static_cast<std::uint64_t>(tag) << 48) ^ index) {}

    std::uint64_t next_u64() { return mix64(state_ + 0x9E3779B97F4A7C15ull * ctr_++); }

    // Uniform on the open interval (0,1); never returns an endpoint, so it
    // is safe to feed through an inverse CDF.
    double next_unit() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1p-53;
    }

    // Standard normal via the inverse CDF (one draw per variate, which keeps
    // counter consumption fixed and the stream parallel-safe).
    double next_normal();

    // Integer in [0, n).
    std::uint64_t next_below(std::uint64_t n);

  private:
    std::uint64_t state_;
    std::uint64_t ctr_ = 0;
};

// Deterministic in-place Fisher-Yates permutation (std::shuffle is
// implementation-defined and would break byte-identical reproducibility).
template <typename Vec>
void deterministic_shuffle(Vec& v, StreamRng& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        std::size_t j = static_cast<std::size_t>(rng.next_below(i));
        using std::swap;
        swap(v[i - 1], v[j]);
    }
}

}  // namespace resonance
