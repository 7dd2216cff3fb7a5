#pragma once

#include <cstdint>

namespace descent {

/// Counter-based pseudo-random stream (splitmix64). A stream is a pure
/// function of (seed, stream_index), so independent draws can run under any
/// parallel schedule and still reproduce bit-for-bit.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t state) : state_(state) {}

  /// Stream derived from a master seed and a stream counter (e.g. a trial
  /// index). Distinct counters give statistically independent streams.
  static SplitMix64 stream(std::uint64_t seed, std::uint64_t stream_index) {
    const std::uint64_t golden = 0x9E3779B97F4A7C15ULL;
    std::uint64_t s = mix(seed) ^ mix(golden * (stream_index + 1));
    return SplitMix64(s);
  }

  /// Sub-stream for a tagged purpose (keeps point/pair/shell draws of one
  /// operation independent of each other under a single user seed).
  static SplitMix64 substream(std::uint64_t seed, std::uint64_t tag,
                              std::uint64_t stream_index) {
    return stream(mix(seed + 0x632BE59BD9B4E019ULL * tag), stream_index);
  }

  std::uint64_t next() {
    state_ += 0x9E3779B97F4A7C15ULL;
    return mix(state_);
  }

  /// Uniform double in the open interval (0, 1).
  double next_double_open() {
    return (static_cast<double>(next() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Uniform double in [0, 1).
  double next_double() {
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
  }

  /// Uniform integer in [0, bound). bound must be nonzero.
  std::uint64_t next_below(std::uint64_t bound) { return next() % bound; }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::uint64_t state_;
};

}  // namespace descent
