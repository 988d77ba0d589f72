#pragma once

#include <cmath>
#include <cstdint>

namespace phantomqa {

// Counter-based generator (SplitMix64). The n-th draw is a pure function of
// (seed, n): out(n) = mix64(seed + n * GAMMA). Streams can therefore be
// replayed from any position and split into independent substreams without
// sharing state, which is what makes per-slice / per-sample substreams
// bitwise reproducible regardless of evaluation order.
class RngState {
 public:
  explicit RngState(std::uint64_t seed = 0, std::uint64_t pos = 0)
      : seed_(seed), pos_(pos) {}

  static std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  std::uint64_t next_u64() {
    pos_ += 1;
    return mix64(seed_ + pos_ * kGamma);
  }

  // Uniform in [0, 1), 53-bit resolution.
  double next_uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double next_uniform(double lo, double hi) {
    return lo + (hi - lo) * next_uniform();
  }

  // Uniform in (0, 1]; safe as a log() argument.
  double next_uniform_open() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller. Always consumes exactly two draws and
  // uses only the cosine branch, so the call sequence stays predictable.
  double next_normal() {
    const double u1 = next_uniform_open();
    const double u2 = next_uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

  // Integer in [0, n) by 128-bit multiply-shift.
  std::uint64_t next_below(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  bool next_bool(double p) { return next_uniform() < p; }

  // Independent stream keyed by (this stream's seed, stream_id). Chaining
  // substream(a).substream(b) yields a stream distinct from substream(b).
  RngState substream(std::uint64_t stream_id) const {
    return RngState(mix64(seed_ ^ mix64(stream_id ^ 0x6C62272E07BB0142ull)));
  }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t pos() const { return pos_; }

 private:
  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ull;
  std::uint64_t seed_;
  std::uint64_t pos_;
};

}  // namespace phantomqa
