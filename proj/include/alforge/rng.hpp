#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace alforge {

/// Philox4x32-10 block function. Exposed for known-answer testing.
std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> counter,
                                           std::array<std::uint32_t, 2> key);

/// Counter-based random stream addressed by (seed, stream id).
///
/// The seed is the Philox key and the stream id occupies the upper half of
/// the 128-bit counter, so every (seed, stream id) pair names an independent
/// sequence that is identical on every platform. A stream is single-owner;
/// hand out `substream()`s instead of sharing one across threads.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

  std::uint32_t next_u32();
  std::uint64_t next_u64();

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform();
  /// Standard normal draw (Box-Muller, both halves used).
  double normal();
  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n);

  /// Deterministic child stream; same tag always yields the same child.
  RngStream substream(std::uint64_t tag) const;
  RngStream substream(std::uint64_t tag_a, std::uint64_t tag_b) const;

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::uint64_t block_ = 0;
  std::array<std::uint32_t, 4> buffer_{};
  int buffered_ = 0;
  bool has_spare_normal_ = false;
  double spare_normal_ = 0.0;
};

/// SplitMix64 finalizer, used to mix stream tags.
std::uint64_t mix64(std::uint64_t x);

std::vector<double> rng_uniform(RngStream& stream, std::size_t n);
std::vector<double> rng_normal(RngStream& stream, std::size_t n);
/// Fisher-Yates shuffle in place.
void rng_shuffle(RngStream& stream, std::span<std::size_t> values);

}  // namespace alforge
