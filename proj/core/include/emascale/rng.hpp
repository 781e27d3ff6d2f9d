#pragma once

#include <array>
#include <cstdint>

namespace emascale {

/// Counter-based random stream. Every draw is a pure function of
/// (seed, stream_id, draw_index): Philox4x32-10 keyed by the seed with the
/// counter built from the stream id and the draw index. Streams with
/// different ids never share counters.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id) noexcept
      : seed_(seed), stream_id_(stream_id) {}

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream_id() const noexcept { return stream_id_; }
  /// Number of Philox blocks consumed so far.
  std::uint64_t draw_index() const noexcept { return draw_index_; }

  /// Uniform on the open interval (0, 1), 53 bits of resolution.
  double uniform() noexcept;
  /// Standard normal (Box-Muller; the second variate of each pair is cached).
  double normal() noexcept;
  /// Raw 64-bit output.
  std::uint64_t next_u64() noexcept;

  /// Raw Philox4x32-10 block function.
  static std::array<std::uint32_t, 4> philox(std::array<std::uint32_t, 4> counter,
                                             std::array<std::uint32_t, 2> key) noexcept;

 private:
  void refill() noexcept;

  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::uint64_t draw_index_ = 0;
  std::array<std::uint32_t, 4> block_{};
  int block_pos_ = 4;
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
};

/// Stream ids used by the experiment runners. The high 16 bits name the
/// role of a process so that baseline and scaled runs never share noise.
enum class StreamRole : std::uint64_t {
  baseline = 0,
  scaled = 1,
  sde = 2,
  data = 3,
  init = 4,
  sampler = 5,
};

constexpr std::uint64_t stream_id(StreamRole role, std::uint64_t replicate,
                                  std::uint64_t variant = 0) noexcept {
  return (static_cast<std::uint64_t>(role) << 48) | ((variant & 0xffffULL) << 32) |
         (replicate & 0xffffffffULL);
}

}  // namespace emascale
