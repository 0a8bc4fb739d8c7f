#pragma once

#include <array>
#include <cstdint>

namespace dnnshield {

/// Philox4x32-10 counter-based block function (Salmon et al., SC'11). Stateless:
/// the same (counter, key) always yields the same four words.
struct Philox4x32 {
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Counter block(Counter counter, Key key) noexcept;
};

/// Independent random streams. A stream is named by (seed, domain, a, b), e.g.
/// (base seed, noise, input id, run index); draws walk the block counter.
enum class StreamDomain : std::uint32_t {
  Initialization = 1,
  Shuffle = 2,
  SparsityRates = 3,
  Dataset = 4,
  Attack = 5,
  Workload = 6,
};

class CounterRng {
 public:
  CounterRng(std::uint64_t seed, StreamDomain domain, std::uint32_t a = 0, std::uint32_t b = 0);

  std::uint32_t next_u32();
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);
  /// Standard normal via Box-Muller.
  double normal();

 private:
  Philox4x32::Key key_;
  Philox4x32::Counter counter_;
  Philox4x32::Counter buffer_{};
  unsigned used_ = 4;
};

}  // namespace dnnshield
