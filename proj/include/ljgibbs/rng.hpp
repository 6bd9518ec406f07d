#pragma once

#include <array>
#include <cstdint>

namespace ljgibbs {

// xoshiro256** with splitmix64 seeding. Fixed algorithm so that a seed
// produces the same stream on every platform; std::* distributions are
// implementation-defined and would break byte-identical replication.
class Rng {
public:
  explicit Rng(std::uint64_t seed) { reseed(seed); }

  // Independent stream for replicate `id` of a run seeded with `seed`.
  static Rng stream(std::uint64_t seed, std::uint64_t id);

  void reseed(std::uint64_t seed);

  std::uint64_t next_u64();

  // Uniform on [0,1) using the top 53 bits.
  double unif() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double unif(double a, double b) { return a + (b - a) * unif(); }

  // Unbiased integer in [0, n), n >= 1 (Lemire rejection).
  std::uint64_t below(std::uint64_t n);

  // Standard normal via Marsaglia polar; second value cached.
  double normal();

private:
  std::array<std::uint64_t, 4> s_{};
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace ljgibbs
