#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>

namespace saesteer {

// PCG32 (XSH-RR, 64-bit state). Distributions are implemented here rather
// than through <random> so streams are identical across standard libraries.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed, std::uint64_t stream = 0xda3e39cb94b95bdbULL);

  std::uint32_t next_u32();
  std::uint64_t next_u64();

  // Uniform on [0, 1) with 53 bits of resolution.
  double uniform();
  // Standard normal (Box-Muller, second draw cached).
  double normal();
  // Uniform integer on [0, n). n must be > 0.
  std::size_t below(std::size_t n);

  std::uint64_t seed() const noexcept { return seed_; }

 private:
  std::uint64_t seed_;
  std::uint64_t state_ = 0;
  std::uint64_t increment_ = 0;
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
};

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag);
std::uint64_t derive_seed(std::uint64_t base, std::string_view tag);

}  // namespace saesteer
