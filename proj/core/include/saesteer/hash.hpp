#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace saesteer {

// FNV-1a, 64-bit. Used for content-addressed cache keys and checkpoint ids.
class Fnv1a64 {
 public:
  void update(std::span<const std::uint8_t> bytes);
  void update(std::string_view text);
  std::uint64_t digest() const noexcept { return state_; }
  std::string hex() const;

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

std::string hash_hex(std::string_view text);

}  // namespace saesteer
