#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "saesteer/domain.hpp"
#include "saesteer/numerics.hpp"

namespace saesteer {

// A residual-stream direction plus where it came from.
struct SteeringVector {
  Vector v;
  std::size_t layer = 0;
  Trait trait = Trait::autonomy;
  double norm = 0.0;
  std::string source_sae;

  bool operator==(const SteeringVector&) const = default;
};

inline constexpr std::uint32_t kSteeringVectorVersion = 1;

// "QSTV", version, trait name, layer, d, norm (f64), source checkpoint id,
// then d little-endian float32 components. The stored norm is that of the
// float32-rounded vector, so a loaded vector satisfies norm == ‖v‖.
std::vector<std::uint8_t> serialize_steering_vector(const SteeringVector& sv);
SteeringVector deserialize_steering_vector(std::span<const std::uint8_t> bytes);
void save_steering_vector(const std::filesystem::path& path, const SteeringVector& sv);
SteeringVector load_steering_vector(const std::filesystem::path& path);

}  // namespace saesteer
