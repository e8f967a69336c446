#include "saesteer/steering_vector.hpp"

#include "binary_io.hpp"
#include "saesteer/error.hpp"
#include "saesteer/io.hpp"

namespace saesteer {

std::vector<std::uint8_t> serialize_steering_vector(const SteeringVector& sv) {
  Vector rounded(sv.v.size());
  for (std::size_t i = 0; i < sv.v.size(); ++i) {
    rounded[i] = static_cast<double>(static_cast<float>(sv.v[i]));
  }
  detail::ByteWriter w;
  w.raw("QSTV");
  w.u32(kSteeringVectorVersion);
  w.str(trait_name(sv.trait));
  w.u32(static_cast<std::uint32_t>(sv.layer));
  w.u32(static_cast<std::uint32_t>(rounded.size()));
  w.f64(l2_norm(rounded));
  w.str(sv.source_sae);
  for (double x : rounded) w.f32(x);
  return w.take();
}

SteeringVector deserialize_steering_vector(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes, "QSTV steering vector");
  if (r.raw(4) != "QSTV") throw IoError("QSTV steering vector: bad magic");
  if (r.u32() != kSteeringVectorVersion) throw IoError("QSTV steering vector: unsupported version");
  SteeringVector sv;
  try {
    sv.trait = parse_trait(r.str());
  } catch (const ArgumentError& e) {
    throw IoError(std::string("QSTV steering vector: ") + e.what());
  }
  sv.layer = r.u32();
  const std::size_t dim = r.u32();
  sv.norm = r.f64();
  sv.source_sae = r.str();
  sv.v.resize(dim);
  for (double& x : sv.v) x = r.f32();
  if (!r.at_end()) throw IoError("QSTV steering vector: trailing bytes");
  return sv;
}

void save_steering_vector(const std::filesystem::path& path, const SteeringVector& sv) {
  write_bytes(path, serialize_steering_vector(sv));
}

SteeringVector load_steering_vector(const std::filesystem::path& path) {
  return deserialize_steering_vector(read_bytes(path));
}

}  // namespace saesteer
