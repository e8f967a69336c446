#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "saesteer/numerics.hpp"
#include "saesteer/steering_vector.hpp"

namespace saesteer {

inline constexpr std::array<double, 4> kConcentrationThresholds{0.50, 0.80, 0.90, 0.95};

struct ConcentrationCurve {
  std::vector<double> thresholds;
  std::vector<std::size_t> features_needed;
  std::vector<double> fractions_of_dict;
};

// Smallest number of largest squared components reaching each fraction of
// ‖w‖². Throws ArgumentError for a zero vector.
ConcentrationCurve concentration(std::span<const double> w,
                                 std::span<const double> thresholds = kConcentrationThresholds);

struct CosineMatrix {
  DenseMatrix values;
  // cross_layer[i][j] is set when the two vectors live at different layers.
  std::vector<std::vector<bool>> cross_layer;
};

// Throws UndefinedCosine for a zero vector and ShapeError for mixed dims.
CosineMatrix cosine_matrix(std::span<const SteeringVector> vectors);

struct VarianceSplit {
  double parallel_pct = 0.0;
  double orthogonal_pct = 0.0;
};

// parallel = 100 cos²(w, reference). Throws ArgumentError for a zero vector.
VarianceSplit variance_split(std::span<const double> w, std::span<const double> reference);
VarianceSplit variance_split_from_cosine(double cosine);

}  // namespace saesteer
