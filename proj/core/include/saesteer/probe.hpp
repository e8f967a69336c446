#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "saesteer/domain.hpp"
#include "saesteer/numerics.hpp"
#include "saesteer/sae.hpp"
#include "saesteer/steering_vector.hpp"

namespace saesteer {

struct ProbeDataset {
  DenseMatrix x;  // n x D encodings
  Vector y;       // 1 = HIGH, 0 = LOW
  double holdout_fraction = 0.2;

  // Throws ArgumentError.
  void validate() const;
};

struct RidgeProbe {
  Vector w;
  double bias = 0.0;
  double ridge_lambda = 0.0;
  double r2_holdout = 0.0;

  double predict(std::span<const double> row) const;
  Vector predict(const DenseMatrix& x) const;
};

// Solves (Xc^T Xc + lambda I) w = Xc^T yc on centered data. Throws
// NumericError when the system is singular (only possible at lambda = 0).
// Without an intercept the raw X and y are used and the bias is zero.
RidgeProbe fit_ridge(const DenseMatrix& x, std::span<const double> y, double ridge_lambda,
                     bool fit_intercept = true);

// Throws UndefinedRSquared when y is constant.
double r_squared(std::span<const double> y, std::span<const double> predictions);
double r_squared(const RidgeProbe& probe, const DenseMatrix& x, std::span<const double> y);

struct HoldoutSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> holdout;
};

// Per-class seeded shuffle; round(fraction * class size) of each class is
// held out, at least one per class.
HoldoutSplit stratified_split(std::span<const double> y, double holdout_fraction, std::uint64_t seed);

inline const std::vector<double>& default_lambda_grid() {
  static const std::vector<double> grid{0.01, 0.1, 1.0, 10.0};
  return grid;
}

struct LambdaScore {
  double ridge_lambda;
  double r2_holdout;
};

struct SweepResult {
  RidgeProbe best;
  std::vector<LambdaScore> scores;  // ascending lambda
};

// Fits every lambda on the train split and keeps the best holdout R²; ties
// go to the smaller lambda.
SweepResult sweep_lambda(const ProbeDataset& data, std::span<const double> grid, std::uint64_t seed);

// v = W_dec^T w. The probe bias is dropped.
SteeringVector project_decoder(const SaeParams& sae, const RidgeProbe& probe, std::size_t layer,
                               Trait trait, std::string source_sae);

}  // namespace saesteer
