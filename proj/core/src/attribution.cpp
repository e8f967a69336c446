#include "saesteer/attribution.hpp"

#include <algorithm>
#include <functional>

#include "saesteer/error.hpp"

namespace saesteer {

namespace {

// Sums of squares rounded a hair below the exact target (3 components of
// sqrt(3) against 0.9 * 10, say) must still count as reaching it.
constexpr double kRelativeTolerance = 1e-12;

}  // namespace

ConcentrationCurve concentration(std::span<const double> w, std::span<const double> thresholds) {
  std::vector<double> sq(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) sq[i] = w[i] * w[i];
  std::sort(sq.begin(), sq.end(), std::greater<>());
  double total = 0.0;
  for (double s : sq) total += s;
  if (!(total > 0.0)) throw ArgumentError("concentration of a zero vector");

  ConcentrationCurve c;
  c.thresholds.assign(thresholds.begin(), thresholds.end());
  for (double tau : thresholds) {
    const double target = tau * total * (1.0 - kRelativeTolerance);
    double acc = 0.0;
    std::size_t needed = 0;
    while (needed < sq.size() && acc < target) acc += sq[needed++];
    c.features_needed.push_back(needed);
    c.fractions_of_dict.push_back(static_cast<double>(needed) / static_cast<double>(w.size()));
  }
  return c;
}

CosineMatrix cosine_matrix(std::span<const SteeringVector> vectors) {
  const std::size_t n = vectors.size();
  CosineMatrix m;
  m.values = DenseMatrix(n, n);
  m.cross_layer.assign(n, std::vector<bool>(n, false));
  for (std::size_t i = 0; i < n; ++i) {
    if (vectors[i].v.size() != vectors.front().v.size()) {
      throw ShapeError("cosine matrix needs vectors of one dimension");
    }
    if (l2_norm(vectors[i].v) == 0.0) throw UndefinedCosine("cosine of a zero steering vector");
  }
  for (std::size_t i = 0; i < n; ++i) {
    m.values(i, i) = 1.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      const double c = cosine_similarity(vectors[i].v, vectors[j].v);
      m.values(i, j) = c;
      m.values(j, i) = c;
      const bool cross = vectors[i].layer != vectors[j].layer;
      m.cross_layer[i][j] = cross;
      m.cross_layer[j][i] = cross;
    }
  }
  return m;
}

VarianceSplit variance_split_from_cosine(double cosine) {
  VarianceSplit s;
  s.parallel_pct = 100.0 * cosine * cosine;
  s.orthogonal_pct = 100.0 - s.parallel_pct;
  return s;
}

VarianceSplit variance_split(std::span<const double> w, std::span<const double> reference) {
  if (l2_norm(w) == 0.0 || l2_norm(reference) == 0.0) {
    throw ArgumentError("variance split needs non-zero vectors");
  }
  return variance_split_from_cosine(cosine_similarity(w, reference));
}

}  // namespace saesteer
