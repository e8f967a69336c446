#include "saesteer/probe.hpp"

#include <algorithm>
#include <cmath>

#include "saesteer/error.hpp"
#include "saesteer/rng.hpp"

namespace saesteer {

namespace {

DenseMatrix select_rows(const DenseMatrix& x, std::span<const std::size_t> idx) {
  DenseMatrix out(idx.size(), x.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const auto src = x.row(idx[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

Vector select(std::span<const double> y, std::span<const std::size_t> idx) {
  Vector out(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) out[i] = y[idx[i]];
  return out;
}

struct CenteredSystem {
  DenseMatrix gram;  // Xc^T Xc
  Vector rhs;        // Xc^T yc
  Vector x_mean;
  double y_mean = 0.0;
};

CenteredSystem centered_system(const DenseMatrix& x, std::span<const double> y, bool center = true) {
  const std::size_t n = x.rows();
  const std::size_t dim = x.cols();
  if (y.size() != n) throw ShapeError("ridge: label count does not match rows");
  if (n == 0) throw ArgumentError("ridge: empty design matrix");
  CenteredSystem s;
  s.x_mean.assign(dim, 0.0);
  if (center) {
    for (std::size_t i = 0; i < n; ++i) axpy(1.0, x.row(i), s.x_mean);
    for (double& m : s.x_mean) m /= static_cast<double>(n);
    for (double v : y) s.y_mean += v;
    s.y_mean /= static_cast<double>(n);
  }

  DenseMatrix xc(n, dim);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < dim; ++j) xc(i, j) = x(i, j) - s.x_mean[j];
  }
  s.gram = DenseMatrix(dim, dim);
  s.rhs.assign(dim, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = xc.row(i);
    const double yc = y[i] - s.y_mean;
    for (std::size_t a = 0; a < dim; ++a) {
      const double ra = r[a];
      if (ra == 0.0) continue;
      s.rhs[a] += ra * yc;
      auto g = s.gram.row(a);
      for (std::size_t b = a; b < dim; ++b) g[b] += ra * r[b];
    }
  }
  for (std::size_t a = 0; a < dim; ++a) {
    for (std::size_t b = 0; b < a; ++b) s.gram(a, b) = s.gram(b, a);
  }
  return s;
}

RidgeProbe solve(const CenteredSystem& s, double ridge_lambda) {
  if (!(ridge_lambda >= 0.0)) throw ArgumentError("ridge_lambda must be >= 0");
  DenseMatrix a = s.gram;
  for (std::size_t i = 0; i < a.rows(); ++i) a(i, i) += ridge_lambda;
  RidgeProbe p;
  try {
    p.w = cholesky_solve(std::move(a), s.rhs);
  } catch (const NumericError& e) {
    throw NumericError(std::string("ridge system is singular (") + e.what() +
                       "); use ridge_lambda > 0");
  }
  p.bias = s.y_mean - dot(p.w, s.x_mean);
  p.ridge_lambda = ridge_lambda;
  return p;
}

}  // namespace

void ProbeDataset::validate() const {
  if (x.rows() != y.size()) throw ArgumentError("probe dataset: row and label counts differ");
  if (x.rows() < 4) throw ArgumentError("probe dataset needs at least 4 rows");
  std::size_t ones = 0;
  for (double v : y) {
    if (v != 0.0 && v != 1.0) throw ArgumentError("probe labels must be 0 or 1");
    ones += v == 1.0 ? 1 : 0;
  }
  if (ones < 2 || y.size() - ones < 2) throw ArgumentError("probe dataset needs two rows per class");
  if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0)) {
    throw ArgumentError("holdout_fraction must be in (0, 1)");
  }
}

double RidgeProbe::predict(std::span<const double> row) const { return dot(w, row) + bias; }

Vector RidgeProbe::predict(const DenseMatrix& x) const {
  Vector out(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) out[i] = predict(x.row(i));
  return out;
}

RidgeProbe fit_ridge(const DenseMatrix& x, std::span<const double> y, double ridge_lambda,
                     bool fit_intercept) {
  return solve(centered_system(x, y, fit_intercept), ridge_lambda);
}

double r_squared(std::span<const double> y, std::span<const double> predictions) {
  if (y.size() != predictions.size()) throw ShapeError("r_squared: size mismatch");
  if (y.empty()) throw UndefinedRSquared("r_squared of an empty sample");
  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= static_cast<double>(y.size());
  double ss_res = 0.0;
  double ss_tot = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    ss_res += (y[i] - predictions[i]) * (y[i] - predictions[i]);
    ss_tot += (y[i] - mean) * (y[i] - mean);
  }
  if (ss_tot == 0.0) throw UndefinedRSquared("r_squared undefined for constant labels");
  return 1.0 - ss_res / ss_tot;
}

double r_squared(const RidgeProbe& probe, const DenseMatrix& x, std::span<const double> y) {
  return r_squared(y, probe.predict(x));
}

HoldoutSplit stratified_split(std::span<const double> y, double holdout_fraction, std::uint64_t seed) {
  SeededRng rng(derive_seed(seed, "holdout"));
  HoldoutSplit split;
  for (double label : {0.0, 1.0}) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < y.size(); ++i) {
      if (y[i] == label) idx.push_back(i);
    }
    for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
    if (idx.size() < 2) throw ArgumentError("stratified split needs two rows per class");
    auto n_hold = static_cast<std::size_t>(std::llround(holdout_fraction * static_cast<double>(idx.size())));
    n_hold = std::clamp<std::size_t>(n_hold, 1, idx.size() - 1);
    split.holdout.insert(split.holdout.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_hold));
    split.train.insert(split.train.end(), idx.begin() + static_cast<std::ptrdiff_t>(n_hold), idx.end());
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.holdout.begin(), split.holdout.end());
  return split;
}

SweepResult sweep_lambda(const ProbeDataset& data, std::span<const double> grid, std::uint64_t seed) {
  if (grid.empty()) throw ArgumentError("lambda grid is empty");
  data.validate();
  std::vector<double> lambdas(grid.begin(), grid.end());
  std::sort(lambdas.begin(), lambdas.end());

  const HoldoutSplit split = stratified_split(data.y, data.holdout_fraction, seed);
  const DenseMatrix x_train = select_rows(data.x, split.train);
  const Vector y_train = select(data.y, split.train);
  const DenseMatrix x_hold = select_rows(data.x, split.holdout);
  const Vector y_hold = select(data.y, split.holdout);
  const CenteredSystem system = centered_system(x_train, y_train);

  SweepResult result;
  bool have_best = false;
  for (double lambda : lambdas) {
    RidgeProbe p = solve(system, lambda);
    p.r2_holdout = r_squared(p, x_hold, y_hold);
    result.scores.push_back({lambda, p.r2_holdout});
    if (!have_best || p.r2_holdout > result.best.r2_holdout) {
      result.best = std::move(p);
      have_best = true;
    }
  }
  return result;
}

SteeringVector project_decoder(const SaeParams& sae, const RidgeProbe& probe, std::size_t layer,
                               Trait trait, std::string source_sae) {
  if (probe.w.size() != sae.w_dec.rows()) {
    throw ShapeError("probe dimension does not match the SAE dictionary size");
  }
  SteeringVector sv;
  sv.v = matvec_transposed(sae.w_dec, probe.w);
  sv.layer = layer;
  sv.trait = trait;
  sv.norm = l2_norm(sv.v);
  sv.source_sae = std::move(source_sae);
  return sv;
}

}  // namespace saesteer
