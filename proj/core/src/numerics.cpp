#include "saesteer/numerics.hpp"

#include <cmath>
#include <string>

#include "saesteer/error.hpp"

namespace saesteer {

namespace {

// Four independent partial sums in a fixed order, so results stay
// deterministic.
inline double dot_unchecked(const double* u, const double* w, std::size_t n) {
  double a0 = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    a0 += u[i] * w[i];
    a1 += u[i + 1] * w[i + 1];
    a2 += u[i + 2] * w[i + 2];
    a3 += u[i + 3] * w[i + 3];
  }
  for (; i < n; ++i) a0 += u[i] * w[i];
  return (a0 + a1) + (a2 + a3);
}

}  // namespace

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw ShapeError("DenseMatrix: data length " + std::to_string(data_.size()) + " != " +
                     std::to_string(rows_) + "x" + std::to_string(cols_));
  }
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
  DenseMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

DenseMatrix DenseMatrix::transposed() const {
  DenseMatrix t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r) {
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  }
  return t;
}

bool DenseMatrix::all_finite() const { return saesteer::all_finite(data_); }

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                     " times " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
  }
  DenseMatrix out(a.rows(), b.cols());
  // i-k-j order keeps the inner loop on contiguous rows of b and out.
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto out_row = out.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      const auto b_row = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) out_row[j] += aik * b_row[j];
    }
  }
  return out;
}

Vector matvec(const DenseMatrix& a, std::span<const double> x) {
  if (a.cols() != x.size()) {
    throw ShapeError("matvec: matrix has " + std::to_string(a.cols()) + " cols, vector has " +
                     std::to_string(x.size()));
  }
  Vector out(a.rows());
  const double* row = a.data().data();
  for (std::size_t i = 0; i < a.rows(); ++i, row += a.cols()) out[i] = dot_unchecked(row, x.data(), x.size());
  return out;
}

Vector matvec_transposed(const DenseMatrix& a, std::span<const double> x) {
  if (a.rows() != x.size()) {
    throw ShapeError("matvec_transposed: matrix has " + std::to_string(a.rows()) +
                     " rows, vector has " + std::to_string(x.size()));
  }
  Vector out(a.cols(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    if (x[i] == 0.0) continue;
    axpy(x[i], a.row(i), out);
  }
  return out;
}

double dot(std::span<const double> u, std::span<const double> w) {
  if (u.size() != w.size()) {
    throw ShapeError("dot: lengths " + std::to_string(u.size()) + " and " +
                     std::to_string(w.size()));
  }
  return dot_unchecked(u.data(), w.data(), u.size());
}

double l2_norm(std::span<const double> u) {
  double acc = 0.0;
  for (double x : u) acc += x * x;
  return std::sqrt(acc);
}

double cosine_similarity(std::span<const double> u, std::span<const double> w) {
  if (u.size() != w.size()) {
    throw ShapeError("cosine_similarity: lengths " + std::to_string(u.size()) + " and " +
                     std::to_string(w.size()));
  }
  const double nu = l2_norm(u);
  const double nw = l2_norm(w);
  if (nu == 0.0 || nw == 0.0) throw UndefinedCosine("cosine_similarity: zero-norm input");
  double c = dot(u, w) / (nu * nw);
  if (c > 1.0) c = 1.0;
  if (c < -1.0) c = -1.0;
  return c;
}

void axpy(double a, std::span<const double> x, std::span<double> y) {
  if (x.size() != y.size()) {
    throw ShapeError("axpy: lengths " + std::to_string(x.size()) + " and " +
                     std::to_string(y.size()));
  }
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

bool all_finite(std::span<const double> u) {
  for (double x : u) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

Vector cholesky_solve(DenseMatrix a, std::span<const double> b) {
  const std::size_t n = a.rows();
  if (a.cols() != n || b.size() != n) throw ShapeError("cholesky_solve: shape mismatch");
  // In-place lower factor L with a = L Lᵀ.
  for (std::size_t j = 0; j < n; ++j) {
    double diag = a(j, j);
    for (std::size_t k = 0; k < j; ++k) diag -= a(j, k) * a(j, k);
    if (!(diag > 1e-13 * (1.0 + std::abs(a(j, j))))) {
      throw NumericError("cholesky_solve: matrix is not positive definite (pivot " +
                         std::to_string(j) + ")");
    }
    const double ljj = std::sqrt(diag);
    a(j, j) = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a(i, j);
      const auto ri = a.row(i);
      const auto rj = a.row(j);
      for (std::size_t k = 0; k < j; ++k) s -= ri[k] * rj[k];
      a(i, j) = s / ljj;
    }
  }
  Vector y(b.begin(), b.end());
  for (std::size_t i = 0; i < n; ++i) {
    double s = y[i];
    for (std::size_t k = 0; k < i; ++k) s -= a(i, k) * y[k];
    y[i] = s / a(i, i);
  }
  for (std::size_t ii = n; ii-- > 0;) {
    double s = y[ii];
    for (std::size_t k = ii + 1; k < n; ++k) s -= a(k, ii) * y[k];
    y[ii] = s / a(ii, ii);
  }
  return y;
}

AdamState::AdamState(std::size_t n, double b1, double b2, double eps)
    : first_moment(n, 0.0), second_moment(n, 0.0), beta1(b1), beta2(b2), epsilon(eps) {}

void AdamState::reset_moments(std::size_t offset, std::size_t count) {
  if (offset + count > first_moment.size()) throw ShapeError("AdamState: reset out of range");
  for (std::size_t i = offset; i < offset + count; ++i) {
    first_moment[i] = 0.0;
    second_moment[i] = 0.0;
  }
}

void adam_update(std::span<double> params, std::span<const double> grads, AdamState& state,
                 double lr) {
  if (params.size() != grads.size() || state.first_moment.size() != params.size() ||
      state.second_moment.size() != params.size()) {
    throw ShapeError("adam_update: parameter, gradient and moment sizes differ");
  }
  if (lr < 0.0) throw ArgumentError("adam_update: negative learning rate");
  if (!all_finite(grads)) throw NumericError("adam_update: non-finite gradient");

  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(state.beta1, t);
  const double correction2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    double& m = state.first_moment[i];
    double& v = state.second_moment[i];
    m = state.beta1 * m + (1.0 - state.beta1) * g;
    v = state.beta2 * v + (1.0 - state.beta2) * g * g;
    const double m_hat = m / correction1;
    const double v_hat = v / correction2;
    params[i] -= lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
  }
}

}  // namespace saesteer
