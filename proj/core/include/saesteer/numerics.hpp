#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace saesteer {

using Vector = std::vector<double>;

// Row-major dense matrix of doubles.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static DenseMatrix identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  DenseMatrix transposed() const;
  bool all_finite() const;

  bool operator==(const DenseMatrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);

// a * x
Vector matvec(const DenseMatrix& a, std::span<const double> x);
// aᵀ * x
Vector matvec_transposed(const DenseMatrix& a, std::span<const double> x);

double dot(std::span<const double> u, std::span<const double> w);
double l2_norm(std::span<const double> u);
double cosine_similarity(std::span<const double> u, std::span<const double> w);

// y += a * x
void axpy(double a, std::span<const double> x, std::span<double> y);

bool all_finite(std::span<const double> u);

// Solves a x = b for symmetric positive-definite a. Throws NumericError when
// the factorization meets a non-positive pivot.
Vector cholesky_solve(DenseMatrix a, std::span<const double> b);

struct AdamState {
  Vector first_moment;
  Vector second_moment;
  std::uint64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  AdamState() = default;
  explicit AdamState(std::size_t n, double beta1 = 0.9, double beta2 = 0.999, double epsilon = 1e-8);

  // Zeroes both moments over [offset, offset + count).
  void reset_moments(std::size_t offset, std::size_t count);
};

// One bias-corrected Adam step, in place. Throws NumericError on a
// non-finite gradient and ShapeError on a size mismatch.
void adam_update(std::span<double> params, std::span<const double> grads, AdamState& state,
                 double lr);

}  // namespace saesteer
