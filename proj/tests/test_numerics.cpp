#include <cmath>
#include <limits>
#include <vector>

#include <gtest/gtest.h>

#include "saesteer/error.hpp"
#include "saesteer/numerics.hpp"
#include "saesteer/rng.hpp"

namespace saesteer {
namespace {

DenseMatrix random_matrix(std::size_t rows, std::size_t cols, SeededRng& rng) {
  DenseMatrix m(rows, cols);
  for (double& v : m.data()) v = rng.normal();
  return m;
}

TEST(Matmul, IdentityLeavesMatrixUnchanged) {
  const DenseMatrix a(2, 3, {1, 2, 3, 4, 5, 6});
  EXPECT_EQ(matmul(DenseMatrix::identity(2), a), a);
}

TEST(Matmul, HandComputedProduct) {
  const DenseMatrix a(2, 2, {1, 2, 3, 4});
  const DenseMatrix b(2, 1, {0, 1});
  const DenseMatrix c = matmul(a, b);
  ASSERT_EQ(c.rows(), 2u);
  ASSERT_EQ(c.cols(), 1u);
  EXPECT_DOUBLE_EQ(c(0, 0), 2.0);
  EXPECT_DOUBLE_EQ(c(1, 0), 4.0);
}

TEST(Matmul, ZeroMatrixGivesZero) {
  SeededRng rng(3);
  const DenseMatrix a = random_matrix(3, 4, rng);
  const DenseMatrix z(2, 3, 0.0);
  EXPECT_EQ(matmul(z, a), DenseMatrix(2, 4, 0.0));
}

TEST(Matmul, DimensionMismatchThrows) {
  EXPECT_THROW(matmul(DenseMatrix(2, 3), DenseMatrix(2, 3)), ShapeError);
}

TEST(Matmul, AssociativeOnRandomMatrices) {
  SeededRng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const DenseMatrix a = random_matrix(3, 4, rng);
    const DenseMatrix b = random_matrix(4, 5, rng);
    const DenseMatrix c = random_matrix(5, 2, rng);
    const DenseMatrix left = matmul(matmul(a, b), c);
    const DenseMatrix right = matmul(a, matmul(b, c));
    for (std::size_t i = 0; i < left.data().size(); ++i) {
      EXPECT_NEAR(left.data()[i], right.data()[i], 1e-9);
    }
  }
}

TEST(Matvec, AgreesWithMatmulAndTranspose) {
  SeededRng rng(5);
  const DenseMatrix a = random_matrix(4, 3, rng);
  const Vector x{0.5, -1.0, 2.0};
  const Vector y = matvec(a, x);
  const DenseMatrix expected = matmul(a, DenseMatrix(3, 1, x));
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(y[i], expected(i, 0), 1e-12);

  const Vector w{1.0, 0.0, -2.0, 3.0};
  const Vector yt = matvec_transposed(a, w);
  const Vector expected_t = matvec(a.transposed(), w);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(yt[i], expected_t[i], 1e-12);
}

TEST(DenseMatrix, RejectsWrongDataLength) {
  EXPECT_THROW(DenseMatrix(2, 2, std::vector<double>{1, 2, 3}), ShapeError);
}

TEST(Cosine, HandValues) {
  const Vector u{1, 1};
  EXPECT_DOUBLE_EQ(cosine_similarity(u, u), 1.0);
  EXPECT_DOUBLE_EQ(cosine_similarity(Vector{1, 0}, Vector{0, 1}), 0.0);
  EXPECT_NEAR(cosine_similarity(u, Vector{1, 0}), 0.7071, 1e-4);
}

TEST(Cosine, ZeroNormThrows) {
  EXPECT_THROW(cosine_similarity(Vector{0, 0}, Vector{1, 0}), UndefinedCosine);
}

TEST(Cosine, SymmetricAndScaleInvariant) {
  SeededRng rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    Vector u(6), w(6);
    for (double& v : u) v = rng.normal();
    for (double& v : w) v = rng.normal();
    const double a = 0.1 + 10.0 * rng.uniform();
    const double b = 0.1 + 10.0 * rng.uniform();
    Vector au = u, bw = w;
    for (double& v : au) v *= a;
    for (double& v : bw) v *= b;
    const double c = cosine_similarity(u, w);
    EXPECT_NEAR(c, cosine_similarity(w, u), 1e-12);
    EXPECT_NEAR(c, cosine_similarity(au, bw), 1e-12);
    EXPECT_LE(std::abs(c), 1.0);
  }
}

TEST(L2Norm, HandValues) {
  EXPECT_EQ(l2_norm(Vector{0, 0, 0}), 0.0);
  EXPECT_DOUBLE_EQ(l2_norm(Vector{3, 4}), 5.0);
  EXPECT_DOUBLE_EQ(l2_norm(Vector{0, 1, 0}), 1.0);
}

TEST(Cholesky, SolvesSpdSystem) {
  const DenseMatrix a(2, 2, {4, 2, 2, 3});
  const Vector b{2, 1};
  const Vector x = cholesky_solve(a, b);
  // Cramer's rule: det = 8.
  EXPECT_NEAR(x[0], (2 * 3 - 2 * 1) / 8.0, 1e-12);
  EXPECT_NEAR(x[1], (4 * 1 - 2 * 2) / 8.0, 1e-12);
}

TEST(Cholesky, SingularThrows) {
  EXPECT_THROW(cholesky_solve(DenseMatrix(2, 2, {1, 1, 1, 1}), Vector{1, 1}), NumericError);
}

TEST(Adam, ZeroLearningRateLeavesParams) {
  Vector p{1.0, -2.0};
  AdamState s(2);
  adam_update(p, Vector{0.3, 0.7}, s, 0.0);
  EXPECT_EQ(p, (Vector{1.0, -2.0}));
}

TEST(Adam, ZeroGradientsNeverMoveParams) {
  Vector p{1.0, -2.0, 0.5};
  AdamState s(3);
  for (int i = 0; i < 10; ++i) adam_update(p, Vector{0, 0, 0}, s, 0.1);
  EXPECT_EQ(p, (Vector{1.0, -2.0, 0.5}));
}

TEST(Adam, MatchesHandExpansion) {
  const double beta1 = 0.9, beta2 = 0.999, eps = 1e-8, lr = 0.01;
  double theta = 0.5, m = 0.0, v = 0.0;
  Vector p{theta};
  AdamState s(1, beta1, beta2, eps);
  const double grads[] = {0.2, -0.4, 1.5};
  for (int t = 1; t <= 3; ++t) {
    const double g = grads[t - 1];
    m = beta1 * m + (1 - beta1) * g;
    v = beta2 * v + (1 - beta2) * g * g;
    const double m_hat = m / (1 - std::pow(beta1, t));
    const double v_hat = v / (1 - std::pow(beta2, t));
    theta -= lr * m_hat / (std::sqrt(v_hat) + eps);
    adam_update(p, Vector{g}, s, lr);
    EXPECT_NEAR(p[0], theta, 1e-12) << "step " << t;
  }
  EXPECT_EQ(s.step, 3u);
}

TEST(Adam, RejectsNonFiniteGradientAndShapeMismatch) {
  Vector p{1.0};
  AdamState s(1);
  EXPECT_THROW(adam_update(p, Vector{std::numeric_limits<double>::quiet_NaN()}, s, 0.1),
               NumericError);
  EXPECT_THROW(adam_update(p, Vector{1.0, 2.0}, s, 0.1), ShapeError);
  EXPECT_THROW(adam_update(p, Vector{1.0}, s, -1.0), ArgumentError);
}

}  // namespace
}  // namespace saesteer
