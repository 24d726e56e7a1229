#include "oracles.hpp"
#include "replaygraph/cg.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

using namespace replaygraph;
namespace o = replaygraph::oracle;

namespace {

auto dense(const Matrix& a) {
  return [&a](const Vector& v) { return Vector(a * v); };
}

}  // namespace

TEST(Cg, IdentityInOneIteration) {
  const Matrix eye = Matrix::Identity(4, 4);
  const Vector g = (Vector(4) << 1, -2, 3, 0.5).finished();
  const CgResult r = cg_solve(dense(eye), g, {10, 1e-12, 0.0});
  EXPECT_EQ(r.iterations, 1);
  EXPECT_TRUE(r.converged);
  EXPECT_LT((r.solution - g).norm(), 1e-15);
}

TEST(Cg, Diagonal) {
  const Matrix h = Vector((Vector(2) << 2, 4).finished()).asDiagonal();
  const CgResult r = cg_solve(dense(h), (Vector(2) << 2, 4).finished(), {10, 1e-12, 0.0});
  EXPECT_NEAR(r.solution(0), 1.0, 1e-14);
  EXPECT_NEAR(r.solution(1), 1.0, 1e-14);
}

TEST(Cg, MatchesDenseSolveOnRandomSpd) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    const Index n = 5 + trial % 16;
    const Matrix a = o::random_spd(n, rng);
    const Vector b = o::random_vector(n, rng);
    const CgResult r = cg_solve(dense(a), b, {n * 4, 1e-12, 0.0});
    EXPECT_TRUE(r.converged);
    EXPECT_LT((r.solution - o::dense_solve(a, b)).norm(), 1e-6);
  }
}

TEST(Cg, DampingIsAddedToTheOperator) {
  std::mt19937_64 rng(32);
  const Matrix a = o::random_spd(6, rng);
  const Vector b = o::random_vector(6, rng);
  const CgResult r = cg_solve(dense(a), b, {100, 1e-12, 0.5});
  const Matrix damped = a + 0.5 * Matrix::Identity(6, 6);
  EXPECT_LT((r.solution - o::dense_solve(damped, b)).norm(), 1e-9);
}

TEST(Cg, ResidualContract) {
  std::mt19937_64 rng(33);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix a = o::random_spd(12, rng);
    const Vector b = o::random_vector(12, rng);
    const CgSettings s{200, 1e-6, 0.01};
    const CgResult r = cg_solve(dense(a), b, s);
    const double resid = ((a + s.damping * Matrix::Identity(12, 12)) * r.solution - b).norm();
    EXPECT_LE(resid, 1.0001 * s.residual_tol * b.norm());
  }
}

TEST(Cg, IterationCapIsReported) {
  std::mt19937_64 rng(34);
  const Matrix a = o::random_spd(30, rng);
  const CgResult r = cg_solve(dense(a), o::random_vector(30, rng), {2, 1e-14, 0.0});
  EXPECT_EQ(r.iterations, 2);
  EXPECT_FALSE(r.converged);
  EXPECT_GT(r.relative_residual, 1e-14);
}

TEST(Cg, ZeroRhs) {
  const Matrix a = Matrix::Identity(3, 3);
  const CgResult r = cg_solve(dense(a), Vector::Zero(3), {});
  EXPECT_TRUE(r.converged);
  EXPECT_TRUE(r.solution.isZero(0.0));
}

TEST(Cg, Errors) {
  const Matrix a = Matrix::Identity(2, 2);
  const Vector b = Vector::Ones(2);
  EXPECT_THROW(cg_solve(dense(a), b, {10, 0.0, 0.0}), Error);
  EXPECT_THROW(cg_solve(dense(a), b, {10, 1e-6, -1.0}), Error);
  EXPECT_THROW(cg_solve(dense(a), b, {0, 1e-6, 0.0}), Error);
  auto nan_op = [](const Vector& v) { return Vector(v * std::numeric_limits<double>::quiet_NaN()); };
  EXPECT_THROW(cg_solve(nan_op, b, {10, 1e-6, 0.0}), DivergenceError);
  Vector bad = b;
  bad(0) = std::numeric_limits<double>::infinity();
  EXPECT_THROW(cg_solve(dense(a), bad, {}), DivergenceError);
}

TEST(Cg, NegativeCurvatureStops) {
  const Matrix a = -Matrix::Identity(3, 3);
  const CgResult r = cg_solve(dense(a), Vector::Ones(3), {10, 1e-6, 0.0});
  EXPECT_TRUE(r.negative_curvature);
  EXPECT_FALSE(r.converged);
}

TEST(CgSettings, ForDimension) {
  EXPECT_EQ(CgSettings::for_dimension(50).max_iters, 50);
  EXPECT_EQ(CgSettings::for_dimension(7850).max_iters, 200);
}
