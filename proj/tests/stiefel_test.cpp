#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "fedspd/linalg.hpp"
#include "fedspd/rng.hpp"
#include "fedspd/stiefel.hpp"

using namespace fedspd;

namespace {

// Projects vec(X) onto the nullspace of the linearized constraint
// WᵀX + XᵀW = 0, using an explicitly assembled constraint matrix. Slow but
// independent of the closed-form projector.
Matrix project_via_basis(const Matrix& w, const Matrix& x) {
  const Index p = w.rows(), k = w.cols();
  const Index constraints = k * (k + 1) / 2;
  Matrix c = Matrix::Zero(constraints, p * k);
  Index row = 0;
  for (Index a = 0; a < k; ++a) {
    for (Index b = a; b < k; ++b, ++row) {
      for (Index i = 0; i < p; ++i) {
        c(row, b * p + i) += w(i, a);
        c(row, a * p + i) += w(i, b);
      }
    }
  }
  const Matrix kernel = Eigen::FullPivLU<Matrix>(c).kernel();
  Eigen::HouseholderQR<Matrix> qr(kernel);
  const Matrix q = Matrix(qr.householderQ()).leftCols(kernel.cols());
  const Vector vx = Eigen::Map<const Vector>(x.data(), p * k);
  const Vector projected = q * (q.transpose() * vx);
  return Eigen::Map<const Matrix>(projected.data(), p, k);
}

StiefelPoint random_point(Index p, Index k, std::uint64_t seed) {
  auto rng = make_engine(seed);
  return StiefelPoint(rand_orthonormal(p, k, rng));
}

}  // namespace

TEST_SUITE("stiefel") {

TEST_CASE("StiefelPoint enforces the membership tolerance") {
  auto rng = make_engine(20);
  const Matrix q = rand_orthonormal(4, 2, rng);
  CHECK_NOTHROW(StiefelPoint{q});
  CHECK(StiefelPoint(q).manifold_residual() <= 1e-12);

  // Residual ~2e-9 stays under the 1e-8 membership bound.
  Matrix nudged = q;
  nudged(0, 0) += 1e-9;
  CHECK_NOTHROW(StiefelPoint{nudged});

  CHECK_THROWS_AS(StiefelPoint{Matrix(1.1 * q)}, DomainError);
  CHECK_THROWS_AS(StiefelPoint{Matrix::Zero(2, 3)}, ShapeError);

  const StiefelPoint off = StiefelPoint::unchecked(1.1 * q);
  CHECK(off.manifold_residual() > 1e-2);
}

TEST_CASE("tangent_project annihilates the base point") {
  const StiefelPoint w = random_point(5, 3, 21);
  CHECK(tangent_project(w, w.mat()).mat().norm() <= 1e-12);
}

TEST_CASE("tangent_project is idempotent and matches the nullspace basis") {
  auto rng = make_engine(22);
  for (auto [p, k] : {std::pair<Index, Index>{5, 2}, {4, 3}, {6, 1}}) {
    const StiefelPoint w(rand_orthonormal(p, k, rng));
    const Matrix x = gaussian_matrix(p, k, rng);
    const Matrix px = tangent_project(w, x).mat();
    CHECK((tangent_project(w, px).mat() - px).norm() <= 1e-12 * (1.0 + px.norm()));
    CHECK((px - project_via_basis(w.mat(), x)).norm() <= 1e-10 * (1.0 + x.norm()));
    CHECK(tangent_project(w, x).tangency_residual() <= 1e-10);
  }
}

TEST_CASE("tangent_project on the circle zeroes the radial part") {
  Matrix wm(2, 1);
  wm << 1.0, 0.0;
  const StiefelPoint w(wm);
  Matrix x(2, 1);
  x << 0.7, -0.4;
  const Matrix px = tangent_project(w, x).mat();
  CHECK(px(0, 0) == 0.0);
  CHECK(px(1, 0) == -0.4);
}

TEST_CASE("tangent_project is self-adjoint") {
  auto rng = make_engine(23);
  const StiefelPoint w(rand_orthonormal(6, 3, rng));
  for (int i = 0; i < 10; ++i) {
    const Matrix x = gaussian_matrix(6, 3, rng);
    const Matrix y = gaussian_matrix(6, 3, rng);
    const double lhs = (tangent_project(w, x).mat().array() * y.array()).sum();
    const double rhs = (x.array() * tangent_project(w, y).mat().array()).sum();
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
  }
}

TEST_CASE("tangent_project rejects mismatched shapes") {
  const StiefelPoint w = random_point(4, 2, 24);
  CHECK_THROWS_AS(tangent_project(w, Matrix::Zero(3, 2)), ShapeError);
}

TEST_CASE("retract of the zero tangent is the base point") {
  const StiefelPoint w = random_point(5, 2, 25);
  const TangentVector zero(w, Matrix::Zero(5, 2));
  CHECK((retract(w, zero).mat() - w.mat()).norm() == 0.0);
}

TEST_CASE("retract on the circle normalizes") {
  Matrix wm(2, 1);
  wm << 1.0, 0.0;
  const StiefelPoint w(wm);
  const double t = 0.3;
  Matrix x(2, 1);
  x << 0.0, t;
  const StiefelPoint r = retract(w, TangentVector(w, x));
  const double n = std::sqrt(1.0 + t * t);
  CHECK(r.mat()(0, 0) == doctest::Approx(1.0 / n).epsilon(1e-12));
  CHECK(r.mat()(1, 0) == doctest::Approx(t / n).epsilon(1e-12));
}

TEST_CASE("retract lands on the manifold and matches the polar oracle") {
  auto rng = make_engine(26);
  const StiefelPoint w(rand_orthonormal(5, 3, rng));
  const Matrix x = tangent_project(w, gaussian_matrix(5, 3, rng)).mat();
  const StiefelPoint r = retract(w, TangentVector(w, x));
  CHECK(r.manifold_residual() <= 1e-12);

  // Independent polar: (W+X) ((W+X)ᵀ(W+X))^{-1/2}.
  const Matrix a = w.mat() + x;
  Eigen::SelfAdjointEigenSolver<Matrix> es(a.transpose() * a);
  const Matrix oracle = a * es.eigenvectors() *
                        es.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
                        es.eigenvectors().transpose();
  CHECK((r.mat() - oracle).norm() <= 1e-10);
}

TEST_CASE("retract has identity differential at zero") {
  auto rng = make_engine(27);
  const StiefelPoint w(rand_orthonormal(6, 2, rng));
  const Matrix x = tangent_project(w, gaussian_matrix(6, 2, rng)).mat();
  const double t = 1e-5;
  const Matrix plus = retract(w, TangentVector(w, t * x)).mat();
  const Matrix minus = retract(w, TangentVector(w, -t * x)).mat();
  const Matrix fd = (plus - minus) / (2.0 * t);
  CHECK((fd - x).norm() <= 1e-6 * x.norm());
}

TEST_CASE("lift of the base point is zero") {
  const StiefelPoint w = random_point(4, 2, 28);
  CHECK(lift(w, w).mat().norm() == 0.0);
}

TEST_CASE("lift on the circle recovers the angular part") {
  Matrix wm(2, 1);
  wm << 1.0, 0.0;
  const StiefelPoint w(wm);
  const double t = 0.2;
  Matrix target(2, 1);
  target << std::cos(t), std::sin(t);
  const Matrix l = lift(w, StiefelPoint(target)).mat();
  CHECK(l(0, 0) == 0.0);
  CHECK(l(1, 0) == doctest::Approx(std::sin(t)).epsilon(1e-15));
}

TEST_CASE("lift inverts retract to second order") {
  auto rng = make_engine(29);
  const StiefelPoint w(rand_orthonormal(7, 3, rng));
  Matrix x = tangent_project(w, gaussian_matrix(7, 3, rng)).mat();
  x /= x.norm();
  const auto residual_rate = [&](double t) {
    const StiefelPoint moved = retract(w, TangentVector(w, t * x));
    return (lift(w, moved).mat() - t * x).norm() / t;
  };
  const double r2 = residual_rate(1e-2);
  const double r3 = residual_rate(1e-3);
  CHECK(r2 <= 1e-3);
  // residual/t is O(t), so a decade in t moves the rate by about a decade.
  CHECK(r2 / r3 > 20.0);
  CHECK(r2 / r3 < 500.0);
}

TEST_CASE("lift rejects mismatched shapes") {
  const StiefelPoint w = random_point(4, 2, 30);
  const StiefelPoint v = random_point(5, 2, 31);
  CHECK_THROWS_AS(lift(w, v), ShapeError);
}

TEST_CASE("check_on_manifold measures the constraint violation") {
  const StiefelPoint w = random_point(6, 3, 32);
  CHECK(check_on_manifold(w.mat()) <= 1e-12);
  CHECK(check_on_manifold(2.0 * Matrix::Identity(2, 2)) ==
        doctest::Approx(3.0 * std::sqrt(2.0)).epsilon(1e-14));
  CHECK(check_on_manifold(Matrix::Zero(3, 2)) ==
        doctest::Approx(std::sqrt(2.0)).epsilon(1e-14));
  CHECK_THROWS_AS(check_on_manifold(Matrix::Zero(2, 3)), ShapeError);
}

TEST_CASE("TangentVector checks shapes against its base") {
  const StiefelPoint w = random_point(4, 2, 33);
  CHECK_THROWS_AS(TangentVector(w, Matrix::Zero(4, 3)), ShapeError);
}

}  // TEST_SUITE
