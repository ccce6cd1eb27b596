#include "fedspd/stiefel.hpp"

#include <cassert>
#include <sstream>
#include <utility>

namespace fedspd {

namespace {
constexpr double kMembershipTol = 1e-8;
}

StiefelPoint::StiefelPoint(Matrix w) : w_(std::move(w)) {
  if (w_.rows() < w_.cols() || w_.cols() < 1) {
    std::ostringstream os;
    os << "StiefelPoint: need p >= k >= 1, got " << w_.rows() << "x" << w_.cols();
    throw ShapeError(os.str());
  }
  require_finite(w_, "StiefelPoint");
  const double res = manifold_residual();
  if (res > kMembershipTol) {
    std::ostringstream os;
    os << "StiefelPoint: off manifold, ||W^T W - I||_F = " << res;
    throw DomainError(os.str());
  }
}

StiefelPoint::StiefelPoint(Matrix w, UncheckedTag) : w_(std::move(w)) {}

StiefelPoint StiefelPoint::unchecked(Matrix w) {
  return StiefelPoint(std::move(w), UncheckedTag{});
}

double StiefelPoint::manifold_residual() const { return check_on_manifold(w_); }

TangentVector::TangentVector(StiefelPoint base, Matrix x)
    : base_(std::move(base)), x_(std::move(x)) {
  if (x_.rows() != base_.rows() || x_.cols() != base_.cols()) {
    std::ostringstream os;
    os << "TangentVector: shape " << x_.rows() << "x" << x_.cols()
       << " does not match base " << base_.rows() << "x" << base_.cols();
    throw ShapeError(os.str());
  }
  assert(tangency_residual() <= 1e-8 * (1.0 + x_.norm()) && "TangentVector: not tangent at base");
}

double TangentVector::tangency_residual() const {
  const Matrix s = base_.mat().transpose() * x_;
  return (s + s.transpose()).norm();
}

TangentVector tangent_project(const StiefelPoint& w, const Matrix& x) {
  if (x.rows() != w.rows() || x.cols() != w.cols()) {
    std::ostringstream os;
    os << "tangent_project: shape " << x.rows() << "x" << x.cols()
       << " does not match base " << w.rows() << "x" << w.cols();
    throw ShapeError(os.str());
  }
  const Matrix s = w.mat().transpose() * x;
  return TangentVector(w, x - 0.5 * w.mat() * (s + s.transpose()));
}

StiefelPoint retract(const StiefelPoint& w, const TangentVector& x) {
  if (x.mat().rows() != w.rows() || x.mat().cols() != w.cols()) {
    throw ShapeError("retract: tangent and base shapes differ");
  }
  // R_W(0) = W holds exactly; skipping the polar step keeps no-op updates
  // (zero gradients, consensus aggregation) bitwise stable.
  if ((x.mat().array() == 0.0).all()) return w;
  return StiefelPoint(polar_factor(w.mat() + x.mat()));
}

TangentVector lift(const StiefelPoint& w, const StiefelPoint& wbar) {
  if (wbar.rows() != w.rows() || wbar.cols() != w.cols()) {
    throw ShapeError("lift: base and target shapes differ");
  }
  return tangent_project(w, wbar.mat() - w.mat());
}

double check_on_manifold(const Matrix& w) {
  if (w.rows() < w.cols()) {
    throw ShapeError("check_on_manifold: need p >= k");
  }
  const Index k = w.cols();
  return (w.transpose() * w - Matrix::Identity(k, k)).norm();
}

}  // namespace fedspd
