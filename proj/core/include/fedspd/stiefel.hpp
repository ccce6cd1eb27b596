#pragma once

#include "fedspd/linalg.hpp"

namespace fedspd {

// Point on St(p,k) = { W in R^{p x k} : WᵀW = I_k }.
//
// Construction accepts residual ||WᵀW - I||_F up to 1e-8: training loops
// accumulate roundoff and never re-project between rounds except through
// aggregation, so the membership tolerance is looser than what a fresh
// polar factor produces (~1e-15). Diagnostics report the raw residual.
class StiefelPoint {
 public:
  explicit StiefelPoint(Matrix w);

  // Skips the membership check. For deliberately off-manifold baselines
  // (naive averaging) and tests only.
  static StiefelPoint unchecked(Matrix w);

  const Matrix& mat() const { return w_; }
  Index rows() const { return w_.rows(); }
  Index cols() const { return w_.cols(); }

  // Current ||WᵀW - I_k||_F.
  double manifold_residual() const;

 private:
  struct UncheckedTag {};
  StiefelPoint(Matrix w, UncheckedTag);

  Matrix w_;
};

// Tangent vector at a base point: WᵀX + XᵀW = 0.
// Tangency of X is asserted in debug builds, not enforced in release.
class TangentVector {
 public:
  TangentVector(StiefelPoint base, Matrix x);

  const Matrix& mat() const { return x_; }
  const StiefelPoint& base() const { return base_; }
  double tangency_residual() const;

 private:
  StiefelPoint base_;
  Matrix x_;
};

// Orthogonal projection onto the tangent space at W:
//   P_W(X) = X - (1/2) W (WᵀX + XᵀW).
TangentVector tangent_project(const StiefelPoint& w, const Matrix& x);

// Polar retraction R_W(X) = polar_factor(W + X).
// Propagates RankDeficientError when W + X loses column rank.
StiefelPoint retract(const StiefelPoint& w, const TangentVector& x);

// Lifting L_W(Wbar) = P_W(Wbar - W), the approximate inverse of retract.
TangentVector lift(const StiefelPoint& w, const StiefelPoint& wbar);

// Feasibility residual ||WᵀW - I_k||_F of an arbitrary p x k matrix.
double check_on_manifold(const Matrix& w);

}  // namespace fedspd
