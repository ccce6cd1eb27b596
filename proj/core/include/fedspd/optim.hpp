#pragma once

#include "fedspd/linalg.hpp"
#include "fedspd/stiefel.hpp"

namespace fedspd {

struct AdamHyper {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Per-parameter moment estimates. Vectors are handled as d x 1 matrices.
struct AdamState {
  Matrix m;
  Matrix v;  // entrywise >= 0
  long step_count = 0;

  static AdamState zeros(Index rows, Index cols);
};

// Bias-corrected Adam: m <- b1 m + (1-b1) g; v <- b2 v + (1-b2) g^2;
// param <- param - lr mhat / (sqrt(vhat) + eps). Mutates state.
Matrix adam_step_euclidean(const Matrix& param, const Matrix& grad, AdamState& state,
                           const AdamHyper& hyper);

// Projected Riemannian Adam on the Stiefel manifold: the ambient gradient is
// projected to the tangent space at W, moments live in the ambient chart (no
// transport between steps), the Adam direction is re-projected, and the step
// is taken with the polar retraction.
StiefelPoint adam_step_stiefel(const StiefelPoint& w, const Matrix& ambient_grad,
                               AdamState& state, const AdamHyper& hyper);

// ReduceLROnPlateau on a maximized metric: improvement means
// metric > best + min_delta; once `wait` exceeds `patience`, lr *= factor.
class PlateauScheduler {
 public:
  PlateauScheduler(double initial_lr, int patience, double factor, double min_delta = 1e-6);

  // Record one validation metric; returns the lr in effect afterwards.
  double step(double metric);

  double lr() const { return lr_; }
  double best_metric() const { return best_; }
  int wait() const { return wait_; }

 private:
  double lr_;
  int patience_;
  double factor_;
  double min_delta_;
  double best_;
  int wait_ = 0;
  bool has_best_ = false;
};

}  // namespace fedspd
