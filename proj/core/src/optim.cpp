#include "fedspd/optim.hpp"

#include <cmath>

#include "fedspd/errors.hpp"

namespace fedspd {

AdamState AdamState::zeros(Index rows, Index cols) {
  AdamState s;
  s.m = Matrix::Zero(rows, cols);
  s.v = Matrix::Zero(rows, cols);
  return s;
}

namespace {

// Shared moment update; returns the bias-corrected step direction
// -lr * mhat / (sqrt(vhat) + eps).
Matrix adam_direction(const Matrix& grad, AdamState& state, const AdamHyper& hyper) {
  if (grad.rows() != state.m.rows() || grad.cols() != state.m.cols())
    throw ShapeError("adam step: gradient shape does not match optimizer state");
  state.m = hyper.beta1 * state.m + (1.0 - hyper.beta1) * grad;
  state.v = hyper.beta2 * state.v + (1.0 - hyper.beta2) * grad.cwiseProduct(grad);
  state.step_count += 1;
  const double bc1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(state.step_count));
  const double bc2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(state.step_count));
  const Matrix mhat = state.m / bc1;
  Matrix denom = (state.v / bc2).cwiseSqrt();
  denom.array() += hyper.eps;
  return -hyper.lr * mhat.cwiseQuotient(denom);
}

}  // namespace

Matrix adam_step_euclidean(const Matrix& param, const Matrix& grad, AdamState& state,
                           const AdamHyper& hyper) {
  if (param.rows() != grad.rows() || param.cols() != grad.cols())
    throw ShapeError("adam_step_euclidean: parameter/gradient shape mismatch");
  return param + adam_direction(grad, state, hyper);
}

StiefelPoint adam_step_stiefel(const StiefelPoint& w, const Matrix& ambient_grad,
                               AdamState& state, const AdamHyper& hyper) {
  const TangentVector xi = tangent_project(w, ambient_grad);
  const Matrix direction = adam_direction(xi.mat(), state, hyper);
  return retract(w, tangent_project(w, direction));
}

PlateauScheduler::PlateauScheduler(double initial_lr, int patience, double factor,
                                   double min_delta)
    : lr_(initial_lr), patience_(patience), factor_(factor), min_delta_(min_delta), best_(0.0) {
  if (!(initial_lr >= 0.0)) throw ConfigError("scheduler: initial lr must be nonnegative");
  if (patience < 1) throw ConfigError("scheduler: patience must be at least 1");
  if (!(factor > 0.0 && factor < 1.0)) throw ConfigError("scheduler: factor must be in (0,1)");
}

double PlateauScheduler::step(double metric) {
  if (!std::isfinite(metric)) throw DomainError("scheduler: non-finite validation metric");
  if (!has_best_ || metric > best_ + min_delta_) {
    best_ = metric;
    has_best_ = true;
    wait_ = 0;
  } else {
    wait_ += 1;
    if (wait_ > patience_) {
      lr_ *= factor_;
      wait_ = 0;
    }
  }
  return lr_;
}

}  // namespace fedspd
