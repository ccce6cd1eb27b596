#include <doctest.h>

#include <cmath>

#include "fedspd/linalg.hpp"
#include "fedspd/optim.hpp"
#include "fedspd/rng.hpp"
#include "fedspd/stiefel.hpp"

using namespace fedspd;

TEST_SUITE("optim") {

TEST_CASE("euclidean step with a zero gradient changes nothing") {
  Matrix param(2, 2);
  param << 1.0, -2.0, 0.5, 3.0;
  AdamState state = AdamState::zeros(2, 2);
  AdamHyper hyper;
  const Matrix next = adam_step_euclidean(param, Matrix::Zero(2, 2), state, hyper);
  CHECK((next - param).norm() == 0.0);
  CHECK(state.step_count == 1);
}

TEST_CASE("first euclidean step is -lr g / (|g| + eps)") {
  Matrix param = Matrix::Zero(1, 1);
  Matrix grad(1, 1);
  grad << 2.0;
  AdamState state = AdamState::zeros(1, 1);
  AdamHyper hyper;
  hyper.lr = 0.1;
  const Matrix next = adam_step_euclidean(param, grad, state, hyper);
  const double expected = -hyper.lr * 2.0 / (2.0 + hyper.eps);
  CHECK(next(0, 0) == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("constant gradient keeps the step near -lr sign(g)") {
  // With g fixed, bias-corrected mhat = g and vhat = g^2 at every step.
  Matrix param = Matrix::Zero(1, 1);
  Matrix grad(1, 1);
  grad << -3.0;
  AdamState state = AdamState::zeros(1, 1);
  AdamHyper hyper;
  hyper.lr = 0.05;
  Matrix prev = param;
  for (int i = 0; i < 3; ++i) {
    const Matrix next = adam_step_euclidean(prev, grad, state, hyper);
    CHECK(std::abs(next(0, 0) - prev(0, 0)) == doctest::Approx(hyper.lr).epsilon(1e-6));
    CHECK(next(0, 0) > prev(0, 0));  // moving against the negative gradient
    prev = next;
  }
}

TEST_CASE("euclidean step validates shapes") {
  AdamState state = AdamState::zeros(2, 2);
  AdamHyper hyper;
  CHECK_THROWS_AS(adam_step_euclidean(Matrix::Zero(2, 2), Matrix::Zero(2, 1), state, hyper),
                  ShapeError);
}

TEST_CASE("stiefel step ignores the normal component of the gradient") {
  auto rng = make_engine(70);
  const StiefelPoint w(rand_orthonormal(5, 2, rng));
  AdamHyper hyper;

  AdamState zero_state = AdamState::zeros(5, 2);
  const StiefelPoint unchanged = adam_step_stiefel(w, Matrix::Zero(5, 2), zero_state, hyper);
  CHECK((unchanged.mat() - w.mat()).norm() == 0.0);

  // W itself is normal at W, so its projection vanishes (up to the roundoff
  // in WᵀW - I) and the point stays put.
  AdamState normal_state = AdamState::zeros(5, 2);
  const StiefelPoint still = adam_step_stiefel(w, w.mat(), normal_state, hyper);
  CHECK((still.mat() - w.mat()).norm() <= 1e-10);
}

TEST_CASE("stiefel step on the circle composes project, scale, retract") {
  Matrix wm(2, 1);
  wm << 1.0, 0.0;
  const StiefelPoint w(wm);
  Matrix grad(2, 1);
  grad << 0.0, 0.8;  // already tangent
  AdamState state = AdamState::zeros(2, 1);
  AdamHyper hyper;
  hyper.lr = 0.1;
  const StiefelPoint next = adam_step_stiefel(w, grad, state, hyper);

  const double step = -hyper.lr * 0.8 / (0.8 + hyper.eps);
  const double n = std::sqrt(1.0 + step * step);
  CHECK(next.mat()(0, 0) == doctest::Approx(1.0 / n).epsilon(1e-12));
  CHECK(next.mat()(1, 0) == doctest::Approx(step / n).epsilon(1e-12));
}

TEST_CASE("stiefel iterates stay on the manifold") {
  auto rng = make_engine(71);
  StiefelPoint w(rand_orthonormal(8, 3, rng));
  AdamState state = AdamState::zeros(8, 3);
  AdamHyper hyper;
  hyper.lr = 1e-2;
  for (int i = 0; i < 200; ++i) {
    w = adam_step_stiefel(w, gaussian_matrix(8, 3, rng), state, hyper);
  }
  CHECK(w.manifold_residual() <= 1e-8);
}

TEST_CASE("stiefel displacement scales linearly with lr") {
  auto rng = make_engine(72);
  const StiefelPoint w(rand_orthonormal(6, 2, rng));
  const Matrix grad = gaussian_matrix(6, 2, rng);
  const auto displacement = [&](double lr) {
    AdamState state = AdamState::zeros(6, 2);
    AdamHyper hyper;
    hyper.lr = lr;
    return (adam_step_stiefel(w, grad, state, hyper).mat() - w.mat()).norm();
  };
  const double d2 = displacement(1e-2);
  const double d3 = displacement(1e-3);
  const double d4 = displacement(1e-4);
  CHECK(d2 / d3 == doctest::Approx(10.0).epsilon(0.05));
  CHECK(d3 / d4 == doctest::Approx(10.0).epsilon(0.05));
}

TEST_CASE("optimizer updates are bitwise reproducible") {
  auto run = [] {
    auto rng = make_engine(73);
    StiefelPoint w(rand_orthonormal(5, 2, rng));
    AdamState state = AdamState::zeros(5, 2);
    AdamHyper hyper;
    hyper.lr = 3e-3;
    for (int i = 0; i < 20; ++i) w = adam_step_stiefel(w, gaussian_matrix(5, 2, rng), state, hyper);
    return w.mat();
  };
  CHECK((run() - run()).norm() == 0.0);
}

TEST_CASE("scheduler holds lr while the metric improves") {
  PlateauScheduler sched(1e-3, 2, 0.5);
  CHECK(sched.step(0.1) == doctest::Approx(1e-3));
  CHECK(sched.step(0.2) == doctest::Approx(1e-3));
  CHECK(sched.step(0.3) == doctest::Approx(1e-3));
  CHECK(sched.best_metric() == doctest::Approx(0.3));
  CHECK(sched.wait() == 0);
}

TEST_CASE("scheduler decays on the fourth flat call with patience two") {
  PlateauScheduler sched(1e-3, 2, 0.5);
  CHECK(sched.step(0.5) == doctest::Approx(1e-3));  // sets the best
  CHECK(sched.step(0.5) == doctest::Approx(1e-3));  // wait = 1
  CHECK(sched.step(0.5) == doctest::Approx(1e-3));  // wait = 2
  CHECK(sched.step(0.5) == doctest::Approx(5e-4));  // wait = 3 > patience
  CHECK(sched.wait() == 0);
}

TEST_CASE("scheduler applies the factor cumulatively") {
  PlateauScheduler sched(1.0, 1, 0.5);
  sched.step(0.5);
  sched.step(0.5);
  CHECK(sched.step(0.5) == doctest::Approx(0.5));
  sched.step(0.5);
  CHECK(sched.step(0.5) == doctest::Approx(0.25));
}

TEST_CASE("scheduler ignores sub-threshold improvements") {
  PlateauScheduler sched(1.0, 1, 0.5, 1e-6);
  sched.step(0.5);
  sched.step(0.5 + 5e-7);  // below min_delta: counts as flat
  CHECK(sched.wait() == 1);
  sched.step(0.5 + 2e-6);  // real improvement resets the counter
  CHECK(sched.wait() == 0);
  CHECK(sched.lr() == doctest::Approx(1.0));
}

TEST_CASE("scheduler rejects bad arguments and metrics") {
  CHECK_THROWS_AS(PlateauScheduler(-1.0, 2, 0.5), ConfigError);
  CHECK_THROWS_AS(PlateauScheduler(1.0, 0, 0.5), ConfigError);
  CHECK_THROWS_AS(PlateauScheduler(1.0, 2, 1.5), ConfigError);
  PlateauScheduler sched(1.0, 2, 0.5);
  CHECK_THROWS_AS(sched.step(std::nan("")), DomainError);
}

}  // TEST_SUITE
