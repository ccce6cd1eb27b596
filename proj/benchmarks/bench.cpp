#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "fedspd/federation.hpp"
#include "fedspd/linalg.hpp"
#include "fedspd/rng.hpp"
#include "fedspd/spdnet.hpp"
#include "fedspd/stiefel.hpp"

using namespace fedspd;

namespace {

Matrix gaussian(Index p, Index k, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss;
  Matrix m(p, k);
  for (Index i = 0; i < p; ++i)
    for (Index j = 0; j < k; ++j) m(i, j) = gauss(rng);
  return m;
}

// Clients at distance ~1e-2 from a shared base point, the regime the
// server sees once training settles.
std::vector<StiefelPoint> nearby_points(const StiefelPoint& base, int m, std::mt19937_64& rng) {
  std::vector<StiefelPoint> pts;
  pts.reserve(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) {
    const TangentVector xi = tangent_project(base, gaussian(base.rows(), base.cols(), rng));
    const TangentVector step(base, xi.mat() * (1e-2 / xi.mat().norm()));
    pts.push_back(retract(base, step));
  }
  return pts;
}

}  // namespace

static void BM_polar_factor(benchmark::State& state) {
  auto rng = make_engine(1);
  const Matrix a = gaussian(state.range(0), state.range(1), rng);
  for (auto _ : state) benchmark::DoNotOptimize(polar_factor(a));
}
BENCHMARK(BM_polar_factor)->Args({64, 18})->Args({128, 32});

static void BM_tangent_project(benchmark::State& state) {
  auto rng = make_engine(2);
  const StiefelPoint w(rand_orthonormal(64, 18, rng));
  const Matrix x = gaussian(64, 18, rng);
  for (auto _ : state) benchmark::DoNotOptimize(tangent_project(w, x));
}
BENCHMARK(BM_tangent_project);

static void BM_retract(benchmark::State& state) {
  auto rng = make_engine(3);
  const StiefelPoint w(rand_orthonormal(64, 18, rng));
  const TangentVector x = tangent_project(w, gaussian(64, 18, rng));
  for (auto _ : state) benchmark::DoNotOptimize(retract(w, x));
}
BENCHMARK(BM_retract);

static void BM_proj_avg(benchmark::State& state) {
  auto rng = make_engine(4);
  const StiefelPoint base(rand_orthonormal(64, 18, rng));
  const auto pts = nearby_points(base, static_cast<int>(state.range(0)), rng);
  for (auto _ : state) benchmark::DoNotOptimize(proj_avg(pts));
}
BENCHMARK(BM_proj_avg)->Arg(2)->Arg(8)->Arg(32);

static void BM_rl_avg(benchmark::State& state) {
  auto rng = make_engine(5);
  const StiefelPoint base(rand_orthonormal(64, 18, rng));
  const auto pts = nearby_points(base, static_cast<int>(state.range(0)), rng);
  for (auto _ : state) benchmark::DoNotOptimize(rl_avg(base, pts));
}
BENCHMARK(BM_rl_avg)->Arg(2)->Arg(8)->Arg(32);

static void BM_naive_avg(benchmark::State& state) {
  auto rng = make_engine(6);
  const StiefelPoint base(rand_orthonormal(64, 18, rng));
  const auto pts = nearby_points(base, static_cast<int>(state.range(0)), rng);
  for (auto _ : state) benchmark::DoNotOptimize(naive_avg(pts));
}
BENCHMARK(BM_naive_avg)->Arg(2)->Arg(8)->Arg(32);

static void BM_model_forward(benchmark::State& state) {
  const Index d0 = state.range(0);
  SpdNetConfig net;
  net.layer_dims = {d0, d0 == 64 ? 18 : 6};
  net.epsilon = d0 == 64 ? 1e-2 : 1e-1;
  net.num_classes = 4;
  auto rng = make_engine(7);
  const ModelParams params = init_params(net, rng);
  const SpdMatrix input = rand_spd(d0, 10.0, rng);
  for (auto _ : state) benchmark::DoNotOptimize(model_forward(input, params, net));
}
BENCHMARK(BM_model_forward)->Arg(16)->Arg(64);

static void BM_model_backward(benchmark::State& state) {
  const Index d0 = state.range(0);
  SpdNetConfig net;
  net.layer_dims = {d0, d0 == 64 ? 18 : 6};
  net.epsilon = d0 == 64 ? 1e-2 : 1e-1;
  net.num_classes = 4;
  auto rng = make_engine(8);
  const ModelParams params = init_params(net, rng);
  const SpdMatrix input = rand_spd(d0, 10.0, rng);
  const ForwardTape tape = model_forward(input, params, net).second;
  for (auto _ : state) benchmark::DoNotOptimize(model_backward(tape, 1, params, net));
}
BENCHMARK(BM_model_backward)->Arg(16)->Arg(64);

static void BM_aggregate_model(benchmark::State& state) {
  SpdNetConfig net;
  net.layer_dims = {64, 18};
  net.epsilon = 1e-2;
  net.num_classes = 4;
  auto rng = make_engine(9);
  const ModelParams global = init_params(net, rng);
  const int m = static_cast<int>(state.range(0));
  const auto pts = nearby_points(global.bimap_weights[0], m, rng);
  std::vector<ModelParams> locals(static_cast<std::size_t>(m), global);
  for (int i = 0; i < m; ++i) locals[static_cast<std::size_t>(i)].bimap_weights[0] = pts[static_cast<std::size_t>(i)];
  for (auto _ : state)
    benchmark::DoNotOptimize(aggregate(locals, global, Aggregator::kProjAvg));
}
BENCHMARK(BM_aggregate_model)->Arg(2)->Arg(8)->Arg(32);

BENCHMARK_MAIN();
