#include "fedspd/federation.hpp"

#include <algorithm>
#include <chrono>
#include <exception>
#include <numeric>
#include <thread>

#include "fedspd/errors.hpp"
#include "fedspd/rng.hpp"

namespace fedspd {

Aggregator parse_aggregator(const std::string& name) {
  if (name == "proj_avg") return Aggregator::kProjAvg;
  if (name == "rl_avg") return Aggregator::kRlAvg;
  if (name == "naive_avg") return Aggregator::kNaiveAvg;
  throw ConfigError("unknown aggregator '" + name + "' (expected proj_avg, rl_avg or naive_avg)");
}

std::string aggregator_name(Aggregator agg) {
  switch (agg) {
    case Aggregator::kProjAvg: return "proj_avg";
    case Aggregator::kRlAvg: return "rl_avg";
    case Aggregator::kNaiveAvg: return "naive_avg";
  }
  return "?";
}

void FederationConfig::validate() const {
  if (num_clients < 1) throw ConfigError("federation: need at least one client");
  if (clients_per_round < 0 || resolved_clients_per_round() > num_clients)
    throw ConfigError("federation: clients_per_round must lie in [1, num_clients]");
  if (rounds < 1) throw ConfigError("federation: rounds must be at least 1");
  if (local_epochs < 1) throw ConfigError("federation: local_epochs must be at least 1");
  if (batch_size < 1) throw ConfigError("federation: batch_size must be at least 1");
  if (!(adam.lr >= 0.0)) throw ConfigError("federation: learning rate must be nonnegative");
  if (patience < 1) throw ConfigError("federation: patience must be at least 1");
  if (!(factor > 0.0 && factor < 1.0)) throw ConfigError("federation: factor must be in (0,1)");
  if (max_threads < 0) throw ConfigError("federation: max_threads must be nonnegative");
}

std::vector<int> sample_clients(int n, int m, std::mt19937_64& rng) {
  if (m < 1 || m > n) throw ConfigError("sample_clients: need 1 <= m <= n");
  std::vector<int> ids(static_cast<std::size_t>(n));
  std::iota(ids.begin(), ids.end(), 0);
  for (int i = 0; i < m; ++i) {
    std::uniform_int_distribution<int> pick(i, n - 1);
    std::swap(ids[static_cast<std::size_t>(i)], ids[static_cast<std::size_t>(pick(rng))]);
  }
  ids.resize(static_cast<std::size_t>(m));
  std::sort(ids.begin(), ids.end());
  return ids;
}

ModelParams local_train(const ModelParams& theta, const LabeledDataset& train_set,
                        const SpdNetConfig& net, const AdamHyper& adam, int epochs,
                        int batch_size, std::mt19937_64& rng) {
  if (train_set.empty()) throw DomainError("local_train: empty training set");
  if (epochs < 1 || batch_size < 1)
    throw ConfigError("local_train: epochs and batch_size must be positive");
  theta.validate_shapes(net);

  ModelParams params = theta;
  std::vector<AdamState> w_states;
  w_states.reserve(params.bimap_weights.size());
  for (const auto& w : params.bimap_weights) w_states.push_back(AdamState::zeros(w.rows(), w.cols()));
  AdamState xi_state = AdamState::zeros(params.head_weight.rows(), params.head_weight.cols());
  AdamState beta_state = AdamState::zeros(params.head_bias.size(), 1);

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<const Example*> batch;
  batch.reserve(static_cast<std::size_t>(batch_size));

  for (int epoch = 0; epoch < epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(batch_size)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(batch_size));
      batch.clear();
      for (std::size_t i = start; i < stop; ++i) batch.push_back(&train_set.items[order[i]]);

      const BatchResult res = batch_loss_and_grads(batch, params, net);
      for (std::size_t l = 0; l < params.bimap_weights.size(); ++l)
        params.bimap_weights[l] =
            adam_step_stiefel(params.bimap_weights[l], res.grads.bimap_weights[l], w_states[l], adam);
      params.head_weight = adam_step_euclidean(params.head_weight, res.grads.head_weight, xi_state, adam);
      params.head_bias = adam_step_euclidean(params.head_bias, res.grads.head_bias, beta_state, adam);
    }
  }
  return params;
}

namespace {

std::vector<double> normalized_weights(std::size_t n, const std::vector<double>* weights) {
  if (weights == nullptr) return std::vector<double>(n, 1.0 / static_cast<double>(n));
  if (weights->size() != n) throw AggregationError("aggregation weights length mismatch");
  double total = 0.0;
  for (double w : *weights) {
    if (!(w >= 0.0)) throw AggregationError("aggregation weights must be nonnegative");
    total += w;
  }
  if (!(total > 0.0)) throw AggregationError("aggregation weights sum to zero");
  std::vector<double> out = *weights;
  for (double& w : out) w /= total;
  return out;
}

}  // namespace

namespace {

template <typename T>
bool all_identical(const std::vector<T>& values, const Matrix& (*mat)(const T&)) {
  const Matrix& ref = mat(values.front());
  for (std::size_t i = 1; i < values.size(); ++i) {
    const Matrix& v = mat(values[i]);
    if (v.rows() != ref.rows() || v.cols() != ref.cols()) return false;
    if ((v.array() != ref.array()).any()) return false;
  }
  return true;
}

const Matrix& matrix_of(const Matrix& m) { return m; }
const Matrix& matrix_of_point(const StiefelPoint& p) { return p.mat(); }

}  // namespace

Matrix euclid_avg(const std::vector<Matrix>& values, const std::vector<double>* weights) {
  if (values.empty()) throw AggregationError("euclid_avg: empty client list");
  for (const auto& v : values)
    if (v.rows() != values.front().rows() || v.cols() != values.front().cols())
      throw ShapeError("euclid_avg: mismatched shapes");
  if (weights != nullptr) normalized_weights(values.size(), weights);  // validate even on the fast path
  // The mean of identical values is that value; skipping the sum keeps
  // consensus rounds bitwise stable for any client count.
  if (all_identical(values, matrix_of)) return values.front();
  if (weights == nullptr) {
    Matrix sum = values.front();
    for (std::size_t i = 1; i < values.size(); ++i) sum += values[i];
    return sum / static_cast<double>(values.size());
  }
  const auto w = normalized_weights(values.size(), weights);
  Matrix sum = w[0] * values.front();
  for (std::size_t i = 1; i < values.size(); ++i) sum += w[i] * values[i];
  return sum;
}

namespace {

Matrix stiefel_mean(const std::vector<StiefelPoint>& weights, const std::vector<double>* w) {
  if (weights.empty()) throw AggregationError("aggregation over an empty client list");
  std::vector<Matrix> mats;
  mats.reserve(weights.size());
  for (const auto& p : weights) mats.push_back(p.mat());
  return euclid_avg(mats, w);
}

}  // namespace

StiefelPoint proj_avg(const std::vector<StiefelPoint>& weights, const std::vector<double>* w) {
  if (weights.empty()) throw AggregationError("proj_avg: empty client list");
  if (w != nullptr) normalized_weights(weights.size(), w);
  // Singleton and consensus inputs are already the exact answer (the polar
  // projection fixes points of the manifold); bypassing the SVD avoids
  // injecting roundoff into rounds that change nothing.
  if (weights.size() == 1 || all_identical(weights, matrix_of_point)) return weights.front();
  return StiefelPoint(polar_factor(stiefel_mean(weights, w)));
}

StiefelPoint rl_avg(const StiefelPoint& global, const std::vector<StiefelPoint>& weights,
                    const std::vector<double>* w) {
  if (weights.empty()) throw AggregationError("rl_avg: empty client list");
  const auto wn = normalized_weights(weights.size(), w);
  Matrix mean = Matrix::Zero(global.rows(), global.cols());
  for (std::size_t i = 0; i < weights.size(); ++i)
    mean += wn[i] * lift(global, weights[i]).mat();
  return retract(global, tangent_project(global, mean));
}

std::pair<Matrix, double> naive_avg(const std::vector<StiefelPoint>& weights,
                                    const std::vector<double>* w) {
  Matrix mean = stiefel_mean(weights, w);
  const double residual = check_on_manifold(mean);
  return {std::move(mean), residual};
}

ModelParams aggregate(const std::vector<ModelParams>& locals, const ModelParams& global,
                      Aggregator agg, const std::vector<double>* weights) {
  if (locals.empty()) throw AggregationError("aggregate: empty client list");
  const std::size_t layers = global.bimap_weights.size();
  for (const auto& theta : locals)
    if (theta.bimap_weights.size() != layers)
      throw AggregationError("aggregate: client with a different layer count");

  ModelParams out;
  out.bimap_weights.reserve(layers);
  std::vector<StiefelPoint> layer_weights;
  for (std::size_t l = 0; l < layers; ++l) {
    layer_weights.clear();
    layer_weights.reserve(locals.size());
    for (const auto& theta : locals) layer_weights.push_back(theta.bimap_weights[l]);
    try {
      switch (agg) {
        case Aggregator::kProjAvg:
          out.bimap_weights.push_back(proj_avg(layer_weights, weights));
          break;
        case Aggregator::kRlAvg:
          out.bimap_weights.push_back(rl_avg(global.bimap_weights[l], layer_weights, weights));
          break;
        case Aggregator::kNaiveAvg:
          out.bimap_weights.push_back(StiefelPoint::unchecked(naive_avg(layer_weights, weights).first));
          break;
      }
    } catch (const Error& e) {
      throw AggregationError("stiefel layer " + std::to_string(l + 1) + ": " + e.what());
    }
  }

  std::vector<Matrix> xis, betas;
  xis.reserve(locals.size());
  betas.reserve(locals.size());
  for (const auto& theta : locals) {
    xis.push_back(theta.head_weight);
    betas.push_back(theta.head_bias);
  }
  out.head_weight = euclid_avg(xis, weights);
  out.head_bias = euclid_avg(betas, weights);
  return out;
}

EvalResult evaluate(const ModelParams& theta, const LabeledDataset& data,
                    const SpdNetConfig& net) {
  if (data.empty()) throw DomainError("evaluate: empty dataset");
  EvalResult res;
  std::vector<int> preds, labels;
  preds.reserve(data.size());
  labels.reserve(data.size());
  double loss = 0.0;
  for (const auto& ex : data.items) {
    auto [probs, tape] = model_forward(ex.sigma, theta, net);
    loss += cross_entropy(probs, ex.label);
    Index best = 0;
    probs.maxCoeff(&best);
    preds.push_back(static_cast<int>(best) + 1);
    labels.push_back(ex.label);
  }
  res.loss = loss / static_cast<double>(data.size());
  res.cm = confusion(preds, labels, net.num_classes);
  res.accuracy = accuracy(res.cm);
  res.macro_f1 = macro_f1(res.cm);
  res.micro_f1 = micro_f1(res.cm);
  return res;
}

namespace {

LabeledDataset pool_split(const std::vector<ClientState>& clients,
                          const LabeledDataset ClientState::*split) {
  LabeledDataset pooled;
  for (const auto& c : clients) {
    const LabeledDataset& part = c.*split;
    if (part.empty()) continue;
    if (pooled.items.empty()) {
      pooled.dim = part.dim;
      pooled.num_classes = part.num_classes;
    }
    pooled.items.insert(pooled.items.end(), part.items.begin(), part.items.end());
  }
  return pooled;
}

double max_residual(const ModelParams& theta) {
  double worst = 0.0;
  for (const auto& w : theta.bimap_weights) worst = std::max(worst, w.manifold_residual());
  return worst;
}

}  // namespace

FederationResult run_federation(const FederationConfig& cfg, const SpdNetConfig& net,
                                const std::vector<ClientState>& clients,
                                const ModelParams& init,
                                const std::function<void(const RoundRecord&)>& on_round) {
  cfg.validate();
  net.validate();
  init.validate_shapes(net);
  if (static_cast<int>(clients.size()) != cfg.num_clients)
    throw ConfigError("run_federation: clients list size differs from num_clients");
  for (std::size_t i = 0; i < clients.size(); ++i)
    if (clients[i].client_id != static_cast<int>(i))
      throw ConfigError("run_federation: client ids must be 0..N-1 in order");

  const LabeledDataset pooled_train = pool_split(clients, &ClientState::train);
  const LabeledDataset pooled_val = pool_split(clients, &ClientState::val);
  const LabeledDataset pooled_test = pool_split(clients, &ClientState::test);
  if (pooled_train.empty() || pooled_val.empty() || pooled_test.empty())
    throw ConfigError("run_federation: pooled train/val/test splits must all be nonempty");

  unsigned hw = std::thread::hardware_concurrency();
  if (hw == 0) hw = 1;
  const int thread_cap =
      std::max(1, cfg.max_threads > 0 ? cfg.max_threads : static_cast<int>(hw));

  ModelParams theta = init;
  PlateauScheduler sched(cfg.adam.lr, cfg.patience, cfg.factor);
  double lr = cfg.adam.lr;

  FederationResult result{theta, {}};
  result.records.reserve(static_cast<std::size_t>(cfg.rounds));

  for (int round = 1; round <= cfg.rounds; ++round) {
    auto server_rng = make_engine(cfg.seed, stream::kServer, static_cast<std::uint64_t>(round));
    const std::vector<int> selected =
        sample_clients(cfg.num_clients, cfg.resolved_clients_per_round(), server_rng);

    RoundRecord rec;
    rec.round = round;
    rec.lr = lr;

    // Clients with data, in ascending id order.
    std::vector<int> active;
    for (int id : selected) {
      if (clients[static_cast<std::size_t>(id)].train.empty())
        rec.skipped_ids.push_back(id);
      else
        active.push_back(id);
    }
    rec.participating_ids = active;
    if (active.empty())
      throw AggregationError("round " + std::to_string(round) +
                             ": every selected client has an empty training set");

    AdamHyper round_adam = cfg.adam;
    round_adam.lr = lr;

    std::vector<ModelParams> locals(active.size(), theta);
    std::vector<std::exception_ptr> failures(active.size());
    const auto train_one = [&](std::size_t slot) {
      const int id = active[slot];
      try {
        auto rng = make_engine(cfg.seed, stream::kClient, static_cast<std::uint64_t>(round),
                               static_cast<std::uint64_t>(id));
        locals[slot] = local_train(theta, clients[static_cast<std::size_t>(id)].train, net,
                                   round_adam, cfg.local_epochs, cfg.batch_size, rng);
      } catch (...) {
        failures[slot] = std::current_exception();
      }
    };
    if (thread_cap == 1 || active.size() == 1) {
      for (std::size_t slot = 0; slot < active.size(); ++slot) train_one(slot);
    } else {
      for (std::size_t start = 0; start < active.size();
           start += static_cast<std::size_t>(thread_cap)) {
        const std::size_t stop =
            std::min(active.size(), start + static_cast<std::size_t>(thread_cap));
        std::vector<std::thread> pool;
        pool.reserve(stop - start);
        for (std::size_t slot = start; slot < stop; ++slot)
          pool.emplace_back(train_one, slot);
        for (auto& th : pool) th.join();
      }
    }
    for (std::size_t slot = 0; slot < active.size(); ++slot) {
      if (failures[slot]) {
        try {
          std::rethrow_exception(failures[slot]);
        } catch (const Error& e) {
          throw Error("round " + std::to_string(round) + ", client " +
                      std::to_string(active[slot]) + ": " + e.what());
        }
      }
    }

    std::vector<double> sizes;
    const std::vector<double>* weights = nullptr;
    if (cfg.weighted) {
      sizes.reserve(active.size());
      for (int id : active)
        sizes.push_back(static_cast<double>(clients[static_cast<std::size_t>(id)].train.size()));
      weights = &sizes;
    }

    const auto t0 = std::chrono::steady_clock::now();
    try {
      theta = aggregate(locals, theta, cfg.aggregator, weights);
    } catch (const Error& e) {
      throw AggregationError("round " + std::to_string(round) + ": " + e.what());
    }
    const auto t1 = std::chrono::steady_clock::now();
    rec.agg_wall_ms =
        std::chrono::duration_cast<std::chrono::milliseconds>(t1 - t0).count();

    rec.max_manifold_residual = max_residual(theta);
    rec.train_loss = evaluate(theta, pooled_train, net).loss;
    const EvalResult val = evaluate(theta, pooled_val, net);
    rec.val_loss = val.loss;
    rec.val_macro_f1 = val.macro_f1;
    rec.test_macro_f1 = evaluate(theta, pooled_test, net).macro_f1;

    lr = sched.step(rec.val_macro_f1);

    result.records.push_back(rec);
    if (on_round) on_round(rec);
  }

  result.final_params = std::move(theta);
  return result;
}

}  // namespace fedspd
