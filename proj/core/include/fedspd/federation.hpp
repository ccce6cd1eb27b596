#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "fedspd/data.hpp"
#include "fedspd/metrics.hpp"
#include "fedspd/optim.hpp"
#include "fedspd/spdnet.hpp"

namespace fedspd {

enum class Aggregator { kProjAvg, kRlAvg, kNaiveAvg };

Aggregator parse_aggregator(const std::string& name);  // throws ConfigError
std::string aggregator_name(Aggregator agg);

struct ClientState {
  int client_id = 0;
  LabeledDataset train;
  LabeledDataset val;
  LabeledDataset test;
};

struct FederationConfig {
  int num_clients = 4;        // N
  int clients_per_round = 0;  // M; 0 means full participation
  int rounds = 150;           // T
  int local_epochs = 2;       // E
  int batch_size = 64;
  Aggregator aggregator = Aggregator::kProjAvg;
  bool weighted = false;  // dataset-size weighting; off = uniform 1/|S_t| means
  std::uint64_t seed = 0;
  AdamHyper adam;
  int patience = 20;
  double factor = 0.5;
  int max_threads = 0;  // concurrent client training cap; 0 = hardware

  int resolved_clients_per_round() const {
    return clients_per_round > 0 ? clients_per_round : num_clients;
  }
  void validate() const;  // throws ConfigError
};

struct RoundRecord {
  int round = 0;  // 1-based
  double lr = 0.0;  // lr the clients trained with this round
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_macro_f1 = 0.0;
  double test_macro_f1 = 0.0;
  double max_manifold_residual = 0.0;  // max over layers, after aggregation
  long agg_wall_ms = 0;                // floor of the aggregation wall time
  std::vector<int> participating_ids;  // ascending
  std::vector<int> skipped_ids;        // selected but empty-train clients
};

// Uniform sample of m distinct ids from {0..n-1}, returned ascending.
std::vector<int> sample_clients(int n, int m, std::mt19937_64& rng);

// E epochs of shuffled mini-batch training from theta with fresh optimizer
// state; Stiefel weights stay on-manifold. Throws DomainError on an empty
// training set (callers decide whether to skip the client instead).
ModelParams local_train(const ModelParams& theta, const LabeledDataset& train_set,
                        const SpdNetConfig& net, const AdamHyper& adam, int epochs,
                        int batch_size, std::mt19937_64& rng);

// Arithmetic mean in list order; optional normalized weights.
// Throws AggregationError on an empty list.
Matrix euclid_avg(const std::vector<Matrix>& values, const std::vector<double>* weights = nullptr);

// Polar projection of the mean. A singleton is returned as-is (the
// projection of a manifold point is itself). Throws RankDeficientError when
// the mean loses column rank (antipodal clients).
StiefelPoint proj_avg(const std::vector<StiefelPoint>& weights,
                      const std::vector<double>* w = nullptr);

// Retraction at the global point of the mean of liftings.
StiefelPoint rl_avg(const StiefelPoint& global, const std::vector<StiefelPoint>& weights,
                    const std::vector<double>* w = nullptr);

// Raw Euclidean mean without projection, plus its manifold residual.
// Deliberately off-manifold; the baseline the geometry-aware rules beat.
std::pair<Matrix, double> naive_avg(const std::vector<StiefelPoint>& weights,
                                    const std::vector<double>* w = nullptr);

// Head via euclid_avg, every Stiefel layer via the selected rule.
// naive_avg produces unchecked (off-manifold) layer weights on purpose.
// Layer failures are rethrown as AggregationError naming the layer.
ModelParams aggregate(const std::vector<ModelParams>& locals, const ModelParams& global,
                      Aggregator agg, const std::vector<double>* weights = nullptr);

struct EvalResult {
  double loss = 0.0;
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  double micro_f1 = 0.0;
  ConfusionMatrix cm;
};

// Forward-only pass with argmax prediction (lowest index wins ties).
EvalResult evaluate(const ModelParams& theta, const LabeledDataset& data,
                    const SpdNetConfig& net);

struct FederationResult {
  ModelParams final_params;
  std::vector<RoundRecord> records;
};

// Algorithm: T rounds of sample -> local training (concurrent up to the
// thread cap) -> aggregate -> global evaluation on the unions of the client
// splits; the plateau scheduler follows pooled validation macro-F1.
// Deterministic given cfg.seed: per-client RNG streams depend only on
// (seed, round, client_id), and aggregation sums in client-id order.
FederationResult run_federation(const FederationConfig& cfg, const SpdNetConfig& net,
                                const std::vector<ClientState>& clients,
                                const ModelParams& init,
                                const std::function<void(const RoundRecord&)>& on_round = {});

}  // namespace fedspd
