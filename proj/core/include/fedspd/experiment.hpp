#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "fedspd/config.hpp"
#include "fedspd/data.hpp"
#include "fedspd/federation.hpp"
#include "fedspd/spdnet.hpp"

namespace fedspd {

enum class Mode { kCentralized, kFederated };

// Everything a batch run needs, resolved from a config file plus defaults.
struct ExperimentConfig {
  Mode mode = Mode::kFederated;
  std::vector<std::uint64_t> seeds{0};
  std::string out_dir = ".";
  std::string run_name;  // empty: derived from mode / aggregator

  SyntheticSpec synth;
  std::string dataset_path;  // when set, load this instead of generating

  std::vector<Index> hidden_dims;  // empty: dimension preset
  double epsilon = 0.0;            // <= 0: threshold preset

  // Centralized training loop.
  int max_epochs = 300;
  int early_stop_patience = 75;

  FederationConfig fed;  // also carries optimizer/scheduler settings

  std::string resolved_run_name() const;
  SpdNetConfig make_net_config(Index d0, int num_classes) const;
  void validate() const;  // throws ConfigError
};

// Hidden-dimension presets: 22 at d0 = 60, 18 at d0 = 64, otherwise
// ceil(d0 / 3) in the same ratio ballpark.
Index preset_hidden_dim(Index d0);
// Rectification threshold preset: 1e-2 at d0 = 64, otherwise 1e-1.
double preset_epsilon(Index d0);

// Maps config-file keys onto an ExperimentConfig, applying defaults and
// rejecting unknown keys, bad types, and inconsistent values (all with
// line numbers where applicable).
ExperimentConfig load_experiment_config(const std::string& path);
ExperimentConfig experiment_config_from(const ParsedConfig& raw);

// Synthetic data regenerates per seed; a dataset file is seed-independent.
LabeledDataset build_dataset(const ExperimentConfig& cfg, std::uint64_t seed);

// Partition into clients, then split each client 75/10/15.
// Client classes with fewer than 3 items land entirely in that client's
// train split (label-skewed partitions make tiny per-client classes normal).
std::vector<ClientState> build_clients(const LabeledDataset& data, int num_clients, double alpha,
                                       bool client_shift, std::uint64_t seed);

struct EpochRecord {
  int epoch = 0;  // 1-based
  double lr = 0.0;
  double train_loss = 0.0;  // mean over the epoch's minibatches
  double val_loss = 0.0;
  double val_macro_f1 = 0.0;
};

struct CentralizedResult {
  ModelParams final_params;  // best-validation checkpoint
  std::vector<EpochRecord> records;
  int stop_epoch = 0;  // last epoch actually run
  int best_epoch = 0;
  double test_loss = 0.0;
  double test_macro_f1 = 0.0;
};

CentralizedResult run_centralized(const ExperimentConfig& cfg, std::uint64_t seed);
FederationResult run_federated(const ExperimentConfig& cfg, std::uint64_t seed);

struct SeedOutcome {
  std::uint64_t seed = 0;
  double test_macro_f1 = 0.0;
  double final_val_macro_f1 = 0.0;
  int rows = 0;  // rounds or epochs recorded
};

struct ExperimentOutcome {
  std::vector<SeedOutcome> per_seed;
  double mean_test_f1 = 0.0;
  double std_test_f1 = 0.0;  // sample std over seeds; 0 for a single seed
  std::vector<std::string> csv_paths;
  std::string summary_path;
};

// Runs every seed, writes one CSV per seed plus a summary file under
// cfg.out_dir, and logs one line per seed to `log` unless quiet.
ExperimentOutcome run_experiment(const ExperimentConfig& cfg, bool quiet, std::ostream& log);

struct CompareOutcome {
  double mean_abs_val_gap = 0.0;  // |proj - rl| val macro-F1, mean over rounds and seeds
  double proj_mean_test_f1 = 0.0;
  double rl_mean_test_f1 = 0.0;
  double naive_mean_test_f1 = 0.0;
  std::vector<std::string> csv_paths;
  std::string summary_path;
};

// Runs proj_avg, rl_avg and naive_avg on identical data, initialization and
// seeds; writes one merged CSV per seed with a column group per aggregator.
CompareOutcome compare_aggregators(const ExperimentConfig& cfg, bool quiet, std::ostream& log);

// CSV helpers shared by the writers and the tools.
std::string csv_double(double x);
void write_federated_csv(const std::string& path, const std::vector<RoundRecord>& records);
void write_centralized_csv(const std::string& path, const std::vector<EpochRecord>& records);

}  // namespace fedspd
