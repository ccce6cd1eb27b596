#include "fedspd/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <ostream>

#include "fedspd/errors.hpp"
#include "fedspd/metrics.hpp"
#include "fedspd/optim.hpp"
#include "fedspd/rng.hpp"

namespace fedspd {

Index preset_hidden_dim(Index d0) {
  if (d0 == 60) return 22;
  if (d0 == 64) return 18;
  return (d0 + 2) / 3;
}

double preset_epsilon(Index d0) { return d0 == 64 ? 1e-2 : 1e-1; }

std::string ExperimentConfig::resolved_run_name() const {
  if (!run_name.empty()) return run_name;
  return mode == Mode::kFederated ? "federated_" + aggregator_name(fed.aggregator)
                                  : std::string("centralized");
}

SpdNetConfig ExperimentConfig::make_net_config(Index d0, int num_classes) const {
  SpdNetConfig net;
  net.layer_dims.push_back(d0);
  if (hidden_dims.empty()) {
    net.layer_dims.push_back(preset_hidden_dim(d0));
  } else {
    for (Index d : hidden_dims) net.layer_dims.push_back(d);
  }
  net.epsilon = epsilon > 0.0 ? epsilon : preset_epsilon(d0);
  net.num_classes = num_classes;
  net.validate();
  return net;
}

void ExperimentConfig::validate() const {
  if (seeds.empty()) throw ConfigError("experiment: seed list must be nonempty");
  if (out_dir.empty()) throw ConfigError("experiment: out_dir must be nonempty");
  if (dataset_path.empty()) synth.validate();
  if (mode == Mode::kFederated) {
    fed.validate();
  } else {
    if (max_epochs < 1) throw ConfigError("experiment: max_epochs must be at least 1");
    if (early_stop_patience < 1)
      throw ConfigError("experiment: early_stop_patience must be at least 1");
    if (!(fed.adam.lr >= 0.0)) throw ConfigError("experiment: learning rate must be nonnegative");
    if (fed.batch_size < 1) throw ConfigError("experiment: batch_size must be at least 1");
  }
}

ExperimentConfig load_experiment_config(const std::string& path) {
  return experiment_config_from(ParsedConfig::from_file(path));
}

ExperimentConfig experiment_config_from(const ParsedConfig& raw) {
  static const std::vector<std::string> kKnown = {
      "mode", "seeds", "out_dir", "run_name",
      "data.d0", "data.classes", "data.trials_per_class", "data.wishart_dof",
      "data.condition", "data.alpha", "data.client_shift", "data.dataset_path",
      "model.hidden_dims", "model.epsilon",
      "train.lr", "train.batch", "train.patience", "train.factor",
      "train.max_epochs", "train.early_stop_patience",
      "federation.clients", "federation.clients_per_round", "federation.rounds",
      "federation.local_epochs", "federation.aggregator", "federation.weighted",
      "federation.max_threads"};
  raw.reject_unknown(kKnown);

  ExperimentConfig cfg;

  const std::string mode = raw.require_str("mode");
  if (mode == "centralized") {
    cfg.mode = Mode::kCentralized;
  } else if (mode == "federated") {
    cfg.mode = Mode::kFederated;
  } else {
    throw ConfigError(raw.origin() + ":" + std::to_string(raw.line_of("mode")) +
                      ": mode must be 'centralized' or 'federated', got '" + mode + "'");
  }

  cfg.seeds = raw.u64_list("seeds", {0});
  cfg.out_dir = raw.str("out_dir", ".");
  cfg.run_name = raw.str("run_name", "");

  cfg.synth.d0 = raw.integer("data.d0", 12);
  cfg.synth.num_classes = static_cast<int>(raw.integer("data.classes", 2));
  cfg.synth.trials_per_class = static_cast<int>(raw.integer("data.trials_per_class", 100));
  cfg.synth.wishart_dof = static_cast<int>(raw.integer("data.wishart_dof", 0));
  cfg.synth.condition_target = raw.real("data.condition", 10.0);
  cfg.synth.alpha = raw.real("data.alpha", 1.0);
  cfg.synth.client_shift = raw.flag("data.client_shift", false);
  cfg.dataset_path = raw.str("data.dataset_path", "");

  for (long d : raw.int_list("model.hidden_dims", {})) {
    if (d < 1)
      throw ConfigError(raw.origin() + ":" + std::to_string(raw.line_of("model.hidden_dims")) +
                        ": hidden dimensions must be positive");
    cfg.hidden_dims.push_back(d);
  }
  cfg.epsilon = raw.real("model.epsilon", 0.0);
  if (raw.has("model.epsilon") && !(cfg.epsilon > 0.0))
    throw ConfigError(raw.origin() + ":" + std::to_string(raw.line_of("model.epsilon")) +
                      ": epsilon must be positive");

  cfg.fed.adam.lr = raw.real("train.lr", 1e-3);
  cfg.fed.batch_size = static_cast<int>(raw.integer("train.batch", 64));
  cfg.fed.patience = static_cast<int>(raw.integer("train.patience", 20));
  cfg.fed.factor = raw.real("train.factor", 0.5);
  cfg.max_epochs = static_cast<int>(raw.integer("train.max_epochs", 300));
  cfg.early_stop_patience = static_cast<int>(raw.integer("train.early_stop_patience", 75));

  cfg.fed.num_clients = static_cast<int>(raw.integer("federation.clients", 4));
  cfg.fed.clients_per_round = static_cast<int>(raw.integer("federation.clients_per_round", 0));
  cfg.fed.rounds = static_cast<int>(raw.integer("federation.rounds", 150));
  cfg.fed.local_epochs = static_cast<int>(raw.integer("federation.local_epochs", 2));
  const std::string agg = raw.str("federation.aggregator", "proj_avg");
  try {
    cfg.fed.aggregator = parse_aggregator(agg);
  } catch (const ConfigError& e) {
    const int line = raw.line_of("federation.aggregator");
    throw ConfigError(raw.origin() + ":" + std::to_string(line) + ": " + e.what());
  }
  cfg.fed.weighted = raw.flag("federation.weighted", false);
  cfg.fed.max_threads = static_cast<int>(raw.integer("federation.max_threads", 0));

  cfg.validate();
  return cfg;
}

LabeledDataset build_dataset(const ExperimentConfig& cfg, std::uint64_t seed) {
  if (!cfg.dataset_path.empty()) return load_dataset(cfg.dataset_path);
  SyntheticSpec spec = cfg.synth;
  spec.seed = seed;
  return gen_synthetic(spec);
}

namespace {

// Per-client 75/10/15 split; classes a client holds fewer than 3 of stay in
// its train split whole.
void split_client(const LabeledDataset& part, std::mt19937_64&& rng, ClientState& client) {
  for (auto* piece : {&client.train, &client.val, &client.test}) {
    piece->dim = part.dim;
    piece->num_classes = part.num_classes;
    piece->provenance = part.provenance;
  }
  const SplitFractions f;
  for (int c = 1; c <= part.num_classes; ++c) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < part.items.size(); ++i)
      if (part.items[i].label == c) idx.push_back(i);
    if (idx.empty()) continue;
    if (idx.size() < 3) {
      for (std::size_t i : idx) client.train.items.push_back(part.items[i]);
      continue;
    }
    std::shuffle(idx.begin(), idx.end(), rng);
    const auto sizes = largest_remainder(static_cast<long>(idx.size()), {f.train, f.val, f.test});
    std::size_t cursor = 0;
    LabeledDataset* pieces[3] = {&client.train, &client.val, &client.test};
    for (int p = 0; p < 3; ++p)
      for (long j = 0; j < sizes[static_cast<std::size_t>(p)]; ++j)
        pieces[p]->items.push_back(part.items[idx[cursor++]]);
  }
}

}  // namespace

std::vector<ClientState> build_clients(const LabeledDataset& data, int num_clients, double alpha,
                                       bool client_shift, std::uint64_t seed) {
  auto part_rng = make_engine(seed, stream::kPartition);
  const auto parts = partition_clients(data, num_clients, alpha, client_shift, part_rng);
  std::vector<ClientState> clients(parts.size());
  for (std::size_t i = 0; i < parts.size(); ++i) {
    clients[i].client_id = static_cast<int>(i);
    split_client(parts[i], make_engine(seed, stream::kSplit, i), clients[i]);
  }
  return clients;
}

CentralizedResult run_centralized(const ExperimentConfig& cfg, std::uint64_t seed) {
  const LabeledDataset data = build_dataset(cfg, seed);
  auto split_rng = make_engine(seed, stream::kSplit);
  const DataSplit split = stratified_split(data, SplitFractions{}, split_rng);
  const SpdNetConfig net = cfg.make_net_config(data.dim, data.num_classes);
  auto init_rng = make_engine(seed, stream::kInit);
  ModelParams params = init_params(net, init_rng);

  std::vector<AdamState> w_states;
  for (const auto& w : params.bimap_weights) w_states.push_back(AdamState::zeros(w.rows(), w.cols()));
  AdamState xi_state = AdamState::zeros(params.head_weight.rows(), params.head_weight.cols());
  AdamState beta_state = AdamState::zeros(params.head_bias.size(), 1);

  PlateauScheduler sched(cfg.fed.adam.lr, cfg.fed.patience, cfg.fed.factor);
  double lr = cfg.fed.adam.lr;

  auto train_rng = make_engine(seed, stream::kServer, 0);
  std::vector<std::size_t> order(split.train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  CentralizedResult result;
  result.final_params = params;
  double best = std::numeric_limits<double>::lowest();
  int wait = 0;

  std::vector<const Example*> batch;
  batch.reserve(static_cast<std::size_t>(cfg.fed.batch_size));
  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), train_rng);
    AdamHyper hyper = cfg.fed.adam;
    hyper.lr = lr;
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(cfg.fed.batch_size)) {
      const std::size_t stop =
          std::min(order.size(), start + static_cast<std::size_t>(cfg.fed.batch_size));
      batch.clear();
      for (std::size_t i = start; i < stop; ++i)
        batch.push_back(&split.train.items[order[i]]);
      const BatchResult res = batch_loss_and_grads(batch, params, net);
      loss_sum += res.loss * static_cast<double>(batch.size());
      for (std::size_t l = 0; l < params.bimap_weights.size(); ++l)
        params.bimap_weights[l] =
            adam_step_stiefel(params.bimap_weights[l], res.grads.bimap_weights[l], w_states[l], hyper);
      params.head_weight =
          adam_step_euclidean(params.head_weight, res.grads.head_weight, xi_state, hyper);
      params.head_bias =
          adam_step_euclidean(params.head_bias, res.grads.head_bias, beta_state, hyper);
    }

    const EvalResult val = evaluate(params, split.val, net);
    result.records.push_back({epoch, lr, loss_sum / static_cast<double>(split.train.size()),
                              val.loss, val.macro_f1});
    result.stop_epoch = epoch;
    lr = sched.step(val.macro_f1);

    if (val.macro_f1 > best + 1e-6) {
      best = val.macro_f1;
      result.final_params = params;
      result.best_epoch = epoch;
      wait = 0;
    } else if (++wait > cfg.early_stop_patience) {
      break;
    }
  }

  const EvalResult test = evaluate(result.final_params, split.test, net);
  result.test_loss = test.loss;
  result.test_macro_f1 = test.macro_f1;
  return result;
}

FederationResult run_federated(const ExperimentConfig& cfg, std::uint64_t seed) {
  const LabeledDataset data = build_dataset(cfg, seed);
  const auto clients = build_clients(data, cfg.fed.num_clients, cfg.synth.alpha,
                                     cfg.synth.client_shift, seed);
  const SpdNetConfig net = cfg.make_net_config(data.dim, data.num_classes);
  auto init_rng = make_engine(seed, stream::kInit);
  const ModelParams init = init_params(net, init_rng);
  FederationConfig fed = cfg.fed;
  fed.seed = seed;
  return run_federation(fed, net, clients, init);
}

std::string csv_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

namespace {

std::string join_ids(const std::vector<int>& ids) {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) out += ';';
    out += std::to_string(ids[i]);
  }
  return out;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot open output file " + path);
  return out;
}

}  // namespace

void write_federated_csv(const std::string& path, const std::vector<RoundRecord>& records) {
  auto out = open_out(path);
  out << "round,lr,train_loss,val_loss,val_macro_f1,test_macro_f1,"
         "max_manifold_residual,agg_wall_ms,participating_ids\n";
  for (const auto& r : records) {
    out << r.round << ',' << csv_double(r.lr) << ',' << csv_double(r.train_loss) << ','
        << csv_double(r.val_loss) << ',' << csv_double(r.val_macro_f1) << ','
        << csv_double(r.test_macro_f1) << ',' << csv_double(r.max_manifold_residual) << ','
        << r.agg_wall_ms << ',' << join_ids(r.participating_ids) << '\n';
  }
  if (!out) throw Error("write failure on " + path);
}

void write_centralized_csv(const std::string& path, const std::vector<EpochRecord>& records) {
  auto out = open_out(path);
  out << "epoch,lr,train_loss,val_loss,val_macro_f1\n";
  for (const auto& r : records) {
    out << r.epoch << ',' << csv_double(r.lr) << ',' << csv_double(r.train_loss) << ','
        << csv_double(r.val_loss) << ',' << csv_double(r.val_macro_f1) << '\n';
  }
  if (!out) throw Error("write failure on " + path);
}

namespace {

std::pair<double, double> mean_std(const std::vector<double>& xs) {
  if (xs.empty()) return {0.0, 0.0};
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  if (xs.size() == 1) return {mean, 0.0};
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(xs.size() - 1))};
}

std::string out_path(const ExperimentConfig& cfg, const std::string& file) {
  return (std::filesystem::path(cfg.out_dir) / file).string();
}

}  // namespace

ExperimentOutcome run_experiment(const ExperimentConfig& cfg, bool quiet, std::ostream& log) {
  cfg.validate();
  std::filesystem::create_directories(cfg.out_dir);
  const std::string name = cfg.resolved_run_name();

  ExperimentOutcome outcome;
  std::vector<double> test_f1s;
  std::vector<std::string> summary_lines;

  for (const std::uint64_t seed : cfg.seeds) {
    SeedOutcome row;
    row.seed = seed;
    const std::string csv = out_path(cfg, name + "_seed" + std::to_string(seed) + ".csv");
    if (cfg.mode == Mode::kFederated) {
      const FederationResult res = run_federated(cfg, seed);
      write_federated_csv(csv, res.records);
      row.rows = static_cast<int>(res.records.size());
      row.test_macro_f1 = res.records.back().test_macro_f1;
      row.final_val_macro_f1 = res.records.back().val_macro_f1;
      summary_lines.push_back("seed " + std::to_string(seed) + ": test_macro_f1 " +
                              csv_double(row.test_macro_f1) + " over " +
                              std::to_string(row.rows) + " rounds");
    } else {
      const CentralizedResult res = run_centralized(cfg, seed);
      write_centralized_csv(csv, res.records);
      row.rows = static_cast<int>(res.records.size());
      row.test_macro_f1 = res.test_macro_f1;
      row.final_val_macro_f1 = res.records.back().val_macro_f1;
      summary_lines.push_back("seed " + std::to_string(seed) + ": test_macro_f1 " +
                              csv_double(row.test_macro_f1) + ", stopped at epoch " +
                              std::to_string(res.stop_epoch) + ", best epoch " +
                              std::to_string(res.best_epoch));
    }
    outcome.csv_paths.push_back(csv);
    outcome.per_seed.push_back(row);
    test_f1s.push_back(row.test_macro_f1);
    if (!quiet)
      log << name << " seed " << seed << ": test_macro_f1 " << csv_double(row.test_macro_f1)
          << "\n";
  }

  const auto [mean, sd] = mean_std(test_f1s);
  outcome.mean_test_f1 = mean;
  outcome.std_test_f1 = sd;

  outcome.summary_path = out_path(cfg, name + "_summary.txt");
  auto summary = open_out(outcome.summary_path);
  summary << "run: " << name << "\n";
  summary << "seeds: " << cfg.seeds.size() << "\n";
  for (const auto& line : summary_lines) summary << line << "\n";
  summary << "test_macro_f1: " << csv_double(mean) << " +/- " << csv_double(sd) << "\n";
  if (!summary) throw Error("write failure on " + outcome.summary_path);

  if (!quiet)
    log << name << ": test_macro_f1 " << csv_double(mean) << " +/- " << csv_double(sd) << " over "
        << cfg.seeds.size() << " seeds\n";
  return outcome;
}

CompareOutcome compare_aggregators(const ExperimentConfig& cfg, bool quiet, std::ostream& log) {
  cfg.validate();
  if (cfg.mode != Mode::kFederated)
    throw ConfigError("compare needs a federated config (mode = federated)");
  std::filesystem::create_directories(cfg.out_dir);
  const std::string base = cfg.run_name.empty() ? "compare" : cfg.run_name + "_compare";

  constexpr Aggregator kOrder[3] = {Aggregator::kProjAvg, Aggregator::kRlAvg,
                                    Aggregator::kNaiveAvg};
  CompareOutcome outcome;
  std::vector<double> gaps;
  std::vector<double> finals[3];

  for (const std::uint64_t seed : cfg.seeds) {
    const LabeledDataset data = build_dataset(cfg, seed);
    const auto clients = build_clients(data, cfg.fed.num_clients, cfg.synth.alpha,
                                       cfg.synth.client_shift, seed);
    const SpdNetConfig net = cfg.make_net_config(data.dim, data.num_classes);
    auto init_rng = make_engine(seed, stream::kInit);
    const ModelParams init = init_params(net, init_rng);

    FederationResult res[3];
    for (int a = 0; a < 3; ++a) {
      FederationConfig fed = cfg.fed;
      fed.aggregator = kOrder[a];
      fed.seed = seed;
      res[a] = run_federation(fed, net, clients, init);
      finals[a].push_back(res[a].records.back().test_macro_f1);
    }

    const std::string csv = out_path(cfg, base + "_seed" + std::to_string(seed) + ".csv");
    auto out = open_out(csv);
    out << "round";
    for (const auto agg : kOrder) out << ',' << aggregator_name(agg) << "_val_macro_f1";
    out << ",proj_rl_val_f1_gap";
    for (const auto agg : kOrder) out << ',' << aggregator_name(agg) << "_test_macro_f1";
    for (const auto agg : kOrder) out << ',' << aggregator_name(agg) << "_max_residual";
    out << '\n';
    double gap_sum = 0.0;
    for (std::size_t t = 0; t < res[0].records.size(); ++t) {
      const double gap =
          std::abs(res[0].records[t].val_macro_f1 - res[1].records[t].val_macro_f1);
      gap_sum += gap;
      out << res[0].records[t].round;
      for (int a = 0; a < 3; ++a) out << ',' << csv_double(res[a].records[t].val_macro_f1);
      out << ',' << csv_double(gap);
      for (int a = 0; a < 3; ++a) out << ',' << csv_double(res[a].records[t].test_macro_f1);
      for (int a = 0; a < 3; ++a)
        out << ',' << csv_double(res[a].records[t].max_manifold_residual);
      out << '\n';
    }
    if (!out) throw Error("write failure on " + csv);
    outcome.csv_paths.push_back(csv);
    gaps.push_back(gap_sum / static_cast<double>(res[0].records.size()));
    if (!quiet)
      log << base << " seed " << seed << ": mean |proj-rl| val gap " << csv_double(gaps.back())
          << "\n";
  }

  outcome.mean_abs_val_gap =
      std::accumulate(gaps.begin(), gaps.end(), 0.0) / static_cast<double>(gaps.size());
  outcome.proj_mean_test_f1 = mean_std(finals[0]).first;
  outcome.rl_mean_test_f1 = mean_std(finals[1]).first;
  outcome.naive_mean_test_f1 = mean_std(finals[2]).first;

  outcome.summary_path = out_path(cfg, base + "_summary.txt");
  auto summary = open_out(outcome.summary_path);
  summary << "run: " << base << "\n";
  summary << "seeds: " << cfg.seeds.size() << "\n";
  summary << "mean |proj_avg - rl_avg| per-round val macro-F1 gap: "
          << csv_double(outcome.mean_abs_val_gap) << "\n";
  for (int a = 0; a < 3; ++a) {
    const auto [m, sd] = mean_std(finals[a]);
    summary << aggregator_name(kOrder[a]) << " final test_macro_f1: " << csv_double(m) << " +/- "
            << csv_double(sd) << "\n";
  }
  if (!summary) throw Error("write failure on " + outcome.summary_path);

  if (!quiet)
    log << base << ": mean |proj-rl| val gap " << csv_double(outcome.mean_abs_val_gap) << "\n";
  return outcome;
}

}  // namespace fedspd
