#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <string>

#include "fedspd/errors.hpp"
#include "fedspd/experiment.hpp"

namespace {

// FEDSPD_THREADS caps concurrent client training, on top of any config cap.
void apply_thread_env(fedspd::ExperimentConfig& cfg) {
  const char* env = std::getenv("FEDSPD_THREADS");
  if (env == nullptr || *env == '\0') return;
  char* end = nullptr;
  const long v = std::strtol(env, &end, 10);
  if (end == nullptr || *end != '\0' || v < 1)
    throw fedspd::ConfigError("FEDSPD_THREADS must be a positive integer, got '" +
                              std::string(env) + "'");
  const int cap = static_cast<int>(v);
  cfg.fed.max_threads = cfg.fed.max_threads > 0 ? std::min(cfg.fed.max_threads, cap) : cap;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SPD-network training and federated-aggregation experiment runner"};
  app.require_subcommand(1);

  std::string config_path;
  std::string data_out;
  std::string out_dir;
  std::uint64_t seed_override = 0;
  bool quiet = false;

  auto add_shared = [&](CLI::App* cmd, bool with_out_dir) {
    cmd->add_option("config", config_path, "experiment config file")->required();
    cmd->add_option("--seed-override", seed_override,
                    "run only this seed, replacing the config's seed list");
    if (with_out_dir) cmd->add_option("--out-dir", out_dir, "override the output directory");
    cmd->add_flag("--quiet", quiet, "suppress progress output");
  };

  CLI::App* run = app.add_subcommand("run", "train per the config and write CSV logs");
  add_shared(run, true);
  CLI::App* compare =
      app.add_subcommand("compare", "run all aggregation rules on identical data and seeds");
  add_shared(compare, true);
  CLI::App* gen = app.add_subcommand("gen-data", "generate a dataset file from the config");
  add_shared(gen, false);
  gen->add_option("out", data_out, "output dataset path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    fedspd::ExperimentConfig cfg = fedspd::load_experiment_config(config_path);
    CLI::App* sub = app.get_subcommands().front();
    if (sub->count("--seed-override") > 0) cfg.seeds = {seed_override};
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    apply_thread_env(cfg);

    if (sub == run) {
      fedspd::run_experiment(cfg, quiet, std::cout);
    } else if (sub == compare) {
      fedspd::compare_aggregators(cfg, quiet, std::cout);
    } else {
      const fedspd::LabeledDataset data = fedspd::build_dataset(cfg, cfg.seeds.front());
      fedspd::save_dataset(data, data_out);
      if (!quiet)
        std::cout << "wrote " << data.size() << " items (dim " << data.dim << ", "
                  << data.num_classes << " classes) to " << data_out << "\n";
    }
    return 0;
  } catch (const fedspd::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
