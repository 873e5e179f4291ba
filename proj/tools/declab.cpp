// declab: adaptive decoding-policy lab.
//
// Subcommands: select-actions, train, eval, sweep. Every run is driven by a
// strict JSON config; --seed/--out/--workers override the corresponding
// config fields. Exit codes: 0 success, 1 usage or config error, 2 runtime
// failure, 3 training diverged.

#include <CLI11.hpp>

#include "declab/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"declab: learned decoding adapters over synthetic generators"};
  app.require_subcommand(1);

  struct SubArgs {
    std::string config;
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::string out;
    int workers = 0;
    std::vector<std::string> checkpoints;
  };

  auto add_common = [](CLI::App* sub, SubArgs& args, bool with_checkpoint) {
    sub->add_option("--config", args.config, "Path to the run config (JSON)")
        ->required();
    sub->add_option("--seed", args.seed, "Override the config seed")
        ->each([&args](const std::string&) { args.seed_set = true; });
    sub->add_option("--out", args.out, "Override the output directory");
    sub->add_option("--workers", args.workers,
                    "Override the rollout worker count");
    if (with_checkpoint) {
      sub->add_option("--checkpoint", args.checkpoints,
                      "Checkpoint to resume from (train) or evaluate (eval; "
                      "repeatable)");
    }
  };

  SubArgs select_args, train_args, eval_args, sweep_args;
  CLI::App* select =
      app.add_subcommand("select-actions",
                         "Estimate the reward matrix and select action sets");
  add_common(select, select_args, false);
  CLI::App* train = app.add_subcommand("train", "Train a decoding adapter");
  add_common(train, train_args, true);
  CLI::App* eval =
      app.add_subcommand("eval", "Evaluate static baselines and an adapter");
  add_common(eval, eval_args, true);
  CLI::App* sweep =
      app.add_subcommand("sweep", "Train + eval across the configured seeds");
  add_common(sweep, sweep_args, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  auto to_options = [](const SubArgs& args) {
    declab::harness::CliOptions options;
    options.config_path = args.config;
    if (args.seed_set) options.seed_override = args.seed;
    if (!args.out.empty()) options.out_override = args.out;
    if (args.workers > 0) options.workers_override = args.workers;
    options.checkpoints = args.checkpoints;
    return options;
  };

  if (select->parsed()) {
    return declab::harness::run_command("select-actions", to_options(select_args));
  }
  if (train->parsed()) {
    return declab::harness::run_command("train", to_options(train_args));
  }
  if (eval->parsed()) {
    return declab::harness::run_command("eval", to_options(eval_args));
  }
  return declab::harness::run_command("sweep", to_options(sweep_args));
}
