#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "stg/commands.hpp"

// Exit codes: 0 success, 2 bad config or arguments, 3 numeric abort.
int main(int argc, char** argv) {
  CLI::App app{"Spatiotemporal graph transformer forecasting pipeline"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::string resume;
  std::string ablate_variant;
  std::uint64_t seed = 0;
  bool per_layer = false;

  app.add_option("--config", config_path, "Run config JSON; omit for all defaults");
  CLI::Option* seed_opt =
      app.add_option("--seed", seed, "Overrides the train and synth seeds from the config");
  app.add_option("--out", out_dir, "Directory the command reads and writes")->required();
  app.add_option("--resume", resume,
                 "Checkpoint to continue training from, or to score with eval/attend");
  app.add_option("--ablate", ablate_variant,
                 "Single-change variant name for train or the ablate command");
  app.add_flag("--per-layer", per_layer, "Also write per-layer attention maps");

  std::string command;
  for (const char* name : {"synth", "prepare", "train", "eval", "attend", "ablate"}) {
    CLI::App* sub = app.add_subcommand(name);
    sub->fallthrough();
    sub->callback([&command, name] { command = name; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const bool seed_given = seed_opt->count() > 0;
    const stg::RunConfig config =
        stg::load_run_config(config_path, seed_given ? &seed : nullptr);
    if (command == "synth") {
      stg::cmd_synth(config, out_dir, &std::cout);
    } else if (command == "prepare") {
      stg::cmd_prepare(config, out_dir, &std::cout);
    } else if (command == "train") {
      stg::cmd_train(config, out_dir, resume, ablate_variant, &std::cout);
    } else if (command == "eval") {
      stg::cmd_eval(config, out_dir, resume, &std::cout);
    } else if (command == "attend") {
      stg::cmd_attend(config, out_dir, resume, per_layer, &std::cout);
    } else if (command == "ablate") {
      stg::cmd_ablate(config, out_dir, ablate_variant, &std::cout);
    }
  } catch (const stg::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const stg::NumericError& e) {
    std::cerr << "numeric abort: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
