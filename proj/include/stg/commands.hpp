#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

#include "stg/dataset.hpp"
#include "stg/model.hpp"
#include "stg/synth.hpp"
#include "stg/training.hpp"

namespace stg {

// One JSON file drives the whole pipeline.  Schema (every section optional
// unless a command needs it):
//   {
//     "dataset": {"series": "s.csv", "distances": "d.csv", "kappa": 6.0},
//     "split":   {"train": 0.7, "val": 0.1, "test": 0.2},
//     "context": 12, "horizon": 12,
//     "model":   {"preset": "micro", ...explicit overrides...},
//     "train":   {...optimizer and schedule keys...},
//     "synth":   {...generator knobs...},
//     "attend":  {"num_samples": 8, "split": "test"}
//   }
// The model section takes a preset plus overrides; nodes, channels and
// out_channels are derived from the prepared data and rejected here.
// context must equal horizon: each token forecasts its own relative step.
struct RunConfig {
  bool has_dataset = false;
  std::string series_path;
  std::string distances_path;
  Scalar kappa = 0;

  SplitFractions split;
  ModelConfig model;
  TrainConfig train;
  SynthConfig synth;

  int attend_samples = 8;
  std::string attend_split = "test";
};

RunConfig run_config_from_json(const Json& j);

// Empty path means "all defaults".  A non-null seed override replaces the
// train and synth seeds, letting one flag steer a whole deterministic run.
RunConfig load_run_config(const std::string& path, const std::uint64_t* seed_override);

// Each command reads and writes inside out_dir, which is created on demand.
// They throw ConfigError / NumericError; the binary maps those to exit
// codes 2 / 3.

// Writes series.csv, distances.csv and synth.json (the resolved knobs).
void cmd_synth(const RunConfig& config, const std::string& out_dir, std::ostream* progress = nullptr);

// Reads the dataset CSVs; writes adjacency.csv, degrees.csv, spd.csv,
// manifest.json and the train/val/test archives (train imputed, the others
// raw so missing readings stay masked).
void cmd_prepare(const RunConfig& config, const std::string& out_dir, std::ostream* progress = nullptr);

// Trains on the prepared artifacts; writes log.csv plus best/latest
// checkpoints.  resume names a checkpoint stem to continue from; ablate
// applies one named single-change variant before training.
void cmd_train(const RunConfig& config, const std::string& out_dir, const std::string& resume = "",
               const std::string& ablate = "", std::ostream* progress = nullptr);

// Scores a checkpoint on val and test; writes metrics_val/metrics_test as
// JSON and CSV.  checkpoint defaults to <out_dir>/best.
void cmd_eval(const RunConfig& config, const std::string& out_dir, const std::string& checkpoint = "",
              std::ostream* progress = nullptr);

// Averaged attention maps of a checkpoint; writes node_node.csv and
// time_time.csv, plus per-layer variants when asked.
void cmd_attend(const RunConfig& config, const std::string& out_dir, const std::string& checkpoint = "",
                bool per_layer = false, std::ostream* progress = nullptr);

// Retrains one single-change variant under <out_dir>/ablate_<variant> and
// writes ablation_<variant>.json; when metrics_test.json exists the report
// includes the relative MAE change against it.
void cmd_ablate(const RunConfig& config, const std::string& out_dir, const std::string& variant,
                std::ostream* progress = nullptr);

}  // namespace stg
