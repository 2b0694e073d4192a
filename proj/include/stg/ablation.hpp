#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "stg/metrics.hpp"
#include "stg/training.hpp"

namespace stg {

// The six single-change variants measured against the full model: one
// encoding switched off, or the special-token mode replaced.
enum class AblationVariant {
  kNoPositional,
  kNoCentrality,
  kNoSpatial,
  kTokenCls,
  kTokenGraph,
  kTokenNone,
};

AblationVariant ablation_variant_from_string(const std::string& name);
std::string ablation_variant_to_string(AblationVariant variant);
const std::vector<std::string>& ablation_variant_names();

// The base configuration with exactly one change applied.
ModelConfig apply_ablation(const ModelConfig& base, AblationVariant variant);

struct AblationResult {
  std::string variant;
  ModelConfig config;       // the changed configuration actually trained
  MetricsReport test;       // test-split metrics of its best checkpoint
  std::vector<EpochRow> log;
};

// Retrains the single-change variant from scratch with the base seed and
// scores its selected checkpoint on the test split.  Graph inputs are
// rebuilt from the adjacency because token-mode variants change the token
// layout.  When out_dir is nonempty the run writes its checkpoints and log
// there like a normal training run.
AblationResult run_ablation(const ModelConfig& base, const TrainConfig& train_config,
                            const Mat& weights, const RawSeries& train_split,
                            const RawSeries& val_split, const RawSeries& test_split,
                            const Normalizer& norm, const std::string& variant,
                            const std::string& out_dir = "", std::ostream* progress = nullptr);

}  // namespace stg
