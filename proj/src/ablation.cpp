#include "stg/ablation.hpp"

namespace stg {

namespace {

constexpr const char* kNames[] = {"no_positional", "no_centrality", "no_spatial",
                                  "token_cls",     "token_graph",   "token_none"};

}  // namespace

AblationVariant ablation_variant_from_string(const std::string& name) {
  for (std::size_t i = 0; i < std::size(kNames); ++i) {
    if (name == kNames[i]) return static_cast<AblationVariant>(i);
  }
  std::string known;
  for (const char* n : kNames) {
    if (!known.empty()) known += ", ";
    known += n;
  }
  throw ConfigError("unknown ablation variant '" + name + "' (known: " + known + ")");
}

std::string ablation_variant_to_string(AblationVariant variant) {
  return kNames[static_cast<std::size_t>(variant)];
}

const std::vector<std::string>& ablation_variant_names() {
  static const std::vector<std::string> names(std::begin(kNames), std::end(kNames));
  return names;
}

ModelConfig apply_ablation(const ModelConfig& base, AblationVariant variant) {
  ModelConfig c = base;
  switch (variant) {
    case AblationVariant::kNoPositional: c.use_positional = false; break;
    case AblationVariant::kNoCentrality: c.use_centrality = false; break;
    case AblationVariant::kNoSpatial: c.use_spatial_bias = false; break;
    case AblationVariant::kTokenCls: c.token_mode = TokenMode::kCls; break;
    case AblationVariant::kTokenGraph: c.token_mode = TokenMode::kGraph; break;
    case AblationVariant::kTokenNone: c.token_mode = TokenMode::kNone; break;
  }
  return c;
}

AblationResult run_ablation(const ModelConfig& base, const TrainConfig& train_config,
                            const Mat& weights, const RawSeries& train_split,
                            const RawSeries& val_split, const RawSeries& test_split,
                            const Normalizer& norm, const std::string& variant,
                            const std::string& out_dir, std::ostream* progress) {
  const AblationVariant v = ablation_variant_from_string(variant);
  AblationResult result;
  result.variant = variant;
  result.config = apply_ablation(base, v);
  result.config.validate();

  const GraphInputs graph = build_graph_inputs(weights, result.config.layout());
  const TrainResult trained = train(result.config, train_config, train_split, val_split, norm,
                                    graph, out_dir, nullptr, progress);
  result.log = trained.log;
  result.test = evaluate_series(trained.best.params, result.config, graph, norm, test_split,
                                default_horizons(result.config.horizon));
  return result;
}

}  // namespace stg
