#pragma once

#include <string>
#include <vector>

#include "stg/dataset.hpp"
#include "stg/layout.hpp"
#include "stg/model.hpp"
#include "stg/types.hpp"

namespace stg {

// Attention mass projected onto node pairs and time-step pairs.
struct HeatmapBundle {
  Mat node_node;  // N x N
  Mat time_time;  // T' x T'
  // Per-encoder-layer variants, filled on request.
  std::vector<Mat> layer_node_node;
  std::vector<Mat> layer_time_time;
};

// Averages the recorded post-softmax scores over samples, then heads and
// layers, then over time pairs (node map) or node pairs (time map).
// Special-token rows and columns never contribute.
HeatmapBundle attention_heatmaps(const std::vector<AttentionTrace>& traces,
                                 const TokenLayout& layout, bool per_layer = false);

// Runs the model over the first num_samples windows of a split and collects
// one trace per window.
std::vector<AttentionTrace> collect_traces(const ParameterSet& params, const ModelConfig& config,
                                           const GraphInputs& graph, const Normalizer& norm,
                                           const RawSeries& split, long num_samples);

// Full-precision comma matrix, one row per line, no header.
std::string matrix_csv(const Mat& m);

}  // namespace stg
