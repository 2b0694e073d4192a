#include "stg/heatmap.hpp"

#include <stdexcept>

#include "stg/csv.hpp"

namespace stg {

namespace {

// Mean score between the node blocks of every time-pair (node map) or the
// time blocks of every node-pair (time map).
Mat project_nodes(const Mat& s, const TokenLayout& layout) {
  const int n = layout.nodes;
  const int t = layout.time_steps;
  Mat out = Mat::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      Scalar sum = 0;
      for (int t1 = 0; t1 < t; ++t1) {
        for (int t2 = 0; t2 < t; ++t2) {
          sum += s(layout.position(t1, i), layout.position(t2, j));
        }
      }
      out(i, j) = sum / (static_cast<Scalar>(t) * t);
    }
  }
  return out;
}

Mat project_time(const Mat& s, const TokenLayout& layout) {
  const int n = layout.nodes;
  const int t = layout.time_steps;
  Mat out = Mat::Zero(t, t);
  for (int t1 = 0; t1 < t; ++t1) {
    for (int t2 = 0; t2 < t; ++t2) {
      Scalar sum = 0;
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
          sum += s(layout.position(t1, i), layout.position(t2, j));
        }
      }
      out(t1, t2) = sum / (static_cast<Scalar>(n) * n);
    }
  }
  return out;
}

}  // namespace

HeatmapBundle attention_heatmaps(const std::vector<AttentionTrace>& traces,
                                 const TokenLayout& layout, bool per_layer) {
  if (traces.empty()) throw std::invalid_argument("attention_heatmaps: no traces given");
  const Index l = static_cast<Index>(layout.tokens());
  const std::size_t layers = traces.front().probs.size();
  if (layers == 0) throw std::invalid_argument("attention_heatmaps: traces hold no layers");

  std::vector<Mat> layer_mean(layers, Mat::Zero(l, l));
  for (const AttentionTrace& trace : traces) {
    if (trace.probs.size() != layers) {
      throw std::invalid_argument("attention_heatmaps: traces disagree on layer count");
    }
    for (std::size_t j = 0; j < layers; ++j) {
      if (trace.probs[j].empty() || trace.probs[j].size() != traces.front().probs[j].size()) {
        throw std::invalid_argument("attention_heatmaps: traces disagree on head count");
      }
      for (const Mat& head : trace.probs[j]) {
        if (head.rows() != l || head.cols() != l) {
          throw std::invalid_argument("attention_heatmaps: trace shape does not match layout");
        }
        layer_mean[j] += head;
      }
    }
  }
  for (std::size_t j = 0; j < layers; ++j) {
    layer_mean[j] /= static_cast<Scalar>(traces.size() * traces.front().probs[j].size());
  }

  Mat s = Mat::Zero(l, l);
  for (const Mat& m : layer_mean) s += m;
  s /= static_cast<Scalar>(layers);

  HeatmapBundle bundle;
  bundle.node_node = project_nodes(s, layout);
  bundle.time_time = project_time(s, layout);
  if (per_layer) {
    for (const Mat& m : layer_mean) {
      bundle.layer_node_node.push_back(project_nodes(m, layout));
      bundle.layer_time_time.push_back(project_time(m, layout));
    }
  }
  return bundle;
}

std::vector<AttentionTrace> collect_traces(const ParameterSet& params, const ModelConfig& config,
                                           const GraphInputs& graph, const Normalizer& norm,
                                           const RawSeries& split, long num_samples) {
  if (num_samples < 1) throw ConfigError("collect_traces: need at least one sample");
  const long available = window_count(split, config.context, config.horizon);
  if (available < 1) throw ConfigError("split too short: no complete windows");
  const long take = std::min(num_samples, available);
  std::vector<AttentionTrace> traces;
  traces.reserve(static_cast<std::size_t>(take));
  for (long a = 0; a < take; ++a) {
    const WindowedSample w = make_window(split, norm, config.context, config.horizon, a);
    AttentionTrace trace;
    predict(w, params, config, graph, norm, &trace);
    traces.push_back(std::move(trace));
  }
  return traces;
}

std::string matrix_csv(const Mat& m) {
  std::string out;
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) {
      if (c > 0) out += ',';
      out += format_full(m(r, c));
    }
    out += '\n';
  }
  return out;
}

}  // namespace stg
