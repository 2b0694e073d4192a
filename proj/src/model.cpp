#include "stg/model.hpp"

#include <cmath>

namespace stg {

void ModelConfig::validate() const {
  if (d <= 0 || layers <= 0 || heads <= 0 || ffn_ratio <= 0) {
    throw ConfigError("model dimensions must be positive");
  }
  if (d % heads != 0) throw ConfigError("hidden width d must be divisible by heads");
  if (dropout_p < 0 || dropout_p >= 1) throw ConfigError("dropout must be in [0, 1)");
  if (nodes <= 0 || channels <= 0 || out_channels <= 0 || context <= 0 || horizon <= 0) {
    throw ConfigError("model shape fields (nodes/channels/context/horizon) must be positive");
  }
  if (horizon != context) {
    throw ConfigError(
        "horizon must equal context: each context token predicts the step that lies one "
        "full context past itself, so the two lengths are tied");
  }
}

void apply_preset(ModelConfig& config, const std::string& name) {
  if (name == "micro") {
    config.d = 64;
    config.layers = 6;
    config.heads = 2;
  } else if (name == "mini") {
    config.d = 128;
    config.layers = 6;
    config.heads = 4;
  } else if (name == "small") {
    config.d = 192;
    config.layers = 8;
    config.heads = 6;
  } else {
    throw ConfigError("unknown model preset '" + name + "' (expected micro, mini, or small)");
  }
}

Json model_config_to_json(const ModelConfig& c) {
  Json j;
  j["d"] = c.d;
  j["layers"] = c.layers;
  j["heads"] = c.heads;
  j["ffn_ratio"] = c.ffn_ratio;
  j["dropout"] = c.dropout_p;
  j["token_mode"] = to_string(c.token_mode);
  j["use_positional"] = c.use_positional;
  j["use_centrality"] = c.use_centrality;
  j["use_spatial_bias"] = c.use_spatial_bias;
  j["final_norm"] = c.final_norm;
  j["context"] = c.context;
  j["horizon"] = c.horizon;
  j["nodes"] = c.nodes;
  j["channels"] = c.channels;
  j["out_channels"] = c.out_channels;
  j["directed"] = c.directed;
  return j;
}

ModelConfig model_config_from_json(const Json& j) {
  ModelConfig c;
  c.d = j.at("d").get<int>();
  c.layers = j.at("layers").get<int>();
  c.heads = j.at("heads").get<int>();
  c.ffn_ratio = j.at("ffn_ratio").get<int>();
  c.dropout_p = j.at("dropout").get<Scalar>();
  c.token_mode = token_mode_from_string(j.at("token_mode").get<std::string>());
  c.use_positional = j.at("use_positional").get<bool>();
  c.use_centrality = j.at("use_centrality").get<bool>();
  c.use_spatial_bias = j.at("use_spatial_bias").get<bool>();
  c.final_norm = j.at("final_norm").get<bool>();
  c.context = j.at("context").get<int>();
  c.horizon = j.at("horizon").get<int>();
  c.nodes = j.at("nodes").get<int>();
  c.channels = j.at("channels").get<int>();
  c.out_channels = j.at("out_channels").get<int>();
  c.directed = j.at("directed").get<bool>();
  return c;
}

long ParameterSet::total_parameters() const {
  long total = 0;
  for (const ParamInfo& e : parameter_entries(*this)) total += e.tensor.size();
  return total;
}

std::vector<ParamInfo> parameter_entries(const ParameterSet& p) {
  std::vector<ParamInfo> out;
  const auto push = [&out](const std::string& name, const Tensor& t, int group, bool decay) {
    if (t.defined()) out.push_back({name, t, group, decay});
  };
  push("embed.w0", p.w0, -1, true);
  if (p.centrality.size() == 2) {
    push("embed.cent_in", p.centrality[0], -1, false);
    push("embed.cent_out", p.centrality[1], -1, false);
  } else if (p.centrality.size() == 1) {
    push("embed.cent", p.centrality[0], -1, false);
  }
  push("embed.pos", p.pos, -1, false);
  push("embed.special", p.special, -1, false);
  push("bias.spd", p.bias_table, -1, false);
  for (std::size_t j = 0; j < p.layers.size(); ++j) {
    const auto& l = p.layers[j];
    const std::string base = "enc." + std::to_string(j) + ".";
    const int g = static_cast<int>(j);
    push(base + "ln1.gamma", l.ln1_gamma, g, false);
    push(base + "ln1.beta", l.ln1_beta, g, false);
    push(base + "attn.wq", l.wq, g, true);
    push(base + "attn.wk", l.wk, g, true);
    push(base + "attn.wv", l.wv, g, true);
    push(base + "attn.wo", l.wo, g, true);
    push(base + "ln2.gamma", l.ln2_gamma, g, false);
    push(base + "ln2.beta", l.ln2_beta, g, false);
    push(base + "ffn.w1", l.w1, g, true);
    push(base + "ffn.b1", l.b1, g, false);
    push(base + "ffn.w2", l.w2, g, true);
    push(base + "ffn.b2", l.b2, g, false);
  }
  push("final_norm.gamma", p.fin_gamma, -2, false);
  push("final_norm.beta", p.fin_beta, -2, false);
  push("head.w1", p.head_w1, -2, true);
  push("head.b1", p.head_b1, -2, false);
  push("head.w2", p.head_w2, -2, true);
  push("head.b2", p.head_b2, -2, false);
  return out;
}

ParameterSet make_parameters(const ModelConfig& config, const EncodingMaxima& maxima) {
  config.validate();
  const TokenLayout layout = config.layout();
  const Index d = config.d;
  const auto zeros = [](Index r, Index c) { return Tensor(Mat::Zero(r, c), true); };

  ParameterSet p;
  p.w0 = zeros(config.channels, d);
  if (config.directed) {
    p.centrality = {zeros(maxima.max_in_degree + 1, d), zeros(maxima.max_out_degree + 1, d)};
  } else {
    p.centrality = {zeros(std::max(maxima.max_in_degree, maxima.max_out_degree) + 1, d)};
  }
  p.pos = zeros(layout.tokens(), d);
  if (config.token_mode != TokenMode::kNone) p.special = zeros(1, d);
  p.bias_table = zeros(maxima.max_hops + 3, config.heads);

  p.layers.resize(static_cast<std::size_t>(config.layers));
  for (auto& l : p.layers) {
    l.ln1_gamma = Tensor(Mat::Ones(1, d), true);
    l.ln1_beta = zeros(1, d);
    l.wq = zeros(d, d);
    l.wk = zeros(d, d);
    l.wv = zeros(d, d);
    l.wo = zeros(d, d);
    l.ln2_gamma = Tensor(Mat::Ones(1, d), true);
    l.ln2_beta = zeros(1, d);
    l.w1 = zeros(d, static_cast<Index>(config.ffn_ratio) * d);
    l.b1 = zeros(1, static_cast<Index>(config.ffn_ratio) * d);
    l.w2 = zeros(static_cast<Index>(config.ffn_ratio) * d, d);
    l.b2 = zeros(1, d);
  }
  p.fin_gamma = Tensor(Mat::Ones(1, d), true);
  p.fin_beta = zeros(1, d);
  p.head_w1 = zeros(d, d / 2);
  p.head_b1 = zeros(1, d / 2);
  p.head_w2 = zeros(d / 2, config.out_channels);
  p.head_b2 = zeros(1, config.out_channels);
  return p;
}

namespace {

void fill_uniform_xavier(Tensor& t, Rng& rng) {
  const Scalar limit =
      std::sqrt(Scalar(6) / static_cast<Scalar>(t.rows() + t.cols()));
  for (Index i = 0; i < t.size(); ++i) t.value().data()[i] = rng.uniform(-limit, limit);
}

void fill_normal_table(Tensor& t, Rng& rng, Scalar stddev = 0.02) {
  for (Index i = 0; i < t.size(); ++i) t.value().data()[i] = rng.normal(0, stddev);
}

}  // namespace

ParameterSet init_parameters(const ModelConfig& config, const EncodingMaxima& maxima,
                             std::uint64_t seed) {
  ParameterSet p = make_parameters(config, maxima);
  Rng rng(seed, rng_stream::kInit);

  fill_uniform_xavier(p.w0, rng);
  for (Tensor& t : p.centrality) fill_normal_table(t, rng);
  fill_normal_table(p.pos, rng);
  if (p.special.defined()) fill_normal_table(p.special, rng);
  fill_normal_table(p.bias_table, rng);
  // No learnable prior for token pairs that are unreachable or touch a
  // special token: start those bias rows at exactly 0.
  const Index unreachable = p.bias_table.rows() - 2;
  const Index special_row = p.bias_table.rows() - 1;
  p.bias_table.value().row(unreachable).setZero();
  p.bias_table.value().row(special_row).setZero();

  for (auto& l : p.layers) {
    fill_uniform_xavier(l.wq, rng);
    fill_uniform_xavier(l.wk, rng);
    fill_uniform_xavier(l.wv, rng);
    fill_uniform_xavier(l.wo, rng);
    fill_uniform_xavier(l.w1, rng);
    fill_uniform_xavier(l.w2, rng);
  }
  fill_uniform_xavier(p.head_w1, rng);
  fill_uniform_xavier(p.head_w2, rng);
  return p;
}

GraphInputs build_graph_inputs(const Mat& weights, const TokenLayout& layout) {
  GraphInputs g;
  g.degree = degrees(weights);
  const IntMat hops = shortest_path_hops(weights);
  g.maxima.max_in_degree = g.degree.max_in();
  g.maxima.max_out_degree = g.degree.max_out();
  g.maxima.max_hops = max_finite_hops(hops);
  g.bias = build_bias_index(hops, layout, g.maxima.max_hops);
  return g;
}

TokenSequence embed_inputs(Tape& tape, const WindowedSample& sample, const ParameterSet& params,
                           const ModelConfig& config, const DegreeVector& degree) {
  const TokenLayout layout = config.layout();
  const long l = layout.tokens();
  if (sample.x.rows() != layout.node_token_count() || sample.x.cols() != config.channels) {
    throw ConfigError("sample shape does not match the model config");
  }

  // Project node readings, then scatter them to their token positions; the
  // remaining components are row-gathers against the same layout, so every
  // term is an l x d tensor and the sum is one add chain.
  const Tensor x(sample.x);
  const Tensor projected = matmul(tape, x, params.w0);

  std::vector<Index> node_row(static_cast<std::size_t>(l), -1);
  std::vector<Index> special_row(static_cast<std::size_t>(l), -1);
  std::vector<Index> in_row(static_cast<std::size_t>(l), -1);
  std::vector<Index> out_row(static_cast<std::size_t>(l), -1);
  for (long pos = 0; pos < l; ++pos) {
    const int node = layout.node_of(pos);
    if (node < 0) {
      special_row[static_cast<std::size_t>(pos)] = 0;
      continue;
    }
    const int t = layout.time_of(pos);
    node_row[static_cast<std::size_t>(pos)] = static_cast<Index>(t) * config.nodes + node;
    if (config.use_centrality) {
      const Index din = degree.in[node];
      const Index dout = degree.out[node];
      if (din >= params.centrality.front().rows() ||
          dout >= params.centrality.back().rows()) {
        throw ConfigError("node degree exceeds the centrality table built at preparation time");
      }
      in_row[static_cast<std::size_t>(pos)] = din;
      out_row[static_cast<std::size_t>(pos)] = dout;
    }
  }

  Tensor h = gather_rows(tape, projected, node_row);
  if (params.special.defined()) {
    h = add(tape, h, gather_rows(tape, params.special, special_row));
  }
  if (config.use_centrality) {
    // Directed graphs add both in- and out-tables; undirected graphs hold a
    // single table and the two index vectors coincide.
    h = add(tape, h, gather_rows(tape, params.centrality.front(), in_row));
    if (params.centrality.size() == 2) {
      h = add(tape, h, gather_rows(tape, params.centrality.back(), out_row));
    }
  }
  if (config.use_positional) {
    h = add(tape, h, params.pos);
  }
  return TokenSequence{h, layout};
}

Tensor biased_multihead_attention(Tape& tape, const Tensor& h, const SpatialBiasIndex& bias,
                                  const ParameterSet& params, int layer,
                                  const ModelConfig& config, std::vector<Mat>* trace_heads) {
  if (h.cols() != config.d) throw ConfigError("attention input width differs from config.d");
  if (bias.bucket.rows() != h.rows()) {
    throw ConfigError("bias index token count differs from the sequence length");
  }
  const auto& weights = params.layers.at(static_cast<std::size_t>(layer));
  const Index dk = config.head_dim();
  const Scalar inv_sqrt_dk = Scalar(1) / std::sqrt(static_cast<Scalar>(dk));

  const Tensor q = matmul(tape, h, weights.wq);
  const Tensor k = matmul(tape, h, weights.wk);
  const Tensor v = matmul(tape, h, weights.wv);

  std::vector<Tensor> heads;
  heads.reserve(static_cast<std::size_t>(config.heads));
  for (int head = 0; head < config.heads; ++head) {
    const Tensor qh = slice_cols(tape, q, head * dk, dk);
    const Tensor kh = slice_cols(tape, k, head * dk, dk);
    const Tensor vh = slice_cols(tape, v, head * dk, dk);
    Tensor logits = scale(tape, matmul(tape, qh, transpose(tape, kh)), inv_sqrt_dk);
    if (config.use_spatial_bias) {
      // One learned scalar per (hop bucket, head), shared by all layers.
      logits = add(tape, logits, gather_bias(tape, params.bias_table, bias.bucket, head));
    }
    const Tensor probs = softmax_rows(tape, logits);
    if (trace_heads) trace_heads->push_back(probs.value());
    heads.push_back(matmul(tape, probs, vh));
  }
  return matmul(tape, concat_cols(tape, heads), weights.wo);
}

Tensor encoder_block(Tape& tape, const Tensor& h, const SpatialBiasIndex& bias,
                     const ParameterSet& params, int layer, const ModelConfig& config,
                     const ForwardOptions& options, std::vector<Mat>* trace_heads) {
  const auto& weights = params.layers.at(static_cast<std::size_t>(layer));
  const auto maybe_dropout = [&](const Tensor& t) {
    if (!options.training || config.dropout_p == 0) return t;
    if (!options.dropout_rng) throw ConfigError("training forward needs a dropout rng");
    return dropout(tape, t, config.dropout_p, true, *options.dropout_rng);
  };

  const Tensor x1 = layer_norm(tape, h, weights.ln1_gamma, weights.ln1_beta);
  const Tensor attn = biased_multihead_attention(tape, x1, bias, params, layer, config, trace_heads);
  const Tensor u = add(tape, h, maybe_dropout(attn));

  const Tensor x2 = layer_norm(tape, u, weights.ln2_gamma, weights.ln2_beta);
  Tensor f = add_row_broadcast(tape, matmul(tape, x2, weights.w1), weights.b1);
  f = gelu(tape, f);
  f = add_row_broadcast(tape, matmul(tape, f, weights.w2), weights.b2);
  return add(tape, u, maybe_dropout(f));
}

Tensor forward(Tape& tape, const WindowedSample& sample, const ParameterSet& params,
               const ModelConfig& config, const GraphInputs& graph, const Normalizer& norm,
               const ForwardOptions& options) {
  config.validate();
  TokenSequence seq = embed_inputs(tape, sample, params, config, graph.degree);
  if (options.trace) {
    options.trace->probs.assign(static_cast<std::size_t>(config.layers), {});
  }
  for (int j = 0; j < config.layers; ++j) {
    std::vector<Mat>* trace_heads =
        options.trace ? &options.trace->probs[static_cast<std::size_t>(j)] : nullptr;
    seq.h = encoder_block(tape, seq.h, graph.bias, params, j, config, options, trace_heads);
  }
  Tensor h = seq.h;
  if (config.final_norm) {
    h = layer_norm(tape, h, params.fin_gamma, params.fin_beta);
  }
  // Special tokens carry no prediction target; only node tokens reach the head.
  if (config.token_mode != TokenMode::kNone) {
    h = gather_rows(tape, h, seq.layout.node_positions());
  }
  Tensor out = add_row_broadcast(tape, matmul(tape, h, params.head_w1), params.head_b1);
  out = add_row_broadcast(tape, matmul(tape, out, params.head_w2), params.head_b2);
  // Back to original units.
  return affine_const(tape, out, norm.std, norm.mean);
}

Mat predict(const WindowedSample& sample, const ParameterSet& params, const ModelConfig& config,
            const GraphInputs& graph, const Normalizer& norm, AttentionTrace* trace) {
  if (config.out_channels != 1) throw ConfigError("predict expects out_channels == 1");
  Tape tape(false);
  ForwardOptions options;
  options.trace = trace;
  const Tensor flat = forward(tape, sample, params, config, graph, norm, options);
  return Eigen::Map<const Mat>(flat.value().data(), config.context, config.nodes);
}

Mat flatten_rows(const Mat& m) {
  return Eigen::Map<const Mat>(m.data(), m.size(), 1);
}

}  // namespace stg
