#pragma once

#include <optional>
#include <string>
#include <vector>

#include "stg/container.hpp"
#include "stg/dataset.hpp"
#include "stg/graph.hpp"
#include "stg/layout.hpp"
#include "stg/ops.hpp"
#include "stg/tensor.hpp"

namespace stg {

// Network shape and ablation switches.  Sizes follow the named presets
// micro/mini/small = (d, layers, heads) of (64,6,2), (128,6,4), (192,8,6).
struct ModelConfig {
  int d = 64;
  int layers = 6;
  int heads = 2;
  int ffn_ratio = 4;
  Scalar dropout_p = 0.1;
  TokenMode token_mode = TokenMode::kCls;

  // Ablation switches: disabling one is bitwise-equivalent to zeroing the
  // corresponding learned table.
  bool use_positional = true;
  bool use_centrality = true;
  bool use_spatial_bias = true;
  bool final_norm = true;

  int context = 12;      // steps fed in
  int horizon = 12;      // steps predicted; must equal context (see forward)
  int nodes = 0;         // N
  int channels = 0;      // C: 1 reading + slots_per_day one-hot
  int out_channels = 1;  // per-token prediction width
  bool directed = true;  // two centrality tables when true, one when false

  int head_dim() const { return d / heads; }
  TokenLayout layout() const { return TokenLayout{token_mode, context, nodes}; }
  void validate() const;
};

// Fills d/layers/heads from a preset name ("micro", "mini", "small").
void apply_preset(ModelConfig& config, const std::string& name);

Json model_config_to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const Json& j);

// Every learnable tensor, with stable names for checkpoints, optimizer
// grouping, and gradient checks.
struct ParameterSet {
  Tensor w0;                        // channels x d input projection
  std::vector<Tensor> centrality;   // directed: [in, out] tables; else [one]
  Tensor pos;                       // l x d positional table
  Tensor special;                   // 1 x d, absent in NONE mode
  Tensor bias_table;                // num_buckets x heads attention-bias table

  struct Layer {
    Tensor ln1_gamma, ln1_beta;
    Tensor wq, wk, wv, wo;          // d x d each
    Tensor ln2_gamma, ln2_beta;
    Tensor w1, b1, w2, b2;          // d -> ffn_ratio*d -> d
  };
  std::vector<Layer> layers;

  Tensor fin_gamma, fin_beta;       // final pre-head norm
  Tensor head_w1, head_b1;          // d -> d/2
  Tensor head_w2, head_b2;          // d/2 -> out_channels

  long total_parameters() const;
};

// One named parameter plus its optimizer grouping: group -1 = input
// embeddings/encodings, 0..layers-1 = encoder layer, -2 = head/final norm.
// decay marks tensors that receive weight decay (projection matrices only).
struct ParamInfo {
  std::string name;
  Tensor tensor;
  int group = -1;
  bool decay = false;
};

std::vector<ParamInfo> parameter_entries(const ParameterSet& params);

// Correctly shaped zero tensors; count is a pure function of config+maxima.
ParameterSet make_parameters(const ModelConfig& config, const EncodingMaxima& maxima);

// Linear weights ~ uniform(+-sqrt(6/(fan_in+fan_out))); learned tables
// ~ normal(0, 0.02) with the bias table's special/unreachable rows zeroed;
// biases and norm offsets 0; norm gains 1.  Deterministic in the seed.
ParameterSet init_parameters(const ModelConfig& config, const EncodingMaxima& maxima,
                             std::uint64_t seed);

// Graph-derived inputs the model consumes alongside parameters.
struct GraphInputs {
  DegreeVector degree;
  SpatialBiasIndex bias;
  EncodingMaxima maxima;
};

GraphInputs build_graph_inputs(const Mat& weights, const TokenLayout& layout);

// Post-softmax attention probabilities: [layer][head], each l x l.
struct AttentionTrace {
  std::vector<std::vector<Mat>> probs;
};

struct TokenSequence {
  Tensor h;  // l x d
  TokenLayout layout;
};

// h0 = projected reading (+ centrality by degree) (+ positional row), with
// special-token embeddings inserted per layout; each encoding term is skipped
// entirely when its switch is off.
TokenSequence embed_inputs(Tape& tape, const WindowedSample& sample, const ParameterSet& params,
                           const ModelConfig& config, const DegreeVector& degree);

// Scaled dot-product attention over all token pairs (bidirectional), with the
// learned per-bucket scalar (shared bias table, one column per head) added to
// the logits, heads concatenated and projected by wo.  trace_heads, when
// given, receives each head's post-softmax matrix.
Tensor biased_multihead_attention(Tape& tape, const Tensor& h, const SpatialBiasIndex& bias,
                                  const ParameterSet& params, int layer,
                                  const ModelConfig& config,
                                  std::vector<Mat>* trace_heads = nullptr);

struct ForwardOptions {
  bool training = false;       // enables dropout
  Rng* dropout_rng = nullptr;  // required when training and dropout_p > 0
  AttentionTrace* trace = nullptr;
};

// Pre-norm residual block: u = h + drop(attn(ln(h))); out = u + drop(ffn(ln(u))).
Tensor encoder_block(Tape& tape, const Tensor& h, const SpatialBiasIndex& bias,
                     const ParameterSet& params, int layer, const ModelConfig& config,
                     const ForwardOptions& options, std::vector<Mat>* trace_heads = nullptr);

// Full network: embed, stacked blocks, final norm, drop special tokens, and
// the two-layer head.  Returns (context*N) x out_channels, de-normalized;
// the row for (relative step j, node i) is the forecast for horizon step j
// of node i, which is why horizon must equal context.
Tensor forward(Tape& tape, const WindowedSample& sample, const ParameterSet& params,
               const ModelConfig& config, const GraphInputs& graph, const Normalizer& norm,
               const ForwardOptions& options = {});

// Inference-only forward reshaped to horizon x N (out_channels must be 1).
Mat predict(const WindowedSample& sample, const ParameterSet& params, const ModelConfig& config,
            const GraphInputs& graph, const Normalizer& norm, AttentionTrace* trace = nullptr);

// Row-major flatten of a horizon x N matrix to (horizon*N) x 1, matching the
// forward output's row order.
Mat flatten_rows(const Mat& m);

}  // namespace stg
