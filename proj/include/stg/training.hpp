#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "stg/dataset.hpp"
#include "stg/graph.hpp"
#include "stg/metrics.hpp"
#include "stg/model.hpp"
#include "stg/tensor.hpp"
#include "stg/types.hpp"

namespace stg {

struct TrainConfig {
  int epochs = 50;
  int warmup_epochs = 5;
  Scalar base_lr = 1e-3;
  Scalar weight_decay = 0.01;
  Scalar clip_norm = 1.0;     // may be infinity to disable clipping
  Scalar huber_delta = 1.5;
  Scalar layer_decay = 0.90;  // per-layer learning-rate decay toward the input
  int batch_size = 16;
  int grad_accum_steps = 1;
  Scalar dropout_p = 0.1;     // overrides the model's dropout during training
  std::uint64_t seed = 0;
  long max_steps = 0;         // optional optimizer-step cap; 0 = run all epochs
  bool select_avg_horizons = false;  // checkpoint selection: mean MAE over the
                                     // report horizons instead of the full one

  void validate() const;
};

Json train_config_to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const Json& j);

// Masked mean Huber objective: elementwise 0.5e^2 inside |e| <= delta, else
// delta(|e| - delta/2), averaged over mask=1 entries.
Tensor huber_loss(Tape& tape, const Tensor& pred, const Mat& target, const Mat& mask,
                  Scalar delta);

// Scheduled learning rate at a point of the run: linear ramp 0 -> base_lr
// over the warmup span, then cosine decay to 0.  fraction is the completed
// share of all optimizer steps, step/(total-1).
Scalar lr_at(Scalar fraction, const TrainConfig& config);

// Per-group learning-rate multipliers: index 0 is the input embeddings and
// encoding tables (decay^(k+1)), 1..k the encoder layers (layer j gets
// decay^(k-j)), and k+1 the head and final norm (1).
std::vector<Scalar> layer_lr_scales(int k_layers, Scalar layer_decay);
Scalar group_scale(const std::vector<Scalar>& scales, int group);

// Scales all gradients by min(1, max_norm/||g||) in place and returns the
// observed pre-clip global norm.  A non-finite norm aborts the step.
Scalar clip_global_norm(const std::vector<ParamInfo>& entries, Scalar max_norm);

struct AdamHyper {
  Scalar beta1 = 0.9;
  Scalar beta2 = 0.999;
  Scalar eps = 1e-8;
};

// Moment buffers, one slot per entry of parameter_entries order.
struct OptimizerState {
  struct Moments {
    Mat m;
    Mat v;
  };
  std::vector<Moments> slots;
  long step = 0;
};

OptimizerState make_optimizer_state(const ParameterSet& params);

// Decoupled weight decay first (theta *= 1 - lr_g*wd, projection weights
// only), then a bias-corrected Adam update at per-group rate lr_g = lr*scale.
void adamw_step(const std::vector<ParamInfo>& entries, OptimizerState& state, Scalar lr,
                const std::vector<Scalar>& scales, Scalar weight_decay,
                const AdamHyper& hyper = {});

struct Checkpoint {
  ModelConfig model;
  TrainConfig train;
  EncodingMaxima maxima;
  Normalizer norm;
  ParameterSet params;
  OptimizerState opt;  // slots empty when the snapshot carries no optimizer
  int epoch = -1;      // last completed epoch
  long global_step = 0;
  Json val = Json();   // validation metrics report of that epoch, if any
};

// Writes <stem>.bin/<stem>.json; loading reconstructs shapes from the stored
// config and maxima and restores every tensor bitwise.
void save_checkpoint(const std::string& stem, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::string& stem);

struct EpochRow {
  int epoch = 0;
  Scalar train_loss = 0;
  Scalar val_mae = 0;
  Scalar val_rmse = 0;
  Scalar val_mape = 0;
  Scalar lr = 0;
};

std::string epoch_log_header();
std::string format_epoch_row(const EpochRow& row);

struct TrainResult {
  Checkpoint best;
  std::vector<EpochRow> log;
  long steps_run = 0;
};

// Full optimization loop: per optimizer step, grad_accum_steps micro-batches
// of batch_size windows are accumulated (loss normalized by the effective
// batch's observed-entry count), clipped, and applied with the scheduled
// rate; per epoch the validation split is scored and the lowest-MAE
// parameters are retained.  train_split must already be imputed; val_split
// stays raw so its zeros mask the metrics.  When out_dir is nonempty the
// loop maintains <out_dir>/latest + <out_dir>/best checkpoints and appends
// to <out_dir>/log.csv.  A non-finite loss or gradient aborts with the
// previous epoch's checkpoints intact on disk.
TrainResult train(const ModelConfig& model_config, const TrainConfig& train_config,
                  const RawSeries& train_split, const RawSeries& val_split,
                  const Normalizer& norm, const GraphInputs& graph,
                  const std::string& out_dir = "", const Checkpoint* resume = nullptr,
                  std::ostream* progress = nullptr);

}  // namespace stg
