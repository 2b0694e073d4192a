#include "stg/training.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "stg/csv.hpp"
#include "stg/ops.hpp"
#include "stg/rng.hpp"

namespace stg {

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be at least 1");
  if (warmup_epochs < 0 || warmup_epochs >= epochs) {
    throw ConfigError("warmup_epochs must lie in [0, epochs)");
  }
  if (!(base_lr > 0)) throw ConfigError("base_lr must be positive");
  if (!(weight_decay >= 0)) throw ConfigError("weight_decay must be nonnegative");
  if (!(clip_norm > 0)) throw ConfigError("clip_norm must be positive (infinity disables)");
  if (!(huber_delta > 0)) throw ConfigError("huber_delta must be positive");
  if (!(layer_decay > 0) || layer_decay > 1) throw ConfigError("layer_decay must be in (0, 1]");
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (grad_accum_steps < 1) throw ConfigError("grad_accum_steps must be at least 1");
  if (!(dropout_p >= 0) || dropout_p >= 1) throw ConfigError("dropout must be in [0, 1)");
  if (max_steps < 0) throw ConfigError("max_steps must be nonnegative");
}

Json train_config_to_json(const TrainConfig& config) {
  Json j;
  j["epochs"] = config.epochs;
  j["warmup_epochs"] = config.warmup_epochs;
  j["base_lr"] = config.base_lr;
  j["weight_decay"] = config.weight_decay;
  // JSON has no infinity; null stands for unclipped.
  if (std::isfinite(config.clip_norm)) {
    j["clip_norm"] = config.clip_norm;
  } else {
    j["clip_norm"] = nullptr;
  }
  j["huber_delta"] = config.huber_delta;
  j["layer_decay"] = config.layer_decay;
  j["batch_size"] = config.batch_size;
  j["grad_accum_steps"] = config.grad_accum_steps;
  j["dropout"] = config.dropout_p;
  j["seed"] = config.seed;
  j["max_steps"] = config.max_steps;
  j["select_avg_horizons"] = config.select_avg_horizons;
  return j;
}

TrainConfig train_config_from_json(const Json& j) {
  TrainConfig c;
  c.epochs = j.at("epochs").get<int>();
  c.warmup_epochs = j.at("warmup_epochs").get<int>();
  c.base_lr = j.at("base_lr").get<Scalar>();
  c.weight_decay = j.at("weight_decay").get<Scalar>();
  c.clip_norm = j.at("clip_norm").is_null() ? std::numeric_limits<Scalar>::infinity()
                                            : j.at("clip_norm").get<Scalar>();
  c.huber_delta = j.at("huber_delta").get<Scalar>();
  c.layer_decay = j.at("layer_decay").get<Scalar>();
  c.batch_size = j.at("batch_size").get<int>();
  c.grad_accum_steps = j.at("grad_accum_steps").get<int>();
  c.dropout_p = j.at("dropout").get<Scalar>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.max_steps = j.at("max_steps").get<long>();
  c.select_avg_horizons = j.at("select_avg_horizons").get<bool>();
  return c;
}

Tensor huber_loss(Tape& tape, const Tensor& pred, const Mat& target, const Mat& mask,
                  Scalar delta) {
  const Scalar count = mask.sum();
  if (count == 0) throw std::invalid_argument("huber_loss: mask selects no entries");
  return scale(tape, masked_huber_sum(tape, pred, target, mask, delta), 1.0 / count);
}

Scalar lr_at(Scalar fraction, const TrainConfig& config) {
  fraction = std::clamp<Scalar>(fraction, 0, 1);
  const Scalar warm = static_cast<Scalar>(config.warmup_epochs) / config.epochs;
  if (warm > 0 && fraction < warm) return config.base_lr * (fraction / warm);
  const Scalar span = 1 - warm;
  const Scalar progress = span > 0 ? (fraction - warm) / span : 1;
  return config.base_lr * 0.5 * (1 + std::cos(M_PI * progress));
}

std::vector<Scalar> layer_lr_scales(int k_layers, Scalar layer_decay) {
  if (k_layers < 1) throw ConfigError("layer_lr_scales needs at least one layer");
  if (!(layer_decay > 0) || layer_decay > 1) throw ConfigError("layer_decay must be in (0, 1]");
  std::vector<Scalar> scales(static_cast<std::size_t>(k_layers) + 2);
  scales[0] = std::pow(layer_decay, k_layers + 1);  // embeddings and encodings
  for (int j = 0; j < k_layers; ++j) {
    scales[static_cast<std::size_t>(j) + 1] = std::pow(layer_decay, k_layers - j);
  }
  scales.back() = 1;  // head and final norm
  return scales;
}

Scalar group_scale(const std::vector<Scalar>& scales, int group) {
  if (group == -1) return scales.front();
  if (group == -2) return scales.back();
  if (group < 0 || static_cast<std::size_t>(group) + 2 >= scales.size()) {
    throw ConfigError("parameter group out of range");
  }
  return scales[static_cast<std::size_t>(group) + 1];
}

Scalar clip_global_norm(const std::vector<ParamInfo>& entries, Scalar max_norm) {
  if (!(max_norm > 0)) throw ConfigError("clip norm must be positive");
  Scalar sq = 0;
  for (const auto& e : entries) {
    if (e.tensor.has_grad()) sq += e.tensor.grad().squaredNorm();
  }
  const Scalar norm = std::sqrt(sq);
  if (!std::isfinite(norm)) {
    throw NumericError("gradient norm is non-finite; aborting the optimizer step");
  }
  if (norm > max_norm) {
    const Scalar s = max_norm / norm;
    for (const auto& e : entries) {
      if (e.tensor.has_grad()) e.tensor.grad() *= s;
    }
  }
  return norm;
}

OptimizerState make_optimizer_state(const ParameterSet& params) {
  OptimizerState state;
  for (const auto& e : parameter_entries(params)) {
    OptimizerState::Moments mo;
    mo.m = Mat::Zero(e.tensor.rows(), e.tensor.cols());
    mo.v = Mat::Zero(e.tensor.rows(), e.tensor.cols());
    state.slots.push_back(std::move(mo));
  }
  return state;
}

void adamw_step(const std::vector<ParamInfo>& entries, OptimizerState& state, Scalar lr,
                const std::vector<Scalar>& scales, Scalar weight_decay,
                const AdamHyper& hyper) {
  if (state.slots.size() != entries.size()) {
    throw ConfigError("optimizer state does not match the parameter set");
  }
  state.step += 1;
  const Scalar bc1 = 1 - std::pow(hyper.beta1, static_cast<Scalar>(state.step));
  const Scalar bc2 = 1 - std::pow(hyper.beta2, static_cast<Scalar>(state.step));
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const ParamInfo& e = entries[i];
    Mat& theta = e.tensor.value();
    OptimizerState::Moments& mo = state.slots[i];
    const Scalar lr_g = lr * group_scale(scales, e.group);
    if (e.decay && weight_decay != 0) theta *= (1 - lr_g * weight_decay);
    if (e.tensor.has_grad()) {
      const Mat& g = e.tensor.grad();
      mo.m = hyper.beta1 * mo.m + (1 - hyper.beta1) * g;
      mo.v = (hyper.beta2 * mo.v.array() + (1 - hyper.beta2) * g.array().square()).matrix();
    } else {
      mo.m *= hyper.beta1;
      mo.v *= hyper.beta2;
    }
    theta.array() -=
        lr_g * (mo.m.array() / bc1) / ((mo.v.array() / bc2).sqrt() + hyper.eps);
  }
}

namespace {

Json maxima_to_json(const EncodingMaxima& m) {
  return Json{{"max_in_degree", m.max_in_degree},
              {"max_out_degree", m.max_out_degree},
              {"max_hops", m.max_hops}};
}

EncodingMaxima maxima_from_json(const Json& j) {
  EncodingMaxima m;
  m.max_in_degree = j.at("max_in_degree").get<int>();
  m.max_out_degree = j.at("max_out_degree").get<int>();
  m.max_hops = j.at("max_hops").get<int>();
  return m;
}

ParameterSet snapshot_parameters(const ParameterSet& src, const ModelConfig& config,
                                 const EncodingMaxima& maxima) {
  ParameterSet dst = make_parameters(config, maxima);
  const auto se = parameter_entries(src);
  const auto de = parameter_entries(dst);
  for (std::size_t i = 0; i < se.size(); ++i) {
    de[i].tensor.value() = se[i].tensor.value();
  }
  return dst;
}

}  // namespace

void save_checkpoint(const std::string& stem, const Checkpoint& checkpoint) {
  TensorContainer c;
  const auto entries = parameter_entries(checkpoint.params);
  for (const auto& e : entries) c.add(e.name, e.tensor.value());
  if (!checkpoint.opt.slots.empty()) {
    if (checkpoint.opt.slots.size() != entries.size()) {
      throw ConfigError("optimizer state does not match the parameter set");
    }
    for (std::size_t i = 0; i < entries.size(); ++i) {
      c.add("opt.m." + entries[i].name, checkpoint.opt.slots[i].m);
      c.add("opt.v." + entries[i].name, checkpoint.opt.slots[i].v);
    }
  }
  c.meta["kind"] = "checkpoint";
  c.meta["model"] = model_config_to_json(checkpoint.model);
  c.meta["train"] = train_config_to_json(checkpoint.train);
  c.meta["maxima"] = maxima_to_json(checkpoint.maxima);
  c.meta["normalizer"] = Json{{"mean", checkpoint.norm.mean}, {"std", checkpoint.norm.std}};
  c.meta["epoch"] = checkpoint.epoch;
  c.meta["global_step"] = checkpoint.global_step;
  c.meta["opt_step"] = checkpoint.opt.step;
  c.meta["val"] = checkpoint.val;
  c.save(stem);
}

Checkpoint load_checkpoint(const std::string& stem) {
  const TensorContainer c = TensorContainer::load(stem);
  Checkpoint ck;
  ck.model = model_config_from_json(c.meta.at("model"));
  ck.train = train_config_from_json(c.meta.at("train"));
  ck.maxima = maxima_from_json(c.meta.at("maxima"));
  ck.norm.mean = c.meta.at("normalizer").at("mean").get<Scalar>();
  ck.norm.std = c.meta.at("normalizer").at("std").get<Scalar>();
  ck.epoch = c.meta.at("epoch").get<int>();
  ck.global_step = c.meta.at("global_step").get<long>();
  ck.val = c.meta.at("val");
  ck.params = make_parameters(ck.model, ck.maxima);
  const auto entries = parameter_entries(ck.params);
  for (const auto& e : entries) {
    const Mat& stored = c.get(e.name);
    if (stored.rows() != e.tensor.rows() || stored.cols() != e.tensor.cols()) {
      throw ConfigError("checkpoint tensor " + e.name + " has unexpected shape");
    }
    e.tensor.value() = stored;
  }
  if (c.has("opt.m." + entries.front().name)) {
    ck.opt.step = c.meta.at("opt_step").get<long>();
    for (const auto& e : entries) {
      OptimizerState::Moments mo;
      mo.m = c.get("opt.m." + e.name);
      mo.v = c.get("opt.v." + e.name);
      ck.opt.slots.push_back(std::move(mo));
    }
  }
  return ck;
}

std::string epoch_log_header() { return "epoch,train_loss,val_mae,val_rmse,val_mape,lr"; }

std::string format_epoch_row(const EpochRow& row) {
  return std::to_string(row.epoch) + "," + format_full(row.train_loss) + "," +
         format_full(row.val_mae) + "," + format_full(row.val_rmse) + "," +
         format_full(row.val_mape) + "," + format_full(row.lr);
}

namespace {

Scalar selection_value(const MetricsReport& report, const ModelConfig& config,
                       bool average_horizons) {
  if (!average_horizons) return report.at_horizon(config.horizon).mae;
  Scalar sum = 0;
  for (const auto& row : report.rows) sum += row.metrics.mae;
  return sum / static_cast<Scalar>(report.rows.size());
}

}  // namespace

TrainResult train(const ModelConfig& model_config, const TrainConfig& train_config,
                  const RawSeries& train_split, const RawSeries& val_split,
                  const Normalizer& norm, const GraphInputs& graph,
                  const std::string& out_dir, const Checkpoint* resume,
                  std::ostream* progress) {
  train_config.validate();
  ModelConfig config = model_config;
  config.dropout_p = train_config.dropout_p;
  config.validate();

  const long nw = window_count(train_split, config.context, config.horizon);
  if (nw < 1) throw ConfigError("training split too short: no complete windows");
  if (window_count(val_split, config.context, config.horizon) < 1) {
    throw ConfigError("validation split too short: no complete windows");
  }

  ParameterSet params;
  OptimizerState opt;
  long global_step = 0;
  int start_epoch = 0;
  if (resume != nullptr) {
    const Json want = model_config_to_json(config);
    const Json have = model_config_to_json([&] {
      ModelConfig c = resume->model;
      c.dropout_p = config.dropout_p;
      return c;
    }());
    if (want != have) throw ConfigError("resume checkpoint was trained with a different model");
    if (resume->maxima.max_in_degree != graph.maxima.max_in_degree ||
        resume->maxima.max_out_degree != graph.maxima.max_out_degree ||
        resume->maxima.max_hops != graph.maxima.max_hops) {
      throw ConfigError("resume checkpoint was trained against a different graph");
    }
    if (resume->opt.slots.empty()) {
      throw ConfigError("resume checkpoint carries no optimizer state");
    }
    params = snapshot_parameters(resume->params, config, graph.maxima);
    opt = resume->opt;
    global_step = resume->global_step;
    start_epoch = resume->epoch + 1;
  } else {
    params = init_parameters(config, graph.maxima, train_config.seed);
    opt = make_optimizer_state(params);
  }
  const std::vector<ParamInfo> entries = parameter_entries(params);
  const std::vector<Scalar> scales = layer_lr_scales(config.layers, train_config.layer_decay);

  const long per_step = static_cast<long>(train_config.batch_size) * train_config.grad_accum_steps;
  const long steps_per_epoch = (nw + per_step - 1) / per_step;
  // The schedule always spans the full epoch plan; max_steps only stops the
  // run early, so a capped leg plus a resume retraces an uncapped run.
  const long total_steps = static_cast<long>(train_config.epochs) * steps_per_epoch;
  const long run_cap =
      train_config.max_steps > 0 ? std::min(total_steps, train_config.max_steps) : total_steps;
  const Scalar denom = total_steps > 1 ? static_cast<Scalar>(total_steps - 1) : 1;

  std::ofstream log_file;
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    const bool fresh = resume == nullptr;
    log_file.open(out_dir + "/log.csv", fresh ? std::ios::trunc : std::ios::app);
    if (!log_file) throw ConfigError("cannot open " + out_dir + "/log.csv for writing");
    if (fresh) log_file << epoch_log_header() << "\n" << std::flush;
  }

  TrainResult result;
  Scalar best_value = std::numeric_limits<Scalar>::infinity();
  if (resume != nullptr && !out_dir.empty() &&
      std::filesystem::exists(out_dir + "/best.json")) {
    const Checkpoint prior = load_checkpoint(out_dir + "/best");
    if (!prior.val.is_null()) {
      best_value = selection_value(metrics_report_from_json(prior.val), config,
                                   train_config.select_avg_horizons);
      result.best = prior;
    }
  }

  const std::vector<int> horizons = default_horizons(config.horizon);
  bool hit_step_cap = global_step >= run_cap;

  for (int epoch = start_epoch; epoch < train_config.epochs && !hit_step_cap; ++epoch) {
    std::vector<long> order(static_cast<std::size_t>(nw));
    std::iota(order.begin(), order.end(), 0L);
    Rng shuffle_rng(mix_seed(train_config.seed, rng_stream::kShuffle),
                    static_cast<std::uint64_t>(epoch) + 1);
    shuffle_rng.shuffle(order);
    Rng dropout_rng(mix_seed(train_config.seed, rng_stream::kDropout),
                    static_cast<std::uint64_t>(epoch) + 1);

    Scalar epoch_loss = 0;
    long epoch_steps = 0;
    Scalar last_lr = 0;
    std::size_t cursor = 0;
    while (cursor < order.size() && !hit_step_cap) {
      const std::size_t take =
          std::min(order.size() - cursor, static_cast<std::size_t>(per_step));
      std::vector<WindowedSample> batch;
      batch.reserve(take);
      Scalar observed = 0;
      for (std::size_t i = 0; i < take; ++i) {
        batch.push_back(make_window(train_split, norm, config.context, config.horizon,
                                    order[cursor + i]));
        observed += batch.back().mask.sum();
      }
      cursor += take;
      if (observed == 0) {
        throw NumericError("training batch has no observed targets to fit");
      }

      Scalar step_loss = 0;
      std::size_t pos = 0;
      for (int g = 0; g < train_config.grad_accum_steps && pos < batch.size(); ++g) {
        Tape tape;
        ForwardOptions options;
        options.training = true;
        options.dropout_rng = &dropout_rng;
        Tensor group_loss;
        const std::size_t limit =
            std::min(batch.size(), pos + static_cast<std::size_t>(train_config.batch_size));
        for (; pos < limit; ++pos) {
          const WindowedSample& w = batch[pos];
          const Tensor pred = forward(tape, w, params, config, graph, norm, options);
          const Tensor loss = masked_huber_sum(tape, pred, flatten_rows(w.y),
                                               flatten_rows(w.mask), train_config.huber_delta);
          group_loss = group_loss.defined() ? add(tape, group_loss, loss) : loss;
        }
        const Tensor scaled = scale(tape, group_loss, 1.0 / observed);
        const Scalar value = scaled.value()(0, 0);
        if (!std::isfinite(value)) {
          throw NumericError("training loss became non-finite at epoch " +
                             std::to_string(epoch) + ", step " + std::to_string(global_step) +
                             "; checkpoints from the last completed epoch are retained");
        }
        step_loss += value;
        tape.backward(scaled);
      }

      clip_global_norm(entries, train_config.clip_norm);
      const Scalar lr = lr_at(static_cast<Scalar>(global_step) / denom, train_config);
      adamw_step(entries, opt, lr, scales, train_config.weight_decay);
      for (const auto& e : entries) e.tensor.clear_grad();

      epoch_loss += step_loss;
      last_lr = lr;
      global_step += 1;
      epoch_steps += 1;
      hit_step_cap = global_step >= run_cap;
    }
    if (epoch_steps == 0) break;

    const MetricsReport report =
        evaluate_series(params, config, graph, norm, val_split, horizons);
    const Metrics full = report.at_horizon(config.horizon);

    EpochRow row;
    row.epoch = epoch;
    row.train_loss = epoch_loss / static_cast<Scalar>(epoch_steps);
    row.val_mae = full.mae;
    row.val_rmse = full.rmse;
    row.val_mape = full.mape;
    row.lr = last_lr;
    result.log.push_back(row);
    if (log_file.is_open()) log_file << format_epoch_row(row) << "\n" << std::flush;
    if (progress != nullptr) {
      *progress << "epoch " << epoch << "  train_loss " << row.train_loss << "  val_mae "
                << row.val_mae << "  lr " << row.lr << "\n";
    }

    Checkpoint latest;
    latest.model = config;
    latest.train = train_config;
    latest.maxima = graph.maxima;
    latest.norm = norm;
    latest.params = params;
    latest.opt = opt;
    latest.epoch = epoch;
    latest.global_step = global_step;
    latest.val = metrics_report_to_json(report);
    if (!out_dir.empty()) save_checkpoint(out_dir + "/latest", latest);

    const Scalar value = selection_value(report, config, train_config.select_avg_horizons);
    if (value < best_value) {
      best_value = value;
      Checkpoint best = latest;
      best.params = snapshot_parameters(params, config, graph.maxima);
      best.opt = OptimizerState{};  // the selected snapshot carries weights only
      result.best = best;
      if (!out_dir.empty()) save_checkpoint(out_dir + "/best", best);
    }
  }

  if (result.best.epoch < 0) throw ConfigError("training ran no epochs; nothing to select");
  result.steps_run = global_step;
  return result;
}

}  // namespace stg
