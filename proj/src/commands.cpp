#include "stg/commands.hpp"

#include <cmath>
#include <filesystem>
#include <iostream>
#include <limits>
#include <string>
#include <vector>

#include "stg/ablation.hpp"
#include "stg/csv.hpp"
#include "stg/graph.hpp"
#include "stg/heatmap.hpp"
#include "stg/metrics.hpp"

namespace stg {
namespace {

void reject_unknown(const Json& j, std::initializer_list<const char*> known,
                    const std::string& where) {
  for (const auto& item : j.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || item.key() == k;
    if (!ok) throw ConfigError("run config: unknown key '" + item.key() + "' in " + where);
  }
}

void parse_dataset(const Json& j, RunConfig& c) {
  if (!j.is_object()) throw ConfigError("run config: 'dataset' must be an object");
  reject_unknown(j, {"series", "distances", "kappa"}, "dataset");
  for (const char* key : {"series", "distances", "kappa"})
    if (!j.contains(key))
      throw ConfigError(std::string("run config: dataset needs '") + key + "'");
  c.series_path = j.at("series").get<std::string>();
  c.distances_path = j.at("distances").get<std::string>();
  c.kappa = j.at("kappa").get<Scalar>();
  c.has_dataset = true;
}

SplitFractions parse_split(const Json& j) {
  if (!j.is_object()) throw ConfigError("run config: 'split' must be an object");
  reject_unknown(j, {"train", "val", "test"}, "split");
  SplitFractions f;
  if (j.contains("train")) f.train = j.at("train").get<Scalar>();
  if (j.contains("val")) f.val = j.at("val").get<Scalar>();
  if (j.contains("test")) f.test = j.at("test").get<Scalar>();
  if (!(f.train > 0) || !(f.val > 0) || !(f.test > 0))
    throw ConfigError("run config: split fractions must all be positive");
  if (std::abs(f.train + f.val + f.test - 1.0) > 1e-9)
    throw ConfigError("run config: split fractions must sum to 1");
  return f;
}

ModelConfig parse_model(const Json& j) {
  if (!j.is_object()) throw ConfigError("run config: 'model' must be an object");
  reject_unknown(j,
                 {"preset", "d", "layers", "heads", "ffn_ratio", "dropout", "token_mode",
                  "use_positional", "use_centrality", "use_spatial_bias", "final_norm",
                  "directed", "context", "horizon", "nodes", "channels", "out_channels"},
                 "model");
  for (const char* key : {"context", "horizon", "nodes", "channels", "out_channels"})
    if (j.contains(key))
      throw ConfigError(std::string("run config: model.") + key +
                        " is not configurable here: context/horizon are top-level keys and "
                        "the data shapes come from the prepared dataset");
  ModelConfig m;
  if (j.contains("preset")) apply_preset(m, j.at("preset").get<std::string>());
  if (j.contains("d")) m.d = j.at("d").get<int>();
  if (j.contains("layers")) m.layers = j.at("layers").get<int>();
  if (j.contains("heads")) m.heads = j.at("heads").get<int>();
  if (j.contains("ffn_ratio")) m.ffn_ratio = j.at("ffn_ratio").get<int>();
  if (j.contains("dropout")) m.dropout_p = j.at("dropout").get<Scalar>();
  if (j.contains("token_mode"))
    m.token_mode = token_mode_from_string(j.at("token_mode").get<std::string>());
  if (j.contains("use_positional")) m.use_positional = j.at("use_positional").get<bool>();
  if (j.contains("use_centrality")) m.use_centrality = j.at("use_centrality").get<bool>();
  if (j.contains("use_spatial_bias"))
    m.use_spatial_bias = j.at("use_spatial_bias").get<bool>();
  if (j.contains("final_norm")) m.final_norm = j.at("final_norm").get<bool>();
  if (j.contains("directed")) m.directed = j.at("directed").get<bool>();
  return m;
}

TrainConfig parse_train(const Json& j) {
  if (!j.is_object()) throw ConfigError("run config: 'train' must be an object");
  reject_unknown(j,
                 {"epochs", "warmup_epochs", "base_lr", "weight_decay", "clip_norm",
                  "huber_delta", "layer_decay", "batch_size", "grad_accum_steps", "dropout",
                  "seed", "max_steps", "select_avg_horizons"},
                 "train");
  TrainConfig t;
  if (j.contains("epochs")) t.epochs = j.at("epochs").get<int>();
  if (j.contains("warmup_epochs")) t.warmup_epochs = j.at("warmup_epochs").get<int>();
  if (j.contains("base_lr")) t.base_lr = j.at("base_lr").get<Scalar>();
  if (j.contains("weight_decay")) t.weight_decay = j.at("weight_decay").get<Scalar>();
  if (j.contains("clip_norm"))
    t.clip_norm = j.at("clip_norm").is_null() ? std::numeric_limits<Scalar>::infinity()
                                              : j.at("clip_norm").get<Scalar>();
  if (j.contains("huber_delta")) t.huber_delta = j.at("huber_delta").get<Scalar>();
  if (j.contains("layer_decay")) t.layer_decay = j.at("layer_decay").get<Scalar>();
  if (j.contains("batch_size")) t.batch_size = j.at("batch_size").get<int>();
  if (j.contains("grad_accum_steps")) t.grad_accum_steps = j.at("grad_accum_steps").get<int>();
  if (j.contains("dropout")) t.dropout_p = j.at("dropout").get<Scalar>();
  if (j.contains("seed")) t.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("max_steps")) t.max_steps = j.at("max_steps").get<long>();
  if (j.contains("select_avg_horizons"))
    t.select_avg_horizons = j.at("select_avg_horizons").get<bool>();
  return t;
}

void parse_attend(const Json& j, RunConfig& c) {
  if (!j.is_object()) throw ConfigError("run config: 'attend' must be an object");
  reject_unknown(j, {"num_samples", "split"}, "attend");
  if (j.contains("num_samples")) c.attend_samples = j.at("num_samples").get<int>();
  if (j.contains("split")) c.attend_split = j.at("split").get<std::string>();
  if (c.attend_split != "val" && c.attend_split != "test")
    throw ConfigError("run config: attend.split must be 'val' or 'test'");
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory " + dir + ": " + ec.message());
}

std::string checkpoint_stem(std::string path) {
  for (const char* suffix : {".bin", ".json"}) {
    const std::string s = suffix;
    if (path.size() > s.size() && path.compare(path.size() - s.size(), s.size(), s) == 0)
      return path.substr(0, path.size() - s.size());
  }
  return path;
}

// Everything cmd_train/eval/attend/ablate read back from a prepare run.
struct Prepared {
  Json manifest;
  Mat weights;
  Normalizer norm;
  RawSeries train;
  RawSeries val;
  RawSeries test;
};

Mat load_adjacency_csv(const std::string& path, const std::vector<std::string>& sensor_ids) {
  const Csv csv = read_csv(path);
  const auto n = sensor_ids.size();
  if (csv.header != sensor_ids)
    throw ConfigError(path + ": adjacency header does not match the manifest sensor ids");
  if (csv.rows.size() != n)
    throw ConfigError(path + ": adjacency must be square");
  Mat w(static_cast<Index>(n), static_cast<Index>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      w(static_cast<Index>(i), static_cast<Index>(j)) = parse_double(csv.rows[i][j], "adjacency weight");
  return w;
}

Prepared load_prepared(const RunConfig& config, const std::string& out_dir) {
  Prepared p;
  p.manifest = parse_json_file(out_dir + "/manifest.json");
  if (!p.manifest.contains("kind") || p.manifest.at("kind") != "prepared-dataset")
    throw ConfigError(out_dir + "/manifest.json is not a prepared-dataset manifest");
  const int mc = p.manifest.at("context").get<int>();
  const int mh = p.manifest.at("horizon").get<int>();
  if (mc != config.model.context || mh != config.model.horizon)
    throw ConfigError("run config context/horizon (" + std::to_string(config.model.context) +
                      "/" + std::to_string(config.model.horizon) +
                      ") differ from the prepared artifacts (" + std::to_string(mc) + "/" +
                      std::to_string(mh) + "); re-run prepare");
  p.norm.mean = p.manifest.at("normalizer").at("mean").get<Scalar>();
  p.norm.std = p.manifest.at("normalizer").at("std").get<Scalar>();
  const auto ids = p.manifest.at("sensor_ids").get<std::vector<std::string>>();
  p.weights = load_adjacency_csv(out_dir + "/adjacency.csv", ids);
  p.train = load_series(out_dir + "/train");
  p.val = load_series(out_dir + "/val");
  p.test = load_series(out_dir + "/test");
  return p;
}

// Model shapes follow the prepared data; everything else from the config.
ModelConfig make_model(const RunConfig& config, const Json& manifest) {
  ModelConfig m = config.model;
  m.nodes = manifest.at("nodes").get<int>();
  m.channels = manifest.at("channels").get<int>();
  m.out_channels = 1;
  m.validate();
  return m;
}

void check_checkpoint_shapes(const Checkpoint& ck, const Json& manifest) {
  const int nodes = manifest.at("nodes").get<int>();
  const int channels = manifest.at("channels").get<int>();
  if (ck.model.nodes != nodes || ck.model.channels != channels)
    throw ConfigError("checkpoint was trained on " + std::to_string(ck.model.nodes) +
                      " nodes x " + std::to_string(ck.model.channels) +
                      " channels, archive has " + std::to_string(nodes) + " x " +
                      std::to_string(channels));
  if (ck.model.context != manifest.at("context").get<int>() ||
      ck.model.horizon != manifest.at("horizon").get<int>())
    throw ConfigError("checkpoint context/horizon do not match the prepared archive");
}

const RawSeries& pick_split(const Prepared& p, const std::string& name) {
  if (name == "val") return p.val;
  if (name == "test") return p.test;
  throw ConfigError("unknown split '" + name + "'");
}

void require_windows(const RawSeries& split, const char* name, int context, int horizon) {
  if (window_count(split, context, horizon) < 1)
    throw ConfigError(std::string(name) + " split is too short: " +
                      std::to_string(split.length()) + " rows cannot fit one " +
                      std::to_string(context) + "+" + std::to_string(horizon) + " window");
}

void write_report(const std::string& stem, const MetricsReport& report) {
  write_json_file(stem + ".json", metrics_report_to_json(report));
  write_text_file(stem + ".csv", metrics_report_to_csv(report));
}

}  // namespace

RunConfig run_config_from_json(const Json& j) {
  if (!j.is_object()) throw ConfigError("run config: expected a JSON object");
  reject_unknown(j, {"dataset", "split", "context", "horizon", "model", "train", "synth", "attend"},
                 "the top level");
  RunConfig c;
  if (j.contains("dataset")) parse_dataset(j.at("dataset"), c);
  if (j.contains("split")) c.split = parse_split(j.at("split"));
  if (j.contains("model")) c.model = parse_model(j.at("model"));
  if (j.contains("train")) c.train = parse_train(j.at("train"));
  if (j.contains("synth")) c.synth = synth_config_from_json(j.at("synth"));
  if (j.contains("attend")) parse_attend(j.at("attend"), c);

  if (j.contains("context")) c.model.context = j.at("context").get<int>();
  if (j.contains("horizon")) c.model.horizon = j.at("horizon").get<int>();
  if (c.model.context != c.model.horizon)
    throw ConfigError("run config: context (" + std::to_string(c.model.context) +
                      ") must equal horizon (" + std::to_string(c.model.horizon) +
                      "): each input token forecasts its own relative step");
  if (c.model.context < 1) throw ConfigError("run config: context must be positive");
  c.train.validate();
  return c;
}

RunConfig load_run_config(const std::string& path, const std::uint64_t* seed_override) {
  RunConfig c = run_config_from_json(path.empty() ? Json::object() : parse_json_file(path));
  if (seed_override != nullptr) {
    c.train.seed = *seed_override;
    c.synth.seed = *seed_override;
  }
  return c;
}

void cmd_synth(const RunConfig& config, const std::string& out_dir, std::ostream* progress) {
  ensure_dir(out_dir);
  const SynthData data = generate_synthetic(config.synth);
  write_series_csv(out_dir + "/series.csv", data.series);
  write_distance_csv(out_dir + "/distances.csv", data.distances);
  write_json_file(out_dir + "/synth.json", synth_config_to_json(config.synth));
  if (progress != nullptr)
    *progress << "wrote " << data.series.length() << " rows x " << data.series.nodes()
              << " sensors to " << out_dir << "\n";
}

void cmd_prepare(const RunConfig& config, const std::string& out_dir, std::ostream* progress) {
  if (!config.has_dataset)
    throw ConfigError("prepare needs a 'dataset' section (series, distances, kappa)");
  ensure_dir(out_dir);

  const RawSeries series = load_series_csv(config.series_path);
  const auto records = load_distance_csv(config.distances_path);
  const WeightedGraph graph = build_graph(series.sensor_ids, records, config.kappa);
  const int n = graph.nodes();

  const DegreeVector deg = degrees(graph.weights);
  const IntMat hops = shortest_path_hops(graph.weights);
  const long unreachable = (hops.array() == kUnreachableHops).count();
  if (unreachable == static_cast<long>(n) * (n - 1)) {
    std::cerr << "warning: kappa=" << graph.kappa
              << " keeps no edges; the graph is fully disconnected and every shortest-path "
                 "distance is unreachable\n";
  } else if (unreachable > 0) {
    std::cerr << "note: " << unreachable << " of " << n * (n - 1)
              << " node pairs have no path at kappa=" << graph.kappa << "\n";
  }

  const SplitResult split = chronological_split(series, config.split);
  require_windows(split.train, "train", config.model.context, config.model.horizon);
  require_windows(split.val, "val", config.model.context, config.model.horizon);
  require_windows(split.test, "test", config.model.context, config.model.horizon);
  const RawSeries train_imputed = impute_missing(split.train);
  const Normalizer norm = fit_normalizer(train_imputed);

  // Inspection CSVs: adjacency and hop counts under the sensor-id header,
  // -1 where no path exists.
  {
    std::vector<std::vector<std::string>> rows;
    for (int i = 0; i < n; ++i) {
      std::vector<std::string> row;
      for (int j = 0; j < n; ++j) row.push_back(format_full(graph.weights(i, j)));
      rows.push_back(std::move(row));
    }
    write_csv(out_dir + "/adjacency.csv", graph.sensor_ids, rows);
  }
  {
    std::vector<std::vector<std::string>> rows;
    for (int i = 0; i < n; ++i) {
      std::vector<std::string> row;
      row.push_back(graph.sensor_ids[static_cast<std::size_t>(i)]);
      row.push_back(std::to_string(deg.in(i)));
      row.push_back(std::to_string(deg.out(i)));
      rows.push_back(std::move(row));
    }
    write_csv(out_dir + "/degrees.csv", {"node", "in", "out"}, rows);
  }
  {
    std::vector<std::vector<std::string>> rows;
    for (int i = 0; i < n; ++i) {
      std::vector<std::string> row;
      for (int j = 0; j < n; ++j) row.push_back(std::to_string(hops(i, j)));
      rows.push_back(std::move(row));
    }
    write_csv(out_dir + "/spd.csv", graph.sensor_ids, rows);
  }

  Json manifest;
  manifest["kind"] = "prepared-dataset";
  manifest["context"] = config.model.context;
  manifest["horizon"] = config.model.horizon;
  manifest["nodes"] = n;
  manifest["channels"] = 1 + series.slots_per_day();
  manifest["interval_minutes"] = series.interval_minutes;
  manifest["slots_per_day"] = series.slots_per_day();
  manifest["rows"] = Json{{"train", split.train.length()},
                          {"val", split.val.length()},
                          {"test", split.test.length()}};
  manifest["normalizer"] = Json{{"mean", norm.mean}, {"std", norm.std}};
  manifest["graph"] = Json{{"kappa", graph.kappa},
                           {"sigma", graph.sigma},
                           {"max_in_degree", deg.max_in()},
                           {"max_out_degree", deg.max_out()},
                           {"max_hops", max_finite_hops(hops)},
                           {"unreachable_pairs", unreachable}};
  manifest["sensor_ids"] = graph.sensor_ids;
  write_json_file(out_dir + "/manifest.json", manifest);

  save_series(out_dir + "/train", train_imputed, Json{{"split", "train"}, {"imputed", true}});
  save_series(out_dir + "/val", split.val, Json{{"split", "val"}, {"imputed", false}});
  save_series(out_dir + "/test", split.test, Json{{"split", "test"}, {"imputed", false}});

  if (progress != nullptr)
    *progress << "prepared " << n << " sensors, " << series.length() << " rows ("
              << split.train.length() << "/" << split.val.length() << "/"
              << split.test.length() << " split) into " << out_dir << "\n";
}

void cmd_train(const RunConfig& config, const std::string& out_dir, const std::string& resume,
               const std::string& ablate, std::ostream* progress) {
  const Prepared prepared = load_prepared(config, out_dir);
  ModelConfig model = make_model(config, prepared.manifest);
  if (!ablate.empty()) {
    model = apply_ablation(model, ablation_variant_from_string(ablate));
    model.validate();
  }
  const GraphInputs graph = build_graph_inputs(prepared.weights, model.layout());

  Checkpoint start;
  const bool resuming = !resume.empty();
  if (resuming) start = load_checkpoint(checkpoint_stem(resume));

  const TrainResult result =
      train(model, config.train, prepared.train, prepared.val, prepared.norm, graph, out_dir,
            resuming ? &start : nullptr, progress);
  if (progress != nullptr)
    *progress << "ran " << result.steps_run << " steps; best epoch " << result.best.epoch
              << " val mae "
              << result.best.val.at("horizons").back().at("mae").get<Scalar>() << "\n";
}

void cmd_eval(const RunConfig& config, const std::string& out_dir, const std::string& checkpoint,
              std::ostream* progress) {
  const Prepared prepared = load_prepared(config, out_dir);
  const std::string stem = checkpoint.empty() ? out_dir + "/best" : checkpoint_stem(checkpoint);
  const Checkpoint ck = load_checkpoint(stem);
  check_checkpoint_shapes(ck, prepared.manifest);
  const GraphInputs graph = build_graph_inputs(prepared.weights, ck.model.layout());
  const std::vector<int> horizons = default_horizons(ck.model.horizon);

  const MetricsReport val = evaluate_series(ck.params, ck.model, graph, ck.norm, prepared.val, horizons);
  const MetricsReport test =
      evaluate_series(ck.params, ck.model, graph, ck.norm, prepared.test, horizons);
  write_report(out_dir + "/metrics_val", val);
  write_report(out_dir + "/metrics_test", test);
  if (progress != nullptr) {
    for (const auto& row : test.rows)
      *progress << "test h=" << row.horizon << "  mae " << row.metrics.mae << "  rmse "
                << row.metrics.rmse << "  mape " << row.metrics.mape << "\n";
  }
}

void cmd_attend(const RunConfig& config, const std::string& out_dir, const std::string& checkpoint,
                bool per_layer, std::ostream* progress) {
  const Prepared prepared = load_prepared(config, out_dir);
  const std::string stem = checkpoint.empty() ? out_dir + "/best" : checkpoint_stem(checkpoint);
  const Checkpoint ck = load_checkpoint(stem);
  check_checkpoint_shapes(ck, prepared.manifest);
  const GraphInputs graph = build_graph_inputs(prepared.weights, ck.model.layout());

  const auto traces = collect_traces(ck.params, ck.model, graph, ck.norm,
                                     pick_split(prepared, config.attend_split), config.attend_samples);
  const HeatmapBundle maps = attention_heatmaps(traces, ck.model.layout(), per_layer);
  write_text_file(out_dir + "/node_node.csv", matrix_csv(maps.node_node));
  write_text_file(out_dir + "/time_time.csv", matrix_csv(maps.time_time));
  if (per_layer) {
    for (std::size_t j = 0; j < maps.layer_node_node.size(); ++j) {
      const std::string tag = "layer_" + std::to_string(j);
      write_text_file(out_dir + "/" + tag + "_node_node.csv", matrix_csv(maps.layer_node_node[j]));
      write_text_file(out_dir + "/" + tag + "_time_time.csv", matrix_csv(maps.layer_time_time[j]));
    }
  }
  if (progress != nullptr)
    *progress << "averaged " << traces.size() << " samples from the " << config.attend_split
              << " split into " << out_dir << "\n";
}

void cmd_ablate(const RunConfig& config, const std::string& out_dir, const std::string& variant,
                std::ostream* progress) {
  if (variant.empty()) {
    std::string all;
    for (const auto& name : ablation_variant_names()) all += (all.empty() ? "" : ", ") + name;
    throw ConfigError("ablate needs --ablate <variant>; one of: " + all);
  }
  ablation_variant_from_string(variant);  // reject bad names before touching the filesystem
  const Prepared prepared = load_prepared(config, out_dir);
  const ModelConfig base = make_model(config, prepared.manifest);
  const std::string sub = out_dir + "/ablate_" + variant;
  ensure_dir(sub);

  const AblationResult result =
      run_ablation(base, config.train, prepared.weights, prepared.train, prepared.val,
                   prepared.test, prepared.norm, variant, sub, progress);

  Json report;
  report["variant"] = result.variant;
  report["model"] = model_config_to_json(result.config);
  report["test"] = metrics_report_to_json(result.test);
  const std::string baseline_path = out_dir + "/metrics_test.json";
  if (std::filesystem::exists(baseline_path)) {
    const MetricsReport baseline = metrics_report_from_json(parse_json_file(baseline_path));
    report["baseline_test"] = metrics_report_to_json(baseline);
    Json changes = Json::array();
    for (const auto& row : result.test.rows) {
      for (const auto& b : baseline.rows) {
        if (b.horizon != row.horizon) continue;
        changes.push_back(Json{{"horizon", row.horizon},
                               {"mae_change_percent",
                                100.0 * (row.metrics.mae - b.metrics.mae) / b.metrics.mae}});
      }
    }
    report["relative_to_baseline"] = changes;
  }
  write_json_file(out_dir + "/ablation_" + variant + ".json", report);
  if (progress != nullptr)
    *progress << "ablation " << variant << " test mae "
              << result.test.rows.back().metrics.mae << " written to " << out_dir << "\n";
}

}  // namespace stg
