#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "stg/commands.hpp"
#include "stg/csv.hpp"
#include "stg/graph.hpp"
#include "stg/metrics.hpp"

using namespace stg;

namespace {

namespace fs = std::filesystem;

Json tiny_run_json(const std::string& data_dir) {
  return Json{
      {"dataset", Json{{"series", data_dir + "/series.csv"},
                       {"distances", data_dir + "/distances.csv"},
                       {"kappa", 6.0}}},
      {"context", 4},
      {"horizon", 4},
      {"model",
       Json{{"d", 16}, {"layers", 2}, {"heads", 2}, {"ffn_ratio", 2}, {"dropout", 0.1}}},
      {"train",
       Json{{"epochs", 2}, {"warmup_epochs", 1}, {"batch_size", 8}, {"base_lr", 1e-3}}},
      {"synth",
       Json{{"nodes", 5}, {"length", 400}, {"interval_minutes", 120}, {"seed", 9}}},
      {"attend", Json{{"num_samples", 3}}}};
}

std::string file_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

Mat parse_matrix(const std::string& text) {
  std::vector<std::vector<Scalar>> rows;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    std::string line = text.substr(start, end - start);
    start = end + 1;
    if (line.empty()) continue;
    std::vector<Scalar> row;
    std::size_t field = 0;
    while (field <= line.size()) {
      std::size_t comma = line.find(',', field);
      if (comma == std::string::npos) comma = line.size();
      row.push_back(parse_double(line.substr(field, comma - field), "matrix entry"));
      field = comma + 1;
    }
    rows.push_back(std::move(row));
  }
  Mat m(static_cast<Index>(rows.size()), static_cast<Index>(rows.empty() ? 0 : rows[0].size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      m(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
  return m;
}

// One fully-run pipeline shared by the read-only cases below.
struct Pipeline {
  fs::path root;
  RunConfig config;
};

const Pipeline& pipeline() {
  static Pipeline p = [] {
    Pipeline out;
    out.root = fs::temp_directory_path() / "stg_cli_pipeline";
    fs::remove_all(out.root);
    fs::create_directories(out.root);
    const std::string data = (out.root / "data").string();
    const std::string run = (out.root / "run").string();
    out.config = run_config_from_json(tiny_run_json(data));
    cmd_synth(out.config, data);
    cmd_prepare(out.config, run);
    cmd_train(out.config, run);
    cmd_eval(out.config, run);
    return out;
  }();
  return p;
}

}  // namespace

TEST_CASE("run config parses defaults, sections and overrides") {
  const RunConfig def = run_config_from_json(Json::object());
  CHECK(def.has_dataset == false);
  CHECK(def.model.context == 12);
  CHECK(def.train.epochs == 50);
  CHECK(def.attend_samples == 8);
  CHECK(def.attend_split == "test");

  const RunConfig c = run_config_from_json(tiny_run_json("/x"));
  CHECK(c.has_dataset);
  CHECK(c.series_path == "/x/series.csv");
  CHECK(c.kappa == 6.0);
  CHECK(c.model.d == 16);
  CHECK(c.model.context == 4);
  CHECK(c.model.horizon == 4);
  CHECK(c.train.epochs == 2);
  CHECK(c.synth.nodes == 5);
  CHECK(c.attend_samples == 3);

  // Preset then explicit override.
  const RunConfig pre = run_config_from_json(
      Json{{"model", Json{{"preset", "mini"}, {"heads", 8}}}});
  CHECK(pre.model.d == 128);
  CHECK(pre.model.layers == 6);
  CHECK(pre.model.heads == 8);
}

TEST_CASE("run config rejects malformed input") {
  CHECK_THROWS_AS(run_config_from_json(Json{{"bogus", 1}}), ConfigError);
  CHECK_THROWS_AS(run_config_from_json(Json{{"model", Json{{"bogus", 1}}}}), ConfigError);
  CHECK_THROWS_AS(run_config_from_json(Json{{"train", Json{{"bogus", 1}}}}), ConfigError);
  CHECK_THROWS_AS(run_config_from_json(Json{{"context", 4}, {"horizon", 5}}), ConfigError);
  CHECK_THROWS_AS(run_config_from_json(Json{{"model", Json{{"nodes", 7}}}}), ConfigError);
  CHECK_THROWS_AS(run_config_from_json(Json{{"model", Json{{"context", 7}}}}), ConfigError);
  CHECK_THROWS_AS(
      run_config_from_json(Json{{"dataset", Json{{"series", "s.csv"}, {"kappa", 1.0}}}}),
      ConfigError);
  CHECK_THROWS_AS(run_config_from_json(
                      Json{{"split", Json{{"train", 0.5}, {"val", 0.1}, {"test", 0.1}}}}),
                  ConfigError);
  CHECK_THROWS_AS(run_config_from_json(Json{{"attend", Json{{"split", "train"}}}}),
                  ConfigError);

  // The config text must be valid JSON to begin with.
  const auto dir = fs::temp_directory_path() / "stg_cli_badjson";
  fs::create_directories(dir);
  write_text_file((dir / "bad.json").string(), "{not json");
  CHECK_THROWS_AS(load_run_config((dir / "bad.json").string(), nullptr), ConfigError);
}

TEST_CASE("seed flag overrides the config seeds") {
  Json j = tiny_run_json("/x");
  j["train"]["seed"] = 5;
  const std::uint64_t seed = 42;
  const RunConfig overridden = run_config_from_json(j);
  CHECK(overridden.train.seed == 5);
  CHECK(overridden.synth.seed == 9);

  const auto dir = fs::temp_directory_path() / "stg_cli_seed";
  fs::create_directories(dir);
  write_text_file((dir / "run.json").string(), j.dump());
  const RunConfig forced = load_run_config((dir / "run.json").string(), &seed);
  CHECK(forced.train.seed == 42);
  CHECK(forced.synth.seed == 42);
}

TEST_CASE("prepare writes every artifact and the manifest describes the data") {
  const Pipeline& p = pipeline();
  const fs::path run = p.root / "run";
  for (const char* name : {"adjacency.csv", "degrees.csv", "spd.csv", "manifest.json",
                           "train.bin", "train.json", "val.bin", "val.json", "test.bin",
                           "test.json"})
    CHECK(fs::exists(run / name));

  const Json manifest = parse_json_file((run / "manifest.json").string());
  CHECK(manifest.at("kind") == "prepared-dataset");
  CHECK(manifest.at("nodes") == 5);
  CHECK(manifest.at("slots_per_day") == 12);
  CHECK(manifest.at("channels") == 13);  // reading + one-hot slot
  CHECK(manifest.at("context") == 4);
  CHECK(manifest.at("rows").at("train") == 280);
  CHECK(manifest.at("rows").at("val") == 40);
  CHECK(manifest.at("rows").at("test") == 80);
  CHECK(manifest.at("normalizer").at("std").get<Scalar>() > 0);
  CHECK(manifest.at("graph").at("unreachable_pairs") == 0);

  // The adjacency inspection CSV round-trips the kernel weights exactly.
  const auto records = load_distance_csv(p.config.distances_path);
  const auto ids = manifest.at("sensor_ids").get<std::vector<std::string>>();
  const WeightedGraph g = build_graph(ids, records, p.config.kappa);
  const Csv adj = read_csv((run / "adjacency.csv").string());
  CHECK(adj.header == ids);
  for (int i = 0; i < g.nodes(); ++i)
    for (int j = 0; j < g.nodes(); ++j)
      CHECK(parse_double(adj.rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)],
                         "w") == g.weights(i, j));

  // Train archive is imputed: no zeros survive; val/test stay raw.
  const RawSeries train = load_series((run / "train").string());
  CHECK((train.values.array() == 0.0).count() == 0);
}

TEST_CASE("prepare on the default fixture records one channel per 5-minute slot") {
  const auto root = fs::temp_directory_path() / "stg_cli_default_fixture";
  fs::remove_all(root);
  fs::create_directories(root);
  RunConfig config = run_config_from_json(
      Json{{"dataset", Json{{"series", (root / "data/series.csv").string()},
                            {"distances", (root / "data/distances.csv").string()},
                            {"kappa", 6.0}}}});
  cmd_synth(config, (root / "data").string());  // default generator knobs
  cmd_prepare(config, (root / "run").string());

  const Json manifest = parse_json_file((root / "run" / "manifest.json").string());
  CHECK(manifest.at("nodes") == 10);
  CHECK(manifest.at("interval_minutes") == 5);
  CHECK(manifest.at("slots_per_day") == 288);
  CHECK(manifest.at("channels") == 289);
  CHECK(manifest.at("rows").at("train") == 3500);
  CHECK(manifest.at("graph").at("unreachable_pairs") == 0);
}

TEST_CASE("prepare is idempotent byte for byte") {
  const Pipeline& p = pipeline();
  const fs::path again = p.root / "run_again";
  cmd_prepare(p.config, again.string());
  for (const char* name : {"adjacency.csv", "degrees.csv", "spd.csv", "manifest.json",
                           "train.bin", "train.json", "val.bin", "val.json", "test.bin",
                           "test.json"})
    CHECK(file_bytes(again / name) == file_bytes(p.root / "run" / name));
}

TEST_CASE("kappa below the minimum distance disconnects every pair") {
  const Pipeline& p = pipeline();
  RunConfig config = p.config;
  config.kappa = 1e-6;
  const fs::path out = p.root / "disconnected";
  cmd_prepare(config, out.string());

  const Csv spd = read_csv((out / "spd.csv").string());
  for (std::size_t i = 0; i < spd.rows.size(); ++i)
    for (std::size_t j = 0; j < spd.rows[i].size(); ++j)
      CHECK(spd.rows[i][j] == (i == j ? "0" : "-1"));
  const Json manifest = parse_json_file((out / "manifest.json").string());
  CHECK(manifest.at("graph").at("unreachable_pairs") == 5 * 4);
}

TEST_CASE("prepare rejects splits too short for one window") {
  const Pipeline& p = pipeline();
  RunConfig config = p.config;
  config.split = SplitFractions{0.97, 0.015, 0.015};  // 6-row val < context+horizon
  CHECK_THROWS_AS(cmd_prepare(config, (p.root / "short").string()), ConfigError);
}

TEST_CASE("train writes a log row per epoch and both checkpoints") {
  const Pipeline& p = pipeline();
  const fs::path run = p.root / "run";
  for (const char* name : {"log.csv", "best.bin", "best.json", "latest.bin", "latest.json"})
    CHECK(fs::exists(run / name));
  const Csv log = read_csv((run / "log.csv").string());
  CHECK(log.header ==
        std::vector<std::string>{"epoch", "train_loss", "val_mae", "val_rmse", "val_mape", "lr"});
  CHECK(log.rows.size() == 2);
}

TEST_CASE("eval reproduces the logged best val MAE exactly") {
  const Pipeline& p = pipeline();
  const fs::path run = p.root / "run";
  const Json best = parse_json_file((run / "best.json").string());
  const Json val = parse_json_file((run / "metrics_val.json").string());
  // Same code path, same checkpoint: the numbers must match bitwise.
  CHECK(val.at("horizons") == best.at("meta").at("val").at("horizons"));

  const Json test = parse_json_file((run / "metrics_test.json").string());
  CHECK(test.at("horizons").size() == 2);  // horizons {3, 4} for a 4-step window
  for (const auto& row : test.at("horizons")) {
    CHECK(std::isfinite(row.at("mae").get<Scalar>()));
    CHECK(std::isfinite(row.at("rmse").get<Scalar>()));
    CHECK(std::isfinite(row.at("mape").get<Scalar>()));
  }
  CHECK(fs::exists(run / "metrics_val.csv"));
  CHECK(fs::exists(run / "metrics_test.csv"));
}

TEST_CASE("attend writes maps shaped by the manifest and per-layer files on demand") {
  const Pipeline& p = pipeline();
  const fs::path run = p.root / "run";
  cmd_attend(p.config, run.string());
  const Mat node_node = parse_matrix(file_bytes(run / "node_node.csv"));
  const Mat time_time = parse_matrix(file_bytes(run / "time_time.csv"));
  CHECK(node_node.rows() == 5);
  CHECK(node_node.cols() == 5);
  CHECK(time_time.rows() == 4);
  CHECK(time_time.cols() == 4);
  CHECK(!fs::exists(run / "layer_0_node_node.csv"));

  cmd_attend(p.config, run.string(), "", true);
  for (int layer = 0; layer < 2; ++layer) {
    const std::string tag = "layer_" + std::to_string(layer);
    CHECK(fs::exists(run / (tag + "_node_node.csv")));
    CHECK(fs::exists(run / (tag + "_time_time.csv")));
  }

  RunConfig none = p.config;
  none.attend_samples = 0;
  CHECK_THROWS_AS(cmd_attend(none, run.string()), ConfigError);
}

TEST_CASE("eval rejects a checkpoint whose shapes do not match the archive") {
  const Pipeline& p = pipeline();
  // Prepare a 4-node variant of the same data and point eval at the 5-node
  // checkpoint.
  RunConfig other = p.config;
  Json j = tiny_run_json((p.root / "data4").string());
  j["synth"]["nodes"] = 4;
  other = run_config_from_json(j);
  const fs::path data4 = p.root / "data4";
  const fs::path run4 = p.root / "run4";
  cmd_synth(other, data4.string());
  cmd_prepare(other, run4.string());
  CHECK_THROWS_AS(
      cmd_eval(other, run4.string(), (p.root / "run" / "best.bin").string()), ConfigError);
}

TEST_CASE("train with an ablation flag equals training the flag explicitly") {
  const Pipeline& p = pipeline();
  const fs::path a = p.root / "flagged";
  const fs::path b = p.root / "explicit";
  cmd_prepare(p.config, a.string());
  cmd_train(p.config, a.string(), "", "no_centrality");

  RunConfig explicit_config = p.config;
  explicit_config.model.use_centrality = false;
  cmd_prepare(explicit_config, b.string());
  cmd_train(explicit_config, b.string());

  CHECK(file_bytes(a / "best.bin") == file_bytes(b / "best.bin"));
  CHECK(file_bytes(a / "log.csv") == file_bytes(b / "log.csv"));
}

TEST_CASE("ablate trains the variant and reports the change against the baseline") {
  const Pipeline& p = pipeline();
  const fs::path run = p.root / "run";
  cmd_ablate(p.config, run.string(), "no_spatial");

  const Json report = parse_json_file((run / "ablation_no_spatial.json").string());
  CHECK(report.at("variant") == "no_spatial");
  CHECK(report.at("model").at("use_spatial_bias") == false);
  CHECK(report.at("test").at("horizons").size() == 2);
  REQUIRE(report.contains("relative_to_baseline"));  // metrics_test.json exists
  CHECK(report.at("relative_to_baseline").size() == 2);
  for (const auto& row : report.at("relative_to_baseline"))
    CHECK(std::isfinite(row.at("mae_change_percent").get<Scalar>()));
  CHECK(fs::exists(run / "ablate_no_spatial" / "best.bin"));
  CHECK(fs::exists(run / "ablate_no_spatial" / "log.csv"));

  CHECK_THROWS_AS(cmd_ablate(p.config, run.string(), ""), ConfigError);
  CHECK_THROWS_AS(cmd_ablate(p.config, run.string(), "nonsense"), ConfigError);
}
