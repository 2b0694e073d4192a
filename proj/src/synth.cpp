#include "stg/synth.hpp"

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "stg/csv.hpp"
#include "stg/rng.hpp"

namespace stg {
namespace {

// Midnight UTC so daily slots line up with row indices from the start.
constexpr std::int64_t kStartEpoch = 1330560000;  // 2012-03-01 00:00:00

template <typename T>
T json_or(const Json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  return j.at(key).get<T>();
}

void reject_unknown_keys(const Json& j) {
  static const char* known[] = {"nodes",        "length",     "interval_minutes",
                                "kappa",        "coord_scale", "base",
                                "daily_amp",    "half_day_amp", "rho",
                                "noise_std",    "missing_rate", "floor",
                                "ceiling",      "seed"};
  for (const auto& item : j.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || item.key() == k;
    if (!ok) throw ConfigError("synth config: unknown key '" + item.key() + "'");
  }
}

}  // namespace

void SynthConfig::validate() const {
  if (nodes < 2) throw ConfigError("synth config: nodes must be at least 2");
  if (length < 2) throw ConfigError("synth config: length must be at least 2");
  if (interval_minutes <= 0 || 1440 % interval_minutes != 0)
    throw ConfigError("synth config: interval_minutes must be positive and divide a day");
  if (!(kappa > 0)) throw ConfigError("synth config: kappa must be positive");
  if (!(coord_scale > 0)) throw ConfigError("synth config: coord_scale must be positive");
  if (!(rho >= 0 && rho < 1)) throw ConfigError("synth config: rho must lie in [0, 1)");
  if (noise_std < 0) throw ConfigError("synth config: noise_std must be non-negative");
  if (!(missing_rate >= 0 && missing_rate < 1))
    throw ConfigError("synth config: missing_rate must lie in [0, 1)");
  if (!(floor < ceiling)) throw ConfigError("synth config: floor must be below ceiling");
  if (!(floor > 0)) throw ConfigError("synth config: floor must be positive, 0 marks missing");
}

SynthConfig synth_config_from_json(const Json& j) {
  if (!j.is_object()) throw ConfigError("synth config: expected a JSON object");
  reject_unknown_keys(j);
  SynthConfig c;
  c.nodes = json_or(j, "nodes", c.nodes);
  c.length = json_or(j, "length", c.length);
  c.interval_minutes = json_or(j, "interval_minutes", c.interval_minutes);
  c.kappa = json_or(j, "kappa", c.kappa);
  c.coord_scale = json_or(j, "coord_scale", c.coord_scale);
  c.base = json_or(j, "base", c.base);
  c.daily_amp = json_or(j, "daily_amp", c.daily_amp);
  c.half_day_amp = json_or(j, "half_day_amp", c.half_day_amp);
  c.rho = json_or(j, "rho", c.rho);
  c.noise_std = json_or(j, "noise_std", c.noise_std);
  c.missing_rate = json_or(j, "missing_rate", c.missing_rate);
  c.floor = json_or(j, "floor", c.floor);
  c.ceiling = json_or(j, "ceiling", c.ceiling);
  c.seed = json_or(j, "seed", c.seed);
  c.validate();
  return c;
}

Json synth_config_to_json(const SynthConfig& config) {
  Json j;
  j["nodes"] = config.nodes;
  j["length"] = config.length;
  j["interval_minutes"] = config.interval_minutes;
  j["kappa"] = config.kappa;
  j["coord_scale"] = config.coord_scale;
  j["base"] = config.base;
  j["daily_amp"] = config.daily_amp;
  j["half_day_amp"] = config.half_day_amp;
  j["rho"] = config.rho;
  j["noise_std"] = config.noise_std;
  j["missing_rate"] = config.missing_rate;
  j["floor"] = config.floor;
  j["ceiling"] = config.ceiling;
  j["seed"] = config.seed;
  return j;
}

SynthData generate_synthetic(const SynthConfig& config) {
  config.validate();
  Rng rng(config.seed, rng_stream::kSynth);
  const int n = config.nodes;

  // Sensor locations, then every ordered pair's Euclidean distance.
  Mat points(n, 2);
  for (int i = 0; i < n; ++i) {
    points(i, 0) = rng.uniform(0.0, config.coord_scale);
    points(i, 1) = rng.uniform(0.0, config.coord_scale);
  }
  SynthData data;
  std::vector<std::string> ids;
  for (int i = 0; i < n; ++i) ids.push_back(std::to_string(i));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      const Scalar dx = points(i, 0) - points(j, 0);
      const Scalar dy = points(i, 1) - points(j, 1);
      data.distances.push_back({ids[static_cast<std::size_t>(i)],
                                ids[static_cast<std::size_t>(j)],
                                std::sqrt(dx * dx + dy * dy)});
    }
  }
  data.graph = build_graph(ids, data.distances, config.kappa);

  // Diffusion operator: row-normalised kernel weights off the diagonal.
  // An isolated sensor keeps its own state.
  Mat p = data.graph.weights;
  p.diagonal().setZero();
  for (int i = 0; i < n; ++i) {
    const Scalar row_sum = p.row(i).sum();
    if (row_sum > 0)
      p.row(i) /= row_sum;
    else
      p(i, i) = 1.0;
  }

  // Per-sensor phases for the two daily harmonics.
  constexpr Scalar kTau = 2.0 * std::numbers::pi_v<Scalar>;
  Vec phase1(n), phase2(n);
  for (int i = 0; i < n; ++i) phase1(i) = rng.uniform(0.0, kTau);
  for (int i = 0; i < n; ++i) phase2(i) = rng.uniform(0.0, kTau);

  RawSeries& series = data.series;
  series.sensor_ids = ids;
  series.interval_minutes = config.interval_minutes;
  series.values.resize(config.length, n);
  series.timestamps.resize(static_cast<std::size_t>(config.length));

  const int slots = 1440 / config.interval_minutes;
  Vec u = Vec::Zero(n);
  // Burn-in so the diffusion term starts at its stationary distribution.
  for (int t = 0; t < 200; ++t) {
    Vec next = config.rho * (p * u);
    for (int i = 0; i < n; ++i) next(i) += rng.normal(0.0, config.noise_std);
    u = next;
  }
  for (long t = 0; t < config.length; ++t) {
    series.timestamps[static_cast<std::size_t>(t)] =
        kStartEpoch + static_cast<std::int64_t>(t) * config.interval_minutes * 60;
    const Scalar day = static_cast<Scalar>(t % slots) / static_cast<Scalar>(slots);
    for (int i = 0; i < n; ++i) {
      Scalar v = config.base + config.daily_amp * std::sin(kTau * day + phase1(i)) +
                 config.half_day_amp * std::sin(2.0 * kTau * day + phase2(i)) + u(i);
      v = std::min(config.ceiling, std::max(config.floor, v));
      series.values(t, i) = v;
    }
    Vec next = config.rho * (p * u);
    for (int i = 0; i < n; ++i) next(i) += rng.normal(0.0, config.noise_std);
    u = next;
  }

  // Knock out a fraction of readings; 0 is the missing marker.
  if (config.missing_rate > 0) {
    for (long t = 0; t < config.length; ++t)
      for (int i = 0; i < n; ++i)
        if (rng.bernoulli(config.missing_rate)) series.values(t, i) = 0.0;
  }
  return data;
}

void write_series_csv(const std::string& path, const RawSeries& series) {
  std::vector<std::string> header;
  header.push_back("timestamp");
  for (const auto& id : series.sensor_ids) header.push_back(id);
  std::vector<std::vector<std::string>> rows;
  rows.reserve(static_cast<std::size_t>(series.length()));
  for (Index t = 0; t < series.length(); ++t) {
    std::vector<std::string> row;
    row.reserve(header.size());
    row.push_back(format_timestamp(series.timestamps[static_cast<std::size_t>(t)]));
    for (int i = 0; i < series.nodes(); ++i) row.push_back(format_full(series.values(t, i)));
    rows.push_back(std::move(row));
  }
  write_csv(path, header, rows);
}

void write_distance_csv(const std::string& path, const std::vector<DistanceRecord>& records) {
  std::vector<std::vector<std::string>> rows;
  rows.reserve(records.size());
  for (const auto& r : records) rows.push_back({r.from, r.to, format_full(r.dist)});
  write_csv(path, {"from", "to", "dist"}, rows);
}

}  // namespace stg
