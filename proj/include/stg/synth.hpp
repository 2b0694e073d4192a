#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "stg/dataset.hpp"
#include "stg/graph.hpp"
#include "stg/types.hpp"

namespace stg {

// Knobs for the bundled fixture generator: graph diffusion with daily
// periodicity on a random geometric graph.  Sensors are points in a square
// of side coord_scale; every ordered pair is listed with its Euclidean
// distance, and kappa thresholds the Gaussian kernel exactly as for real
// sensor networks.  Each sensor emits
//   base + daily_amp * sin(day cycle + phase_i)
//        + half_day_amp * sin(two cycles per day + phase'_i)
//        + u_t[i]
// where u evolves as a damped diffusion over the kernel graph,
//   u_{t+1} = rho * (P u_t) + noise,   P = row-normalised kernel weights,
// so neighbouring sensors share slowly mixing fluctuations.  Readings are
// clamped to [floor, ceiling] and a missing_rate fraction is zeroed to
// exercise imputation and masked evaluation.
struct SynthConfig {
  int nodes = 10;
  long length = 5000;
  int interval_minutes = 5;
  Scalar kappa = 6.0;
  Scalar coord_scale = 10.0;
  Scalar base = 55.0;
  Scalar daily_amp = 10.0;
  Scalar half_day_amp = 5.0;
  Scalar rho = 0.85;
  Scalar noise_std = 0.3;
  Scalar missing_rate = 0.01;
  Scalar floor = 5.0;
  Scalar ceiling = 120.0;
  std::uint64_t seed = 0;

  void validate() const;
};

// Every key optional; unknown keys rejected.
SynthConfig synth_config_from_json(const Json& j);
Json synth_config_to_json(const SynthConfig& config);

struct SynthData {
  RawSeries series;
  std::vector<DistanceRecord> distances;
  WeightedGraph graph;  // the kernel graph the simulator diffused over
};

SynthData generate_synthetic(const SynthConfig& config);

// 'timestamp,<id>,...' rows with full-precision readings, matching
// load_series_csv.
void write_series_csv(const std::string& path, const RawSeries& series);

// 'from,to,dist' rows.
void write_distance_csv(const std::string& path, const std::vector<DistanceRecord>& records);

}  // namespace stg
