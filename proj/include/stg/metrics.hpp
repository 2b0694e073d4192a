#pragma once

#include <string>
#include <vector>

#include "stg/container.hpp"
#include "stg/dataset.hpp"
#include "stg/model.hpp"
#include "stg/types.hpp"

namespace stg {

// Forecast-quality summary over observed entries; mape is in percent.
struct Metrics {
  Scalar mae = 0;
  Scalar rmse = 0;
  Scalar mape = 0;
};

// Streaming masked accumulation.  Entries whose truth is 0 (or whose mask is
// 0) count as missing and contribute to none of the three metrics.
struct MetricsAccumulator {
  Scalar abs_sum = 0;
  Scalar sq_sum = 0;
  Scalar ape_sum = 0;
  long count = 0;

  void add(const Mat& pred, const Mat& truth);
  void add(const Mat& pred, const Mat& truth, const Mat& mask);
  Metrics finish() const;  // errors when nothing was observed
};

Metrics masked_metrics(const Mat& pred, const Mat& truth);

// First h forecast steps of a horizon x N grid.
Mat horizon_slice(const Mat& grid, int h);

struct HorizonMetrics {
  int horizon = 0;
  Metrics metrics;
};

struct MetricsReport {
  std::vector<HorizonMetrics> rows;

  const Metrics& at_horizon(int h) const;
};

// The published evaluation horizons {3, 6, 12}, clipped to the model horizon
// (which is always included).
std::vector<int> default_horizons(int horizon);

Json metrics_report_to_json(const MetricsReport& report);
MetricsReport metrics_report_from_json(const Json& j);
// Header "horizon,mae,rmse,mape" plus one full-precision row per horizon.
std::string metrics_report_to_csv(const MetricsReport& report);

// Runs the model over every window of a split and scores each horizon.
MetricsReport evaluate_series(const ParameterSet& params, const ModelConfig& config,
                              const GraphInputs& graph, const Normalizer& norm,
                              const RawSeries& split, const std::vector<int>& horizons);

// Repeat-the-last-context-row floor every forecaster must beat.
MetricsReport persistence_metrics(const RawSeries& split, int context, int horizon,
                                  const std::vector<int>& horizons);

}  // namespace stg
