#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "stg/container.hpp"
#include "stg/types.hpp"

namespace stg {

// Evenly spaced multivariate readings in original units; 0 marks a missing
// reading.  Rows are time, columns are sensors.
struct RawSeries {
  std::vector<std::string> sensor_ids;
  std::vector<std::int64_t> timestamps;  // epoch seconds, one per row
  Mat values;                            // L x N
  int interval_minutes = 0;

  Index length() const { return values.rows(); }
  int nodes() const { return static_cast<int>(values.cols()); }
  int slots_per_day() const { return 1440 / interval_minutes; }

  // Which fixed daily slot a row falls into (0 .. slots_per_day-1).
  int slot_of(Index row) const {
    const std::int64_t sec = ((timestamps[static_cast<std::size_t>(row)] % 86400) + 86400) % 86400;
    return static_cast<int>(sec / (static_cast<std::int64_t>(interval_minutes) * 60));
  }
};

// Reads 'timestamp,<id>,...' rows; timestamps must be strictly increasing and
// evenly spaced, and the spacing must divide a day.
RawSeries load_series_csv(const std::string& path);

struct SplitFractions {
  Scalar train = 0.7;
  Scalar val = 0.1;
  Scalar test = 0.2;
};

// Order-preserving chronological split.  Row counts are floor(L*train) and
// floor(L*val); the test split takes the remainder.
struct SplitResult {
  RawSeries train;
  RawSeries val;
  RawSeries test;
};

SplitResult chronological_split(const RawSeries& series, const SplitFractions& fractions);

// Fills missing readings with historical averages: the sensor's mean over
// present readings in the same daily slot, else the sensor's overall present
// mean, else the value stays 0.
RawSeries impute_missing(const RawSeries& series);

// Z-score over every value of the (already imputed) fitting split;
// population standard deviation.
struct Normalizer {
  Scalar mean = 0;
  Scalar std = 1;

  Scalar normalize(Scalar v) const { return (v - mean) / std; }
  Scalar denormalize(Scalar z) const { return z * std + mean; }
};

Normalizer fit_normalizer(const RawSeries& series);

// One training example.  x holds the flattened context, one row per
// (step, node) pair in time-major order; column 0 is the normalized reading
// and the rest one-hot the reading's daily slot.  y and mask cover the
// forecast horizon in original units; mask is 1 where the truth is present.
struct WindowedSample {
  Mat x;     // (context*N) x (1 + slots_per_day)
  Mat y;     // horizon x N
  Mat mask;  // horizon x N
  long anchor = 0;
};

long window_count(const RawSeries& series, int context, int horizon);

WindowedSample make_window(const RawSeries& series, const Normalizer& norm, int context,
                           int horizon, long anchor);

std::vector<WindowedSample> make_windows(const RawSeries& series, const Normalizer& norm,
                                         int context, int horizon);

// Split archive: values + timestamps in the tensor container, identity and
// cadence in its metadata, plus any caller-provided extras.
void save_series(const std::string& stem, const RawSeries& series, const Json& extra_meta);
RawSeries load_series(const std::string& stem, Json* meta_out = nullptr);

}  // namespace stg
