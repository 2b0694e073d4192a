#include "stg/dataset.hpp"

#include <cmath>

#include "stg/csv.hpp"

namespace stg {

RawSeries load_series_csv(const std::string& path) {
  const Csv csv = read_csv(path);
  if (csv.header.size() < 2 || csv.header[0] != "timestamp") {
    throw ConfigError(path + ": series header must start with 'timestamp' and list sensors");
  }
  if (csv.rows.size() < 2) throw ConfigError(path + ": series needs at least two rows");

  RawSeries s;
  s.sensor_ids.assign(csv.header.begin() + 1, csv.header.end());
  const Index n = static_cast<Index>(s.sensor_ids.size());
  const Index rows = static_cast<Index>(csv.rows.size());
  s.values.resize(rows, n);
  s.timestamps.reserve(static_cast<std::size_t>(rows));
  for (Index r = 0; r < rows; ++r) {
    const auto& row = csv.rows[static_cast<std::size_t>(r)];
    s.timestamps.push_back(parse_timestamp(row[0]));
    for (Index c = 0; c < n; ++c) {
      s.values(r, c) = parse_double(row[static_cast<std::size_t>(c) + 1],
                                    path + " row " + std::to_string(r + 2));
    }
  }

  const std::int64_t step = s.timestamps[1] - s.timestamps[0];
  if (step <= 0 || step % 60 != 0) {
    throw ConfigError(path + ": timestamps must increase in whole-minute steps");
  }
  for (std::size_t t = 1; t < s.timestamps.size(); ++t) {
    if (s.timestamps[t] - s.timestamps[t - 1] != step) {
      throw ConfigError(path + ": uneven sampling at row " + std::to_string(t + 2));
    }
  }
  s.interval_minutes = static_cast<int>(step / 60);
  if (1440 % s.interval_minutes != 0) {
    throw ConfigError(path + ": sampling interval must divide one day");
  }
  return s;
}

namespace {

RawSeries take_rows(const RawSeries& series, Index begin, Index count) {
  RawSeries out;
  out.sensor_ids = series.sensor_ids;
  out.interval_minutes = series.interval_minutes;
  out.values = series.values.middleRows(begin, count);
  out.timestamps.assign(series.timestamps.begin() + begin,
                        series.timestamps.begin() + begin + count);
  return out;
}

}  // namespace

SplitResult chronological_split(const RawSeries& series, const SplitFractions& fractions) {
  if (fractions.train <= 0 || fractions.val <= 0 || fractions.test <= 0) {
    throw ConfigError("split fractions must be positive");
  }
  if (std::abs(fractions.train + fractions.val + fractions.test - 1.0) > 1e-9) {
    throw ConfigError("split fractions must sum to 1");
  }
  const Index len = series.length();
  const Index n_train = static_cast<Index>(std::floor(static_cast<Scalar>(len) * fractions.train));
  const Index n_val = static_cast<Index>(std::floor(static_cast<Scalar>(len) * fractions.val));
  const Index n_test = len - n_train - n_val;
  if (n_train <= 0 || n_val <= 0 || n_test <= 0) {
    throw ConfigError("series is too short for the requested split");
  }
  SplitResult out;
  out.train = take_rows(series, 0, n_train);
  out.val = take_rows(series, n_train, n_val);
  out.test = take_rows(series, n_train + n_val, n_test);
  return out;
}

RawSeries impute_missing(const RawSeries& series) {
  const Index len = series.length();
  const Index n = series.values.cols();
  const int slots = series.slots_per_day();

  // Per (sensor, slot) mean of the present readings, then a per-sensor
  // fallback over all present readings.
  Mat slot_sum = Mat::Zero(slots, n);
  Mat slot_count = Mat::Zero(slots, n);
  Vec total_sum = Vec::Zero(n);
  Vec total_count = Vec::Zero(n);
  for (Index t = 0; t < len; ++t) {
    const int slot = series.slot_of(t);
    for (Index i = 0; i < n; ++i) {
      const Scalar v = series.values(t, i);
      if (v == 0) continue;
      slot_sum(slot, i) += v;
      slot_count(slot, i) += 1;
      total_sum[i] += v;
      total_count[i] += 1;
    }
  }

  RawSeries out = series;
  for (Index t = 0; t < len; ++t) {
    const int slot = series.slot_of(t);
    for (Index i = 0; i < n; ++i) {
      if (out.values(t, i) != 0) continue;
      if (slot_count(slot, i) > 0) {
        out.values(t, i) = slot_sum(slot, i) / slot_count(slot, i);
      } else if (total_count[i] > 0) {
        out.values(t, i) = total_sum[i] / total_count[i];
      }
      // A sensor with no present reading anywhere stays 0.
    }
  }
  return out;
}

Normalizer fit_normalizer(const RawSeries& series) {
  const Index count = series.values.size();
  if (count == 0) throw ConfigError("cannot fit a normalizer on an empty series");
  const Scalar mean = series.values.mean();
  const Scalar var = (series.values.array() - mean).square().sum() / static_cast<Scalar>(count);
  const Scalar std = std::sqrt(var);
  if (std == 0) throw ConfigError("series has zero variance; normalization is undefined");
  return Normalizer{mean, std};
}

long window_count(const RawSeries& series, int context, int horizon) {
  if (context <= 0 || horizon <= 0) throw ConfigError("context and horizon must be positive");
  const long count = static_cast<long>(series.length()) - context - horizon + 1;
  return count > 0 ? count : 0;
}

WindowedSample make_window(const RawSeries& series, const Normalizer& norm, int context,
                           int horizon, long anchor) {
  const long count = window_count(series, context, horizon);
  if (anchor < 0 || anchor >= count) {
    throw ConfigError("window anchor " + std::to_string(anchor) + " out of range (have " +
                      std::to_string(count) + " windows)");
  }
  const Index n = series.values.cols();
  const int channels = 1 + series.slots_per_day();

  WindowedSample w;
  w.anchor = anchor;
  w.x = Mat::Zero(static_cast<Index>(context) * n, channels);
  for (int t = 0; t < context; ++t) {
    const Index row_t = anchor + t;
    const int slot = series.slot_of(row_t);
    for (Index i = 0; i < n; ++i) {
      const Index row = static_cast<Index>(t) * n + i;
      w.x(row, 0) = norm.normalize(series.values(row_t, i));
      w.x(row, 1 + slot) = 1;
    }
  }
  w.y.resize(horizon, n);
  w.mask.resize(horizon, n);
  for (int t = 0; t < horizon; ++t) {
    const Index row_t = anchor + context + t;
    for (Index i = 0; i < n; ++i) {
      const Scalar v = series.values(row_t, i);
      w.y(t, i) = v;
      w.mask(t, i) = v != 0 ? 1 : 0;
    }
  }
  return w;
}

std::vector<WindowedSample> make_windows(const RawSeries& series, const Normalizer& norm,
                                         int context, int horizon) {
  const long count = window_count(series, context, horizon);
  std::vector<WindowedSample> out;
  out.reserve(static_cast<std::size_t>(count));
  for (long a = 0; a < count; ++a) out.push_back(make_window(series, norm, context, horizon, a));
  return out;
}

void save_series(const std::string& stem, const RawSeries& series, const Json& extra_meta) {
  TensorContainer c;
  c.add("values", series.values);
  Mat ts(series.length(), 1);
  for (Index t = 0; t < ts.rows(); ++t) {
    // Epoch seconds fit in a double exactly (|t| < 2^53).
    ts(t, 0) = static_cast<Scalar>(series.timestamps[static_cast<std::size_t>(t)]);
  }
  c.add("timestamps", ts);
  Json meta = extra_meta.is_null() ? Json::object() : extra_meta;
  meta["sensor_ids"] = series.sensor_ids;
  meta["interval_minutes"] = series.interval_minutes;
  c.meta = meta;
  c.save(stem);
}

RawSeries load_series(const std::string& stem, Json* meta_out) {
  const TensorContainer c = TensorContainer::load(stem);
  RawSeries s;
  s.values = c.get("values");
  const Mat& ts = c.get("timestamps");
  if (ts.rows() != s.values.rows() || ts.cols() != 1) {
    throw ConfigError(stem + ": timestamps do not match the value rows");
  }
  s.timestamps.reserve(static_cast<std::size_t>(ts.rows()));
  for (Index t = 0; t < ts.rows(); ++t) {
    s.timestamps.push_back(static_cast<std::int64_t>(ts(t, 0)));
  }
  s.sensor_ids = c.meta.at("sensor_ids").get<std::vector<std::string>>();
  s.interval_minutes = c.meta.at("interval_minutes").get<int>();
  if (meta_out) *meta_out = c.meta;
  return s;
}

}  // namespace stg
