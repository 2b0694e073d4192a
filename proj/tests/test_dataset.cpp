#include <doctest.h>

#include <filesystem>

#include "stg/csv.hpp"
#include "stg/dataset.hpp"

using namespace stg;

namespace {

// L rows, n sensors, 5-minute cadence starting at midnight.
RawSeries ramp_series(Index rows, int n, int interval_minutes = 5) {
  RawSeries s;
  for (int i = 0; i < n; ++i) s.sensor_ids.push_back("s" + std::to_string(i));
  s.interval_minutes = interval_minutes;
  s.values.resize(rows, n);
  for (Index t = 0; t < rows; ++t) {
    s.timestamps.push_back(1704067200 + t * interval_minutes * 60);
    for (int i = 0; i < n; ++i) s.values(t, i) = static_cast<Scalar>(10 * (i + 1) + t);
  }
  return s;
}

std::string temp_dir() {
  static int counter = 0;
  auto dir = std::filesystem::temp_directory_path() /
             ("stg_dataset_test_" + std::to_string(counter++));
  std::filesystem::create_directories(dir);
  return dir.string();
}

}  // namespace

TEST_CASE("chronological split uses floor boundaries and keeps order") {
  const RawSeries s = ramp_series(10, 1);
  const SplitResult r = chronological_split(s, {0.7, 0.1, 0.2});
  CHECK(r.train.length() == 7);
  CHECK(r.val.length() == 1);
  CHECK(r.test.length() == 2);
  CHECK(r.train.values(0, 0) == 10.0);
  CHECK(r.train.values(6, 0) == 16.0);
  CHECK(r.val.values(0, 0) == 17.0);
  CHECK(r.test.values(0, 0) == 18.0);
  CHECK(r.test.values(1, 0) == 19.0);
  CHECK(r.val.timestamps[0] == s.timestamps[7]);

  CHECK_THROWS_AS(chronological_split(s, {0.5, 0.1, 0.2}), ConfigError);
  CHECK_THROWS_AS(chronological_split(ramp_series(3, 1), {0.7, 0.1, 0.2}), ConfigError);
}

TEST_CASE("imputation fills missing readings from historical slot averages") {
  // Two slots per day (12h cadence).  Sensor 0: slot-0 readings 10 and 30
  // present, one missing; slot-1 has a single present reading of 20.
  RawSeries s;
  s.sensor_ids = {"s0", "s1"};
  s.interval_minutes = 720;
  s.values.resize(6, 2);
  for (Index t = 0; t < 6; ++t) s.timestamps.push_back(t * 720 * 60);
  s.values.col(0) << 10, 0, 30, 20, 0, 0;
  // Sensor 1 is never present; its zeros must survive.
  s.values.col(1).setZero();

  const RawSeries imp = impute_missing(s);
  CHECK(imp.values(0, 0) == 10.0);
  CHECK(imp.values(1, 0) == 20.0);  // slot-1 mean = 20
  CHECK(imp.values(2, 0) == 30.0);
  CHECK(imp.values(3, 0) == 20.0);
  CHECK(imp.values(4, 0) == 20.0);  // slot-0 mean = (10+30)/2
  CHECK(imp.values(5, 0) == 20.0);
  CHECK((imp.values.col(1).array() == 0).all());
}

TEST_CASE("imputation falls back to the sensor mean when a slot is empty") {
  RawSeries s;
  s.sensor_ids = {"s0"};
  s.interval_minutes = 720;
  s.values.resize(4, 1);
  for (Index t = 0; t < 4; ++t) s.timestamps.push_back(t * 720 * 60);
  // Slot 1 (rows 1 and 3) never has a present reading.
  s.values.col(0) << 12, 0, 18, 0;
  const RawSeries imp = impute_missing(s);
  CHECK(imp.values(1, 0) == 15.0);
  CHECK(imp.values(3, 0) == 15.0);
}

TEST_CASE("normalizer uses the population standard deviation") {
  // Frozen by tests/oracle/normalizer_window.py.
  RawSeries s;
  s.sensor_ids = {"s0"};
  s.interval_minutes = 5;
  s.values.resize(4, 1);
  s.values << 1, 2, 3, 4;
  for (Index t = 0; t < 4; ++t) s.timestamps.push_back(t * 300);
  const Normalizer norm = fit_normalizer(s);
  CHECK(norm.mean == doctest::Approx(2.5).epsilon(1e-15));
  CHECK(norm.std == doctest::Approx(1.1180339887498949).epsilon(1e-15));
  CHECK(norm.normalize(norm.denormalize(0.37)) == doctest::Approx(0.37).epsilon(1e-12));
  CHECK(Normalizer{20, 8}.normalize(30.0) == doctest::Approx(1.25).epsilon(1e-15));
}

TEST_CASE("windows carry normalized context and raw masked targets") {
  RawSeries s = ramp_series(8, 2, 5);
  s.values(6, 1) = 0;  // a missing truth inside the horizon
  const Normalizer norm{20, 8};
  const int context = 3, horizon = 2;
  CHECK(window_count(s, context, horizon) == 4);

  const WindowedSample w = make_window(s, norm, context, horizon, 3);
  const int slots = s.slots_per_day();
  REQUIRE(w.x.rows() == context * 2);
  REQUIRE(w.x.cols() == 1 + slots);
  REQUIRE(w.y.rows() == horizon);
  REQUIRE(w.y.cols() == 2);

  // Row (t, i) holds the normalized reading of node i at context step t.
  for (int t = 0; t < context; ++t) {
    for (int i = 0; i < 2; ++i) {
      const Index row = t * 2 + i;
      CHECK(w.x(row, 0) == doctest::Approx(norm.normalize(s.values(3 + t, i))).epsilon(1e-15));
      const int slot = s.slot_of(3 + t);
      CHECK(w.x(row, 1 + slot) == 1.0);
      CHECK(w.x.row(row).tail(slots).sum() == 1.0);  // exactly one hot
    }
  }
  // Targets stay in original units; the mask tracks present truths.
  CHECK(w.y(0, 0) == s.values(6, 0));
  CHECK(w.y(1, 1) == s.values(7, 1));
  CHECK(w.mask(0, 1) == 0.0);
  CHECK(w.mask(0, 0) == 1.0);
  CHECK(w.mask(1, 1) == 1.0);

  CHECK_THROWS_AS(make_window(s, norm, context, horizon, 4), ConfigError);
  CHECK(make_windows(s, norm, context, horizon).size() == 4);
}

TEST_CASE("window count clamps to zero on short series") {
  const RawSeries s = ramp_series(5, 1);
  CHECK(window_count(s, 12, 12) == 0);
}

TEST_CASE("series csv loads ids, cadence, and values") {
  const std::string path = temp_dir() + "/series.csv";
  write_csv(path, {"timestamp", "a", "b"},
            {{"2024-01-01 00:00:00", "55.5", "60"},
             {"2024-01-01 00:05:00", "54", "0"},
             {"2024-01-01 00:10:00", "53.25", "61"}});
  const RawSeries s = load_series_csv(path);
  CHECK(s.sensor_ids == std::vector<std::string>{"a", "b"});
  CHECK(s.interval_minutes == 5);
  CHECK(s.slots_per_day() == 288);
  CHECK(s.values(0, 0) == 55.5);
  CHECK(s.values(1, 1) == 0.0);
  CHECK(s.slot_of(2) == 2);

  const std::string bad = temp_dir() + "/bad.csv";
  write_csv(bad, {"timestamp", "a"},
            {{"2024-01-01 00:00:00", "1"}, {"2024-01-01 00:07:00", "2"}, {"2024-01-01 00:14:00", "3"}});
  CHECK_THROWS_AS(load_series_csv(bad), ConfigError);  // 7 does not divide 1440
}

TEST_CASE("series archive round trips values, timestamps, and metadata") {
  const std::string stem = temp_dir() + "/train";
  const RawSeries s = ramp_series(12, 3);
  Json extra;
  extra["split"] = "train";
  extra["mean"] = 1.5;
  save_series(stem, s, extra);

  Json meta;
  const RawSeries back = load_series(stem, &meta);
  CHECK(back.sensor_ids == s.sensor_ids);
  CHECK(back.interval_minutes == s.interval_minutes);
  CHECK(back.timestamps == s.timestamps);
  CHECK((back.values.array() == s.values.array()).all());
  CHECK(meta.at("split") == "train");
  CHECK(meta.at("mean") == 1.5);
}
