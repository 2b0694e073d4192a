#include "stg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "stg/csv.hpp"

namespace stg {

void MetricsAccumulator::add(const Mat& pred, const Mat& truth) {
  if (pred.rows() != truth.rows() || pred.cols() != truth.cols()) {
    throw std::invalid_argument("metrics: prediction and truth shapes differ");
  }
  for (Index i = 0; i < truth.size(); ++i) {
    const Scalar t = truth.data()[i];
    if (t == 0) continue;
    const Scalar e = pred.data()[i] - t;
    abs_sum += std::abs(e);
    sq_sum += e * e;
    ape_sum += std::abs(e) / std::abs(t);
    count += 1;
  }
}

void MetricsAccumulator::add(const Mat& pred, const Mat& truth, const Mat& mask) {
  if (mask.rows() != truth.rows() || mask.cols() != truth.cols()) {
    throw std::invalid_argument("metrics: mask and truth shapes differ");
  }
  if (pred.rows() != truth.rows() || pred.cols() != truth.cols()) {
    throw std::invalid_argument("metrics: prediction and truth shapes differ");
  }
  for (Index i = 0; i < truth.size(); ++i) {
    if (mask.data()[i] == 0) continue;
    const Scalar t = truth.data()[i];
    if (t == 0) continue;  // masked metrics never divide by zero
    const Scalar e = pred.data()[i] - t;
    abs_sum += std::abs(e);
    sq_sum += e * e;
    ape_sum += std::abs(e) / std::abs(t);
    count += 1;
  }
}

Metrics MetricsAccumulator::finish() const {
  if (count == 0) throw NumericError("metrics: no observed entries to score");
  Metrics m;
  const Scalar n = static_cast<Scalar>(count);
  m.mae = abs_sum / n;
  m.rmse = std::sqrt(sq_sum / n);
  m.mape = 100.0 * ape_sum / n;
  // Jensen: sqrt(mean e^2) >= mean |e|; allow rounding slack.
  if (m.rmse + 1e-12 * std::max<Scalar>(1, m.mae) < m.mae) {
    throw NumericError("metrics: rmse fell below mae, accumulation is corrupt");
  }
  return m;
}

Metrics masked_metrics(const Mat& pred, const Mat& truth) {
  MetricsAccumulator acc;
  acc.add(pred, truth);
  return acc.finish();
}

Mat horizon_slice(const Mat& grid, int h) {
  if (h < 1 || h > grid.rows()) {
    throw std::invalid_argument("horizon_slice: h=" + std::to_string(h) + " outside 1.." +
                                std::to_string(grid.rows()));
  }
  return grid.topRows(h);
}

const Metrics& MetricsReport::at_horizon(int h) const {
  for (const auto& row : rows) {
    if (row.horizon == h) return row.metrics;
  }
  throw std::invalid_argument("metrics report has no horizon " + std::to_string(h));
}

std::vector<int> default_horizons(int horizon) {
  std::vector<int> out;
  for (const int h : {3, 6, 12}) {
    if (h < horizon) out.push_back(h);
  }
  out.push_back(horizon);
  return out;
}

Json metrics_report_to_json(const MetricsReport& report) {
  Json rows = Json::array();
  for (const auto& row : report.rows) {
    rows.push_back(Json{{"horizon", row.horizon},
                        {"mae", row.metrics.mae},
                        {"rmse", row.metrics.rmse},
                        {"mape", row.metrics.mape}});
  }
  return Json{{"horizons", rows}};
}

MetricsReport metrics_report_from_json(const Json& j) {
  MetricsReport report;
  for (const Json& row : j.at("horizons")) {
    HorizonMetrics hm;
    hm.horizon = row.at("horizon").get<int>();
    hm.metrics.mae = row.at("mae").get<Scalar>();
    hm.metrics.rmse = row.at("rmse").get<Scalar>();
    hm.metrics.mape = row.at("mape").get<Scalar>();
    report.rows.push_back(hm);
  }
  return report;
}

std::string metrics_report_to_csv(const MetricsReport& report) {
  std::string out = "horizon,mae,rmse,mape\n";
  for (const auto& row : report.rows) {
    out += std::to_string(row.horizon) + "," + format_full(row.metrics.mae) + "," +
           format_full(row.metrics.rmse) + "," + format_full(row.metrics.mape) + "\n";
  }
  return out;
}

namespace {

MetricsReport finish_horizons(const std::vector<int>& horizons,
                              std::vector<MetricsAccumulator>& accs) {
  MetricsReport report;
  for (std::size_t k = 0; k < horizons.size(); ++k) {
    report.rows.push_back(HorizonMetrics{horizons[k], accs[k].finish()});
  }
  return report;
}

}  // namespace

MetricsReport evaluate_series(const ParameterSet& params, const ModelConfig& config,
                              const GraphInputs& graph, const Normalizer& norm,
                              const RawSeries& split, const std::vector<int>& horizons) {
  if (horizons.empty()) throw std::invalid_argument("evaluate_series: no horizons requested");
  const long count = window_count(split, config.context, config.horizon);
  if (count == 0) throw ConfigError("split too short to evaluate: no complete windows");
  std::vector<MetricsAccumulator> accs(horizons.size());
  for (long a = 0; a < count; ++a) {
    const WindowedSample w = make_window(split, norm, config.context, config.horizon, a);
    const Mat pred = predict(w, params, config, graph, norm);
    for (std::size_t k = 0; k < horizons.size(); ++k) {
      const int h = horizons[k];
      accs[k].add(pred.topRows(h), w.y.topRows(h), w.mask.topRows(h));
    }
  }
  return finish_horizons(horizons, accs);
}

MetricsReport persistence_metrics(const RawSeries& split, int context, int horizon,
                                  const std::vector<int>& horizons) {
  if (horizons.empty()) throw std::invalid_argument("persistence_metrics: no horizons requested");
  const long count = window_count(split, context, horizon);
  if (count == 0) throw ConfigError("split too short to evaluate: no complete windows");
  std::vector<MetricsAccumulator> accs(horizons.size());
  for (long a = 0; a < count; ++a) {
    const Mat last = split.values.row(a + context - 1);
    for (std::size_t k = 0; k < horizons.size(); ++k) {
      const int h = horizons[k];
      for (int t = 0; t < h; ++t) {
        accs[k].add(last, split.values.row(a + context + t));
      }
    }
  }
  return finish_horizons(horizons, accs);
}

}  // namespace stg
