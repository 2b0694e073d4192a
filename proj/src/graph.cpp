#include "stg/graph.hpp"

#include <cmath>
#include <cstdio>
#include <deque>
#include <unordered_map>

#include "stg/csv.hpp"

namespace stg {

std::vector<DistanceRecord> load_distance_csv(const std::string& path) {
  const Csv csv = read_csv(path);
  const int from = csv.column("from");
  const int to = csv.column("to");
  const int dist = csv.column("dist");
  if (from < 0 || to < 0 || dist < 0)
    throw ConfigError(path + ": distance list needs 'from', 'to' and 'dist' columns");
  std::vector<DistanceRecord> records;
  records.reserve(csv.rows.size());
  for (const auto& row : csv.rows) {
    DistanceRecord r;
    r.from = row[static_cast<std::size_t>(from)];
    r.to = row[static_cast<std::size_t>(to)];
    r.dist = parse_double(row[static_cast<std::size_t>(dist)], "distance");
    if (!std::isfinite(r.dist) || r.dist < 0)
      throw ConfigError(path + ": distance between " + r.from + " and " + r.to +
                        " must be finite and non-negative");
    records.push_back(std::move(r));
  }
  return records;
}

WeightedGraph build_graph(std::vector<std::string> sensor_ids,
                          const std::vector<DistanceRecord>& records, Scalar kappa) {
  if (sensor_ids.empty()) throw ConfigError("graph has no sensors");
  if (records.empty()) throw ConfigError("distance list is empty");
  if (kappa < 0) throw ConfigError("kappa must be non-negative");

  std::unordered_map<std::string, int> index;
  for (std::size_t i = 0; i < sensor_ids.size(); ++i) {
    if (!index.emplace(sensor_ids[i], static_cast<int>(i)).second) {
      throw ConfigError("duplicate sensor id: " + sensor_ids[i]);
    }
  }

  // sigma is the population std of the listed distances, self rows included.
  Scalar sum = 0, sum_sq = 0;
  for (const auto& r : records) {
    if (r.dist < 0) throw ConfigError("negative distance between " + r.from + " and " + r.to);
    sum += r.dist;
    sum_sq += r.dist * r.dist;
  }
  const Scalar n = static_cast<Scalar>(records.size());
  const Scalar mean = sum / n;
  const Scalar var = std::max(Scalar(0), sum_sq / n - mean * mean);
  const Scalar sigma = std::sqrt(var);
  if (sigma == 0) throw ConfigError("distance list has zero variance; kernel width is undefined");

  WeightedGraph g;
  g.sensor_ids = std::move(sensor_ids);
  g.kappa = kappa;
  g.sigma = sigma;
  g.weights = Mat::Zero(g.nodes(), g.nodes());
  for (const auto& r : records) {
    const auto from_it = index.find(r.from);
    const auto to_it = index.find(r.to);
    if (from_it == index.end()) throw ConfigError("distance row names unknown sensor: " + r.from);
    if (to_it == index.end()) throw ConfigError("distance row names unknown sensor: " + r.to);
    if (r.dist <= kappa) {
      g.weights(from_it->second, to_it->second) = std::exp(-(r.dist * r.dist) / (sigma * sigma));
    }
  }

  bool any_edge = false;
  for (Index i = 0; i < g.weights.rows() && !any_edge; ++i) {
    for (Index j = 0; j < g.weights.cols(); ++j) {
      if (i != j && g.weights(i, j) > 0) {
        any_edge = true;
        break;
      }
    }
  }
  if (!any_edge) {
    std::fprintf(stderr,
                 "warning: threshold kappa=%g leaves the graph with no edges; "
                 "every node is isolated\n",
                 static_cast<double>(kappa));
  }
  return g;
}

DegreeVector degrees(const Mat& weights) {
  const Index n = weights.rows();
  if (weights.cols() != n) throw ConfigError("adjacency matrix must be square");
  DegreeVector d;
  d.in = IntVec::Zero(n);
  d.out = IntVec::Zero(n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      if (i == j || weights(i, j) <= 0) continue;
      ++d.out[i];
      ++d.in[j];
    }
  }
  return d;
}

IntMat shortest_path_hops(const Mat& weights) {
  const Index n = weights.rows();
  if (weights.cols() != n) throw ConfigError("adjacency matrix must be square");

  // Unweighted graph, so breadth-first search per source beats Dijkstra or
  // Floyd-Warshall.
  std::vector<std::vector<int>> adj(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      if (i != j && weights(i, j) > 0) adj[static_cast<std::size_t>(i)].push_back(static_cast<int>(j));
    }
  }

  IntMat hops = IntMat::Constant(n, n, kUnreachableHops);
  std::deque<int> queue;
  for (Index s = 0; s < n; ++s) {
    hops(s, s) = 0;
    queue.clear();
    queue.push_back(static_cast<int>(s));
    while (!queue.empty()) {
      const int u = queue.front();
      queue.pop_front();
      for (const int v : adj[static_cast<std::size_t>(u)]) {
        if (hops(s, v) != kUnreachableHops) continue;
        hops(s, v) = hops(s, u) + 1;
        queue.push_back(v);
      }
    }
  }
  return hops;
}

int max_finite_hops(const IntMat& hops) {
  int best = 0;
  for (Index i = 0; i < hops.rows(); ++i) {
    for (Index j = 0; j < hops.cols(); ++j) {
      if (hops(i, j) != kUnreachableHops && hops(i, j) > best) best = hops(i, j);
    }
  }
  return best;
}

EncodingMaxima encoding_maxima(const Mat& weights) {
  const DegreeVector d = degrees(weights);
  EncodingMaxima m;
  m.max_in_degree = d.max_in();
  m.max_out_degree = d.max_out();
  m.max_hops = max_finite_hops(shortest_path_hops(weights));
  return m;
}

SpatialBiasIndex build_bias_index(const IntMat& hops, const TokenLayout& layout, int max_hops) {
  if (hops.rows() != layout.nodes || hops.cols() != layout.nodes) {
    throw ConfigError("hop matrix does not match the layout's node count");
  }
  if (max_hops < 0) throw ConfigError("max_hops must be non-negative");

  SpatialBiasIndex idx;
  idx.max_hops = max_hops;
  if (idx.num_buckets() > std::numeric_limits<std::int16_t>::max()) {
    throw ConfigError("bias bucket count exceeds the index representation");
  }

  const long l = layout.tokens();
  idx.bucket.resize(l, l);
  // Precompute the node-pair bucket once; every (t, t') pair reuses it.
  Eigen::Matrix<std::int16_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> node_bucket(
      layout.nodes, layout.nodes);
  for (int i = 0; i < layout.nodes; ++i) {
    for (int j = 0; j < layout.nodes; ++j) {
      const std::int32_t h = hops(i, j);
      node_bucket(i, j) = h == kUnreachableHops
                              ? static_cast<std::int16_t>(idx.unreachable_bucket())
                              : static_cast<std::int16_t>(std::min(h, max_hops));
    }
  }
  for (long p = 0; p < l; ++p) {
    const int ni = layout.node_of(p);
    for (long q = 0; q < l; ++q) {
      const int nj = layout.node_of(q);
      idx.bucket(p, q) = (ni < 0 || nj < 0) ? static_cast<std::int16_t>(idx.special_bucket())
                                            : node_bucket(ni, nj);
    }
  }
  return idx;
}

}  // namespace stg
