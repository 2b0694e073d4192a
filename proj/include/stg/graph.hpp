#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "stg/layout.hpp"
#include "stg/types.hpp"

namespace stg {

// One row of a distance list: a directed edge and its length.
struct DistanceRecord {
  std::string from;
  std::string to;
  Scalar dist = 0;
};

// Sensor graph with Gaussian-kernel edge weights:
//   w_ij = exp(-d_ij^2 / sigma^2) when d_ij <= kappa, else 0,
// where sigma is the population standard deviation of every listed distance.
struct WeightedGraph {
  std::vector<std::string> sensor_ids;
  Scalar kappa = 0;
  Scalar sigma = 0;
  Mat weights;  // N x N, 0 where no edge is listed or the threshold cuts it

  int nodes() const { return static_cast<int>(sensor_ids.size()); }
};

// Reads a 'from,to,dist' list; ids stay strings, distances must be finite
// and non-negative.
std::vector<DistanceRecord> load_distance_csv(const std::string& path);

WeightedGraph build_graph(std::vector<std::string> sensor_ids,
                          const std::vector<DistanceRecord>& records, Scalar kappa);

// In/out degree over the binarized off-diagonal adjacency; self-loops never
// count even when w_ii > 0.
struct DegreeVector {
  IntVec in;
  IntVec out;

  int max_in() const { return in.size() ? in.maxCoeff() : 0; }
  int max_out() const { return out.size() ? out.maxCoeff() : 0; }
};

DegreeVector degrees(const Mat& weights);

// Hop-count shortest paths over the binarized directed graph (BFS per
// source).  Diagonal is 0; kUnreachableHops marks pairs with no path.
constexpr std::int32_t kUnreachableHops = -1;

IntMat shortest_path_hops(const Mat& weights);

// Largest finite entry (0 for an edgeless graph).
int max_finite_hops(const IntMat& hops);

// Table sizes the learned encodings depend on; frozen at preparation time so
// checkpoints stay shape-compatible with their graph.
struct EncodingMaxima {
  int max_in_degree = 0;
  int max_out_degree = 0;
  int max_hops = 0;
};

EncodingMaxima encoding_maxima(const Mat& weights);

// Token-pair bucket for the learned attention bias.  The bucket of a pair of
// node tokens depends only on their hop distance — never on their time steps
// — so one small table serves the whole sequence.  Pairs touching a special
// token share one dedicated bucket; unreachable node pairs share another.
struct SpatialBiasIndex {
  int max_hops = 0;
  Eigen::Matrix<std::int16_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> bucket;  // l x l

  int unreachable_bucket() const { return max_hops + 1; }
  int special_bucket() const { return max_hops + 2; }
  int num_buckets() const { return max_hops + 3; }
};

SpatialBiasIndex build_bias_index(const IntMat& hops, const TokenLayout& layout, int max_hops);

}  // namespace stg
