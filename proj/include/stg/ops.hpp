#pragma once

#include <cstdint>
#include <vector>

#include "stg/rng.hpp"
#include "stg/tensor.hpp"
#include "stg/types.hpp"

namespace stg {

using BucketMat = Eigen::Matrix<std::int16_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Differentiable primitives.  Each op computes its value eagerly and records
// one backward closure on the tape.  Backward closures skip work when no
// gradient reached their output.

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b);
Tensor transpose(Tape& tape, const Tensor& a);
Tensor add(Tape& tape, const Tensor& a, const Tensor& b);
Tensor mul_elem(Tape& tape, const Tensor& a, const Tensor& b);
Tensor scale(Tape& tape, const Tensor& a, Scalar c);

// y = a*s + t elementwise with constant scalars (de-normalization).
Tensor affine_const(Tape& tape, const Tensor& a, Scalar s, Scalar t);

// Adds a 1 x n bias row to every row of a.
Tensor add_row_broadcast(Tape& tape, const Tensor& a, const Tensor& bias);

Tensor softmax_rows(Tape& tape, const Tensor& a);

// Per-row normalization over the last axis with learnable 1 x d gamma/beta.
Tensor layer_norm(Tape& tape, const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  Scalar eps = 1e-5);

// Exact-erf form: 0.5*x*(1 + erf(x/sqrt(2))).
Tensor gelu(Tape& tape, const Tensor& x);

// Inverted dropout: zero with probability p and scale survivors by 1/(1-p)
// during training; identity in inference.  Requires 0 <= p < 1.
Tensor dropout(Tape& tape, const Tensor& x, Scalar p, bool training, Rng& rng);

// Columns [c0, c0+n) of a.
Tensor slice_cols(Tape& tape, const Tensor& a, Index c0, Index n);
Tensor concat_cols(Tape& tape, const std::vector<Tensor>& parts);

// out.row(i) = table.row(rows[i]); a negative index yields a zero row and
// receives no gradient.
Tensor gather_rows(Tape& tape, const Tensor& table, const std::vector<Index>& rows);

// out(p, q) = table(buckets(p, q), col): expands the per-bucket bias column of
// one attention head to a full token-pair matrix.  The bucket matrix is
// captured by reference and must outlive the tape.
Tensor gather_bias(Tape& tape, const Tensor& table, const BucketMat& buckets, Index col);

Tensor sum_all(Tape& tape, const Tensor& a);  // 1x1

// Sum of Huber(pred - target, delta) over elements where mask is 1.  The
// caller divides by the mask count, which lets micro-batches of one effective
// batch share a single normalizer.
Tensor masked_huber_sum(Tape& tape, const Tensor& pred, const Mat& target, const Mat& mask,
                        Scalar delta);

}  // namespace stg
