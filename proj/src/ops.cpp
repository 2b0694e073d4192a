#include "stg/ops.hpp"

#include <cmath>
#include <numbers>

namespace stg {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

bool needs_grad(const Tensor& a) { return a.requires_grad(); }

}  // namespace

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b) {
  require(a.cols() == b.rows(), "matmul: inner dimensions disagree");
  Tensor out(Mat(a.value() * b.value()), needs_grad(a) || needs_grad(b));
  if (out.requires_grad()) {
    tape.record([a, b, out] {
      if (!out.has_grad()) return;
      const Mat& g = out.grad();
      if (a.requires_grad()) a.accumulate_grad(g * b.value().transpose());
      if (b.requires_grad()) b.accumulate_grad(a.value().transpose() * g);
    });
  }
  return out;
}

Tensor transpose(Tape& tape, const Tensor& a) {
  Tensor out(Mat(a.value().transpose()), needs_grad(a));
  if (out.requires_grad()) {
    tape.record([a, out] {
      if (out.has_grad()) a.accumulate_grad(out.grad().transpose());
    });
  }
  return out;
}

Tensor add(Tape& tape, const Tensor& a, const Tensor& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "add: shape mismatch");
  Tensor out(Mat(a.value() + b.value()), needs_grad(a) || needs_grad(b));
  if (out.requires_grad()) {
    tape.record([a, b, out] {
      if (!out.has_grad()) return;
      if (a.requires_grad()) a.accumulate_grad(out.grad());
      if (b.requires_grad()) b.accumulate_grad(out.grad());
    });
  }
  return out;
}

Tensor mul_elem(Tape& tape, const Tensor& a, const Tensor& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "mul_elem: shape mismatch");
  Tensor out(Mat(a.value().cwiseProduct(b.value())), needs_grad(a) || needs_grad(b));
  if (out.requires_grad()) {
    tape.record([a, b, out] {
      if (!out.has_grad()) return;
      const Mat& g = out.grad();
      if (a.requires_grad()) a.accumulate_grad(g.cwiseProduct(b.value()));
      if (b.requires_grad()) b.accumulate_grad(g.cwiseProduct(a.value()));
    });
  }
  return out;
}

Tensor scale(Tape& tape, const Tensor& a, Scalar c) {
  Tensor out(Mat(a.value() * c), needs_grad(a));
  if (out.requires_grad()) {
    tape.record([a, c, out] {
      if (out.has_grad()) a.accumulate_grad(out.grad() * c);
    });
  }
  return out;
}

Tensor affine_const(Tape& tape, const Tensor& a, Scalar s, Scalar t) {
  Tensor out(Mat((a.value().array() * s + t).matrix()), needs_grad(a));
  if (out.requires_grad()) {
    tape.record([a, s, out] {
      if (out.has_grad()) a.accumulate_grad(out.grad() * s);
    });
  }
  return out;
}

Tensor add_row_broadcast(Tape& tape, const Tensor& a, const Tensor& bias) {
  require(bias.rows() == 1 && bias.cols() == a.cols(), "add_row_broadcast: bias must be 1 x cols");
  Mat v = a.value();
  v.rowwise() += bias.value().row(0);
  Tensor out(std::move(v), needs_grad(a) || needs_grad(bias));
  if (out.requires_grad()) {
    tape.record([a, bias, out] {
      if (!out.has_grad()) return;
      const Mat& g = out.grad();
      if (a.requires_grad()) a.accumulate_grad(g);
      if (bias.requires_grad()) bias.accumulate_grad(g.colwise().sum());
    });
  }
  return out;
}

Tensor softmax_rows(Tape& tape, const Tensor& a) {
  Mat p = a.value();
  for (Index r = 0; r < p.rows(); ++r) {
    auto row = p.row(r).array();
    row -= row.maxCoeff();
    row = row.exp();
    row /= row.sum();
  }
  Tensor out(std::move(p), needs_grad(a));
  if (out.requires_grad()) {
    tape.record([a, out] {
      if (!out.has_grad()) return;
      const Mat& g = out.grad();
      const Mat& p = out.value();
      Mat da(p.rows(), p.cols());
      for (Index r = 0; r < p.rows(); ++r) {
        const Scalar dot = g.row(r).dot(p.row(r));
        da.row(r) = p.row(r).array() * (g.row(r).array() - dot);
      }
      a.accumulate_grad(da);
    });
  }
  return out;
}

Tensor layer_norm(Tape& tape, const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  Scalar eps) {
  const Index d = x.cols();
  require(gamma.rows() == 1 && gamma.cols() == d, "layer_norm: gamma must be 1 x d");
  require(beta.rows() == 1 && beta.cols() == d, "layer_norm: beta must be 1 x d");
  require(d >= 1, "layer_norm: empty rows");

  Mat xhat(x.rows(), d);
  Vec inv_std(x.rows());
  for (Index r = 0; r < x.rows(); ++r) {
    const Scalar mu = x.value().row(r).mean();
    const auto centered = x.value().row(r).array() - mu;
    const Scalar var = centered.square().sum() / static_cast<Scalar>(d);
    const Scalar inv = Scalar(1) / std::sqrt(var + eps);
    inv_std[r] = inv;
    xhat.row(r) = (centered * inv).matrix();
  }
  Mat y = xhat;
  y.array().rowwise() *= gamma.value().row(0).array();
  y.rowwise() += beta.value().row(0);

  Tensor out(std::move(y), needs_grad(x) || needs_grad(gamma) || needs_grad(beta));
  if (out.requires_grad()) {
    tape.record([x, gamma, beta, out, xhat = std::move(xhat), inv_std = std::move(inv_std), d] {
      if (!out.has_grad()) return;
      const Mat& g = out.grad();
      if (beta.requires_grad()) beta.accumulate_grad(g.colwise().sum());
      if (gamma.requires_grad()) gamma.accumulate_grad(g.cwiseProduct(xhat).colwise().sum());
      if (x.requires_grad()) {
        Mat dx(g.rows(), d);
        const auto gm = gamma.value().row(0).array();
        for (Index r = 0; r < g.rows(); ++r) {
          const auto gy = g.row(r).array() * gm;  // dL/dxhat
          const Scalar m1 = gy.mean();
          const Scalar m2 = (gy * xhat.row(r).array()).mean();
          dx.row(r) = ((gy - m1 - xhat.row(r).array() * m2) * inv_std[r]).matrix();
        }
        x.accumulate_grad(dx);
      }
    });
  }
  return out;
}

namespace {

Scalar normal_cdf(Scalar x) {
  return 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2_v<Scalar>));
}

}  // namespace

Tensor gelu(Tape& tape, const Tensor& x) {
  Mat y(x.rows(), x.cols());
  for (Index i = 0; i < y.size(); ++i) {
    const Scalar v = x.value().data()[i];
    y.data()[i] = v * normal_cdf(v);
  }
  Tensor out(std::move(y), needs_grad(x));
  if (out.requires_grad()) {
    tape.record([x, out] {
      if (!out.has_grad()) return;
      const Scalar inv_sqrt2pi = Scalar(1) / std::sqrt(2.0 * std::numbers::pi_v<Scalar>);
      Mat dx(x.rows(), x.cols());
      for (Index i = 0; i < dx.size(); ++i) {
        const Scalar v = x.value().data()[i];
        // d/dx [x*Phi(x)] = Phi(x) + x*phi(x)
        dx.data()[i] = out.grad().data()[i] *
                       (normal_cdf(v) + v * std::exp(-0.5 * v * v) * inv_sqrt2pi);
      }
      x.accumulate_grad(dx);
    });
  }
  return out;
}

Tensor dropout(Tape& tape, const Tensor& x, Scalar p, bool training, Rng& rng) {
  require(p >= 0 && p < 1, "dropout: p must be in [0, 1)");
  if (!training || p == 0) return x;
  const Scalar keep_scale = Scalar(1) / (Scalar(1) - p);
  Mat mask(x.rows(), x.cols());
  for (Index i = 0; i < mask.size(); ++i) {
    mask.data()[i] = rng.uniform() < p ? Scalar(0) : keep_scale;
  }
  Tensor out(Mat(x.value().cwiseProduct(mask)), needs_grad(x));
  if (out.requires_grad()) {
    tape.record([x, out, mask = std::move(mask)] {
      if (out.has_grad()) x.accumulate_grad(out.grad().cwiseProduct(mask));
    });
  }
  return out;
}

Tensor slice_cols(Tape& tape, const Tensor& a, Index c0, Index n) {
  require(c0 >= 0 && n >= 1 && c0 + n <= a.cols(), "slice_cols: range out of bounds");
  Tensor out(Mat(a.value().middleCols(c0, n)), needs_grad(a));
  if (out.requires_grad()) {
    tape.record([a, out, c0, n] {
      if (out.has_grad()) a.grad().middleCols(c0, n) += out.grad();
    });
  }
  return out;
}

Tensor concat_cols(Tape& tape, const std::vector<Tensor>& parts) {
  require(!parts.empty(), "concat_cols: no parts");
  const Index rows = parts.front().rows();
  Index cols = 0;
  bool rg = false;
  for (const Tensor& p : parts) {
    require(p.rows() == rows, "concat_cols: row mismatch");
    cols += p.cols();
    rg = rg || p.requires_grad();
  }
  Mat v(rows, cols);
  Index at = 0;
  for (const Tensor& p : parts) {
    v.middleCols(at, p.cols()) = p.value();
    at += p.cols();
  }
  Tensor out(std::move(v), rg);
  if (out.requires_grad()) {
    tape.record([parts, out] {
      if (!out.has_grad()) return;
      Index at = 0;
      for (const Tensor& p : parts) {
        if (p.requires_grad()) p.accumulate_grad(out.grad().middleCols(at, p.cols()));
        at += p.cols();
      }
    });
  }
  return out;
}

Tensor gather_rows(Tape& tape, const Tensor& table, const std::vector<Index>& rows) {
  Mat v = Mat::Zero(static_cast<Index>(rows.size()), table.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Index r = rows[i];
    require(r < table.rows(), "gather_rows: index beyond table");
    if (r >= 0) v.row(static_cast<Index>(i)) = table.value().row(r);
  }
  Tensor out(std::move(v), needs_grad(table));
  if (out.requires_grad()) {
    tape.record([table, out, rows] {
      if (!out.has_grad()) return;
      const Mat& g = out.grad();
      Mat& tg = table.grad();
      for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i] >= 0) tg.row(rows[i]) += g.row(static_cast<Index>(i));
      }
    });
  }
  return out;
}

Tensor gather_bias(Tape& tape, const Tensor& table, const BucketMat& buckets, Index col) {
  require(col >= 0 && col < table.cols(), "gather_bias: column out of range");
  Mat v(buckets.rows(), buckets.cols());
  for (Index p = 0; p < buckets.rows(); ++p) {
    for (Index q = 0; q < buckets.cols(); ++q) {
      const Index b = buckets(p, q);
      require(b >= 0 && b < table.rows(), "gather_bias: bucket beyond table");
      v(p, q) = table.value()(b, col);
    }
  }
  Tensor out(std::move(v), needs_grad(table));
  if (out.requires_grad()) {
    tape.record([table, out, &buckets, col] {
      if (!out.has_grad()) return;
      const Mat& g = out.grad();
      Mat& tg = table.grad();
      for (Index p = 0; p < buckets.rows(); ++p) {
        for (Index q = 0; q < buckets.cols(); ++q) tg(buckets(p, q), col) += g(p, q);
      }
    });
  }
  return out;
}

Tensor sum_all(Tape& tape, const Tensor& a) {
  Mat v(1, 1);
  v(0, 0) = a.value().sum();
  Tensor out(std::move(v), needs_grad(a));
  if (out.requires_grad()) {
    tape.record([a, out] {
      if (out.has_grad()) a.accumulate_grad(Mat::Constant(a.rows(), a.cols(), out.grad()(0, 0)));
    });
  }
  return out;
}

Tensor masked_huber_sum(Tape& tape, const Tensor& pred, const Mat& target, const Mat& mask,
                        Scalar delta) {
  require(pred.rows() == target.rows() && pred.cols() == target.cols(),
          "masked_huber_sum: target shape mismatch");
  require(mask.rows() == target.rows() && mask.cols() == target.cols(),
          "masked_huber_sum: mask shape mismatch");
  require(delta > 0, "masked_huber_sum: delta must be positive");

  Scalar total = 0;
  for (Index r = 0; r < target.rows(); ++r) {
    for (Index c = 0; c < target.cols(); ++c) {
      if (mask(r, c) == 0) continue;
      const Scalar e = std::abs(pred.value()(r, c) - target(r, c));
      total += e <= delta ? 0.5 * e * e : delta * (e - 0.5 * delta);
    }
  }
  Mat v(1, 1);
  v(0, 0) = total;
  Tensor out(std::move(v), needs_grad(pred));
  if (out.requires_grad()) {
    // Copy target/mask: the sample may not outlive the tape.
    tape.record([pred, out, target, mask, delta] {
      if (!out.has_grad()) return;
      const Scalar g = out.grad()(0, 0);
      Mat dp(target.rows(), target.cols());
      for (Index r = 0; r < target.rows(); ++r) {
        for (Index c = 0; c < target.cols(); ++c) {
          if (mask(r, c) == 0) {
            dp(r, c) = 0;
            continue;
          }
          const Scalar e = pred.value()(r, c) - target(r, c);
          // Huber derivative: e inside the quadratic zone, +-delta outside.
          dp(r, c) = g * std::clamp(e, -delta, delta);
        }
      }
      pred.accumulate_grad(dp);
    });
  }
  return out;
}

}  // namespace stg
