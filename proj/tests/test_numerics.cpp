#include <doctest.h>

#include <cmath>

#include "stg/gradcheck.hpp"
#include "stg/ops.hpp"
#include "stg/rng.hpp"
#include "stg/tensor.hpp"

using namespace stg;

namespace {

Mat random_mat(Index r, Index c, Rng& rng, Scalar scale = 1.0) {
  Mat m(r, c);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal() * scale;
  return m;
}

// Generic per-primitive gradient check: objective = sum(weights .* op(inputs)),
// with fixed random weights so every output coordinate matters.
Scalar op_max_fd_error(const std::vector<Tensor>& inputs,
                       const std::function<Tensor(Tape&)>& apply, Rng& rng) {
  Tape probe;
  Mat w;
  {
    const Tensor out = apply(probe);
    w = random_mat(out.rows(), out.cols(), rng);
  }
  const auto objective = [&] {
    Tape t(false);
    return apply(t).value().cwiseProduct(w).sum();
  };
  const auto compute = [&] {
    for (const Tensor& in : inputs) in.clear_grad();
    Tape t;
    Tensor out = apply(t);
    Tensor loss = sum_all(t, mul_elem(t, out, Tensor(w)));
    t.backward(loss);
  };
  std::vector<std::pair<std::string, Tensor>> params;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    params.emplace_back("in" + std::to_string(i), inputs[i]);
  }
  return finite_difference_check(objective, compute, params).max_rel_err;
}

}  // namespace

TEST_CASE("matmul matches a triple-loop oracle") {
  Rng rng(1);
  const Mat a = random_mat(5, 4, rng);
  const Mat b = random_mat(4, 3, rng);
  Tape tape;
  const Tensor c = matmul(tape, Tensor(a), Tensor(b));
  for (Index i = 0; i < 5; ++i) {
    for (Index j = 0; j < 3; ++j) {
      Scalar want = 0;
      for (Index r = 0; r < 4; ++r) want += a(i, r) * b(r, j);
      CHECK(c.value()(i, j) == doctest::Approx(want).epsilon(1e-12));
    }
  }
  // A*I = A, and the 1x1 case.
  const Tensor ai = matmul(tape, Tensor(a), Tensor(Mat::Identity(4, 4)));
  CHECK((ai.value().array() == a.array()).all());
  Mat two(1, 1), three(1, 1);
  two << 2;
  three << 3;
  CHECK(matmul(tape, Tensor(two), Tensor(three)).value()(0, 0) == 6.0);
  CHECK_THROWS_AS(matmul(tape, Tensor(a), Tensor(a)), std::invalid_argument);
}

TEST_CASE("softmax rows: uniformity, forced values, shift invariance") {
  Tape tape;
  Mat x(1, 4);
  x.setConstant(2.5);
  const Tensor u = softmax_rows(tape, Tensor(x));
  for (Index j = 0; j < 4; ++j) CHECK(u.value()(0, j) == doctest::Approx(0.25).epsilon(1e-15));

  Mat y(1, 2);
  y << 0.0, std::log(3.0);
  const Tensor v = softmax_rows(tape, Tensor(y));
  CHECK(v.value()(0, 0) == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(v.value()(0, 1) == doctest::Approx(0.75).epsilon(1e-14));

  Rng rng(7);
  const Mat a = random_mat(6, 9, rng, 3.0);
  Mat b = a;
  b.array() += 17.25;
  const Mat pa = softmax_rows(tape, Tensor(a)).value();
  const Mat pb = softmax_rows(tape, Tensor(b)).value();
  for (Index i = 0; i < pa.size(); ++i) {
    CHECK(pa.data()[i] == doctest::Approx(pb.data()[i]).epsilon(1e-12));
  }
  for (Index r = 0; r < pa.rows(); ++r) {
    CHECK(std::abs(pa.row(r).sum() - 1.0) < 1e-12);
    CHECK((pa.row(r).array() > 0).all());
  }
}

TEST_CASE("layer norm normalizes row statistics") {
  Tape tape;
  const Index d = 32;
  const Tensor gamma(Mat::Ones(1, d));
  const Tensor beta(Mat::Zero(1, d));

  Mat c(1, d);
  c.setConstant(4.2);
  CHECK(layer_norm(tape, Tensor(c), gamma, beta).value().cwiseAbs().maxCoeff() < 1e-9);

  Mat pm(1, 2);
  pm << -1, 1;
  const Tensor g2(Mat::Ones(1, 2)), b2(Mat::Zero(1, 2));
  const Mat out2 = layer_norm(tape, Tensor(pm), g2, b2, 1e-12).value();
  CHECK(out2(0, 0) == doctest::Approx(-1.0).epsilon(1e-6));
  CHECK(out2(0, 1) == doctest::Approx(1.0).epsilon(1e-6));

  Rng rng(11);
  const Mat x = random_mat(10, d, rng, 5.0);
  const Mat y = layer_norm(tape, Tensor(x), gamma, beta).value();
  for (Index r = 0; r < y.rows(); ++r) {
    CHECK(std::abs(y.row(r).mean()) < 1e-9);
    const Scalar var = (y.row(r).array() - y.row(r).mean()).square().mean();
    CHECK(var == doctest::Approx(1.0).epsilon(1e-4));
  }
}

TEST_CASE("gelu endpoint values") {
  Tape tape;
  Mat x(1, 3);
  x << 0.0, 10.0, -10.0;
  const Mat y = gelu(tape, Tensor(x)).value();
  CHECK(y(0, 0) == 0.0);
  CHECK(y(0, 1) == doctest::Approx(10.0).epsilon(1e-9));
  CHECK(std::abs(y(0, 2)) < 1e-9);
}

TEST_CASE("dropout: identity cases and inverted scaling") {
  Rng rng(5);
  Tape tape;
  const Mat x = Mat::Ones(1000, 1000);
  const Tensor same_p0 = dropout(tape, Tensor(x), 0.0, true, rng);
  CHECK((same_p0.value().array() == 1.0).all());
  const Tensor same_eval = dropout(tape, Tensor(x), 0.5, false, rng);
  CHECK((same_eval.value().array() == 1.0).all());

  const Tensor dropped = dropout(tape, Tensor(x), 0.5, true, rng);
  CHECK(dropped.value().mean() == doctest::Approx(1.0).epsilon(0.01));
  // Survivors carry exactly 1/(1-p).
  for (Index i = 0; i < 100; ++i) {
    const Scalar v = dropped.value().data()[i];
    CHECK((v == 0.0 || v == 2.0));
  }
  CHECK_THROWS_AS(dropout(tape, Tensor(x), 1.0, true, rng), std::invalid_argument);
}

TEST_CASE("backward: quadratic, constant-softmax, accumulation semantics") {
  // loss = x^2 at x=3 -> grad 6
  {
    Tape tape;
    Mat x0(1, 1);
    x0 << 3.0;
    Tensor x(x0, true);
    Tensor loss = sum_all(tape, mul_elem(tape, x, x));
    tape.backward(loss);
    CHECK(x.grad()(0, 0) == doctest::Approx(6.0).epsilon(1e-14));

    // Accumulation until cleared: replaying a fresh identical computation
    // doubles the stored gradient.
    Tape tape2;
    Tensor loss2 = sum_all(tape2, mul_elem(tape2, x, x));
    tape2.backward(loss2);
    CHECK(x.grad()(0, 0) == doctest::Approx(12.0).epsilon(1e-14));
    x.clear_grad();
    CHECK_FALSE(x.has_grad());
  }
  // loss = sum(softmax(x)) -> gradient of a constant = 0
  {
    Rng rng(3);
    Tape tape;
    Tensor x(random_mat(4, 6, rng), true);
    Tensor loss = sum_all(tape, softmax_rows(tape, x));
    tape.backward(loss);
    CHECK(x.grad().cwiseAbs().maxCoeff() < 1e-12);
  }
  // Non-scalar loss is rejected.
  {
    Tape tape;
    Tensor x(Mat::Ones(2, 2), true);
    CHECK_THROWS_AS(tape.backward(x), std::invalid_argument);
  }
}

TEST_CASE("every primitive's backward matches central finite differences") {
  Rng rng(42);
  const Scalar tol = 1e-6;

  {
    Tensor a(random_mat(4, 3, rng), true), b(random_mat(3, 5, rng), true);
    CHECK(op_max_fd_error({a, b}, [&](Tape& t) { return matmul(t, a, b); }, rng) < tol);
  }
  {
    Tensor a(random_mat(3, 4, rng), true);
    CHECK(op_max_fd_error({a}, [&](Tape& t) { return transpose(t, a); }, rng) < tol);
  }
  {
    Tensor a(random_mat(4, 4, rng), true), b(random_mat(4, 4, rng), true);
    CHECK(op_max_fd_error({a, b}, [&](Tape& t) { return add(t, a, b); }, rng) < tol);
    CHECK(op_max_fd_error({a, b}, [&](Tape& t) { return mul_elem(t, a, b); }, rng) < tol);
  }
  {
    Tensor a(random_mat(4, 4, rng), true);
    CHECK(op_max_fd_error({a}, [&](Tape& t) { return scale(t, a, -2.5); }, rng) < tol);
    CHECK(op_max_fd_error({a}, [&](Tape& t) { return affine_const(t, a, 3.0, -1.5); }, rng) < tol);
  }
  {
    Tensor a(random_mat(5, 3, rng), true), bias(random_mat(1, 3, rng), true);
    CHECK(op_max_fd_error({a, bias}, [&](Tape& t) { return add_row_broadcast(t, a, bias); }, rng) <
          tol);
  }
  {
    Tensor a(random_mat(4, 6, rng), true);
    CHECK(op_max_fd_error({a}, [&](Tape& t) { return softmax_rows(t, a); }, rng) < tol);
  }
  {
    Tensor x(random_mat(5, 8, rng), true);
    Tensor gamma(random_mat(1, 8, rng, 0.5), true), beta(random_mat(1, 8, rng, 0.5), true);
    CHECK(op_max_fd_error({x, gamma, beta},
                          [&](Tape& t) { return layer_norm(t, x, gamma, beta); }, rng) < tol);
  }
  {
    Tensor x(random_mat(4, 5, rng), true);
    CHECK(op_max_fd_error({x}, [&](Tape& t) { return gelu(t, x); }, rng) < tol);
  }
  {
    Tensor a(random_mat(4, 8, rng), true);
    CHECK(op_max_fd_error({a}, [&](Tape& t) { return slice_cols(t, a, 2, 3); }, rng) < tol);
    Tensor b(random_mat(4, 2, rng), true);
    CHECK(op_max_fd_error({a, b},
                          [&](Tape& t) {
                            return concat_cols(t, {slice_cols(t, a, 0, 4), b});
                          },
                          rng) < tol);
  }
  {
    Tensor table(random_mat(6, 4, rng), true);
    const std::vector<Index> idx{0, 3, 3, -1, 5};
    CHECK(op_max_fd_error({table}, [&](Tape& t) { return gather_rows(t, table, idx); }, rng) < tol);
  }
  {
    Tensor table(random_mat(5, 2, rng), true);
    BucketMat buckets(3, 3);
    buckets << 0, 1, 2, 1, 0, 4, 2, 4, 3;
    CHECK(op_max_fd_error({table}, [&](Tape& t) { return gather_bias(t, table, buckets, 1); },
                          rng) < tol);
  }
  {
    Tensor pred(random_mat(4, 3, rng, 2.0), true);
    Mat target = random_mat(4, 3, rng, 2.0);
    Mat mask = Mat::Ones(4, 3);
    mask(1, 1) = 0;
    mask(3, 0) = 0;
    CHECK(op_max_fd_error({pred},
                          [&](Tape& t) { return masked_huber_sum(t, pred, target, mask, 1.5); },
                          rng) < tol);
  }
}

TEST_CASE("gather_rows: negative index yields a zero row without gradient") {
  Rng rng(9);
  Tape tape;
  Tensor table(random_mat(4, 3, rng), true);
  Tensor out = gather_rows(tape, table, {2, -1, 0});
  CHECK((out.value().row(1).array() == 0).all());
  Tensor loss = sum_all(tape, out);
  tape.backward(loss);
  CHECK(table.grad().row(2).sum() == doctest::Approx(3.0));
  CHECK(table.grad().row(0).sum() == doctest::Approx(3.0));
  CHECK(table.grad().row(1).sum() == 0.0);
  CHECK(table.grad().row(3).sum() == 0.0);
}

TEST_CASE("gradient checker: quadratic form and softmax cross-entropy toy") {
  Rng rng(100);
  // f(x) = x^T A x on a fixed 3x3
  const Mat a = random_mat(3, 3, rng);
  Tensor x(random_mat(3, 1, rng), true);
  const auto quad_obj = [&] {
    Tape t(false);
    Tensor xa = matmul(t, transpose(t, x), Tensor(a));
    return matmul(t, xa, x).value()(0, 0);
  };
  const auto quad_grads = [&] {
    x.clear_grad();
    Tape t;
    Tensor loss = matmul(t, matmul(t, transpose(t, x), Tensor(a)), x);
    t.backward(loss);
  };
  CHECK(finite_difference_check(quad_obj, quad_grads, {{"x", x}}).max_rel_err < 1e-9);

  // Softmax "cross-entropy": -sum(onehot .* log softmax) via elementwise ops.
  Tensor logits(random_mat(2, 5, rng), true);
  Mat onehot = Mat::Zero(2, 5);
  onehot(0, 2) = 1;
  onehot(1, 4) = 1;
  const auto ce = [&](Tape& t) {
    Tensor p = softmax_rows(t, logits);
    // -log p picked out by the one-hot: use sum(onehot * (p - 1)^... ) is not
    // log; instead compute sum(onehot .* p) and check gradients of that
    // smooth surrogate plus a gelu to add curvature.
    return sum_all(t, gelu(t, mul_elem(t, p, Tensor(onehot))));
  };
  const auto ce_obj = [&] {
    Tape t(false);
    return ce(t).value()(0, 0);
  };
  const auto ce_grads = [&] {
    logits.clear_grad();
    Tape t;
    t.backward(ce(t));
  };
  CHECK(finite_difference_check(ce_obj, ce_grads, {{"logits", logits}}).max_rel_err < 1e-6);
}

TEST_CASE("kernels are deterministic across runs") {
  Rng rng(55);
  const Mat a = random_mat(16, 16, rng, 2.0);
  const Mat b = random_mat(16, 16, rng, 2.0);
  Tape tape;
  const Mat m1 = matmul(tape, Tensor(a), Tensor(b)).value();
  const Mat m2 = matmul(tape, Tensor(a), Tensor(b)).value();
  CHECK((m1.array() == m2.array()).all());
  const Mat s1 = softmax_rows(tape, Tensor(a)).value();
  const Mat s2 = softmax_rows(tape, Tensor(a)).value();
  CHECK((s1.array() == s2.array()).all());
  Rng r1(77), r2(77);
  Tape t1, t2;
  const Mat d1 = dropout(t1, Tensor(a), 0.3, true, r1).value();
  const Mat d2 = dropout(t2, Tensor(a), 0.3, true, r2).value();
  CHECK((d1.array() == d2.array()).all());
}
