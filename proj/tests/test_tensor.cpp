#include <doctest.h>

#include <cmath>
#include <random>

#include "gfn/tensor.hpp"

using namespace gfn;

namespace {

// central finite difference of a scalar-valued tape program w.r.t. one leaf
template <typename F>
Mat fd_grad(F&& build, Mat x, double h = 1e-6) {
  Mat g(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      Mat xp = x, xm = x;
      xp(i, j) += h;
      xm(i, j) -= h;
      g(i, j) = (build(xp) - build(xm)) / (2.0 * h);
    }
  return g;
}

double max_rel_err(const Mat& a, const Mat& b) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      double denom = std::max({std::abs(a(i, j)), std::abs(b(i, j)), 1e-8});
      worst = std::max(worst, std::abs(a(i, j) - b(i, j)) / denom);
    }
  return worst;
}

}  // namespace

TEST_CASE("square backprop: d(x^2)/dx = 2x") {
  Tape tape;
  Var x = tape.leaf(Mat::Constant(1, 1, 3.0));
  Var y = sum_all(square(x));
  tape.backward(y);
  CHECK(tape.grad(x)(0, 0) == doctest::Approx(6.0).epsilon(1e-12));
}

TEST_CASE("log-sigmoid gradient at zero is one half") {
  Tape tape;
  Var x = tape.leaf(Mat::Zero(1, 1));
  Var y = sum_all(vlog(sigmoid(x)));
  tape.backward(y);
  CHECK(tape.grad(x)(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("matmul chain matches finite differences") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> g(0.0, 1.0);
  Mat A(3, 4), B(4, 2);
  for (int i = 0; i < A.size(); ++i) A(i / 4, i % 4) = g(rng);
  for (int i = 0; i < B.size(); ++i) B(i / 2, i % 2) = g(rng);

  auto value = [&](const Mat& a) {
    Tape t;
    Var va = t.leaf(a);
    Var vb = t.constant(B);
    return t.scalar(sum_all(vtanh(matmul(va, vb))));
  };
  Tape tape;
  Var va = tape.leaf(A);
  Var vb = tape.constant(B);
  tape.backward(sum_all(vtanh(matmul(va, vb))));
  CHECK(max_rel_err(tape.grad(va), fd_grad(value, A)) < 1e-6);
}

TEST_CASE("composite elementwise ops match finite differences") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.2, 2.0);
  Mat X(4, 3);
  for (int i = 0; i < 12; ++i) X(i / 3, i % 3) = u(rng);

  auto value = [&](const Mat& x) {
    Tape t;
    Var v = t.leaf(x);
    Var y = add(mul(vexp(neg(v)), vsin(v)), mul(softplus(v), vcos(v)));
    y = add(y, add(vlog(v), vlgamma(v)));
    y = add(y, leaky_relu(add_scalar(v, -1.0)));
    return t.scalar(mean_all(y));
  };
  Tape tape;
  Var v = tape.leaf(X);
  Var y = add(mul(vexp(neg(v)), vsin(v)), mul(softplus(v), vcos(v)));
  y = add(y, add(vlog(v), vlgamma(v)));
  y = add(y, leaky_relu(add_scalar(v, -1.0)));
  tape.backward(mean_all(y));
  CHECK(max_rel_err(tape.grad(v), fd_grad(value, X)) < 1e-5);
}

TEST_CASE("logsumexp rows: value and softmax gradient") {
  Mat X(2, 3);
  X << 1.0, 2.0, 3.0, -1.0, 0.0, 1.0;
  Tape tape;
  Var v = tape.leaf(X);
  Var y = logsumexp_rows(v);
  double expect = std::log(std::exp(1.0) + std::exp(2.0) + std::exp(3.0));
  CHECK(tape.value(y)(0, 0) == doctest::Approx(expect).epsilon(1e-12));
  tape.backward(sum_all(y));
  Mat grad = tape.grad(v);
  for (int r = 0; r < 2; ++r) {
    double s = 0.0;
    for (int c = 0; c < 3; ++c) s += grad(r, c);
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));  // softmax rows sum to 1
  }
}

TEST_CASE("segment_sum and gather_rows round trip with correct gradients") {
  Mat X(5, 1);
  X << 1.0, 2.0, 3.0, 4.0, 5.0;
  Tape tape;
  Var v = tape.leaf(X);
  std::vector<int> seg{0, 0, 1, 1, 1};
  Var s = segment_sum(v, seg, 2);
  CHECK(tape.value(s)(0, 0) == doctest::Approx(3.0));
  CHECK(tape.value(s)(1, 0) == doctest::Approx(12.0));

  std::vector<int> idx{1, 1, 0};
  Var gathered = gather_rows(s, idx);
  tape.backward(sum_all(mul_scalar(gathered, 2.0)));
  // rows 0/1 feed segment 0 (gathered once), rows 2-4 segment 1 (twice)
  CHECK(tape.grad(v)(0, 0) == doctest::Approx(2.0));
  CHECK(tape.grad(v)(2, 0) == doctest::Approx(4.0));
}

TEST_CASE("slice and concat are inverse on columns") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 1.0);
  Mat X(3, 5);
  for (int i = 0; i < 15; ++i) X(i / 5, i % 5) = g(rng);
  Tape tape;
  Var v = tape.leaf(X);
  Var back = concat_cols(slice_cols(v, 0, 2), slice_cols(v, 2, 3));
  CHECK((tape.value(back) - X).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
  tape.backward(sum_all(square(back)));
  CHECK(max_rel_err(tape.grad(v), 2.0 * X) < 1e-12);
}

TEST_CASE("digamma against reference values") {
  CHECK(digamma(0.1) == doctest::Approx(-10.423754940411076).epsilon(1e-12));
  CHECK(digamma(0.5) == doctest::Approx(-1.9635100260214235).epsilon(1e-12));
  CHECK(digamma(1.0) == doctest::Approx(-0.5772156649015329).epsilon(1e-12));
  CHECK(digamma(3.7) == doctest::Approx(1.1671535393615113).epsilon(1e-12));
  CHECK(digamma(25.0) == doctest::Approx(3.198742512851974).epsilon(1e-12));
}

TEST_CASE("log Bessel I0 and I1/I0 across the series/asymptotic switch") {
  CHECK(log_bessel_i0(0.01) == doctest::Approx(2.499984375182486e-05).epsilon(1e-10));
  CHECK(log_bessel_i0(0.5) == doctest::Approx(0.06154971918548119).epsilon(1e-12));
  CHECK(log_bessel_i0(10.0) == doctest::Approx(7.942972083118695).epsilon(1e-12));
  CHECK(log_bessel_i0(49.9) == doctest::Approx(47.02858161680337).epsilon(1e-11));
  CHECK(log_bessel_i0(50.1) == doctest::Approx(47.22657140757071).epsilon(1e-11));
  CHECK(log_bessel_i0(200.0) == doctest::Approx(196.43252935422348).epsilon(1e-12));
  CHECK(bessel_i1_over_i0(0.5) == doctest::Approx(0.24249961258080202).epsilon(1e-11));
  CHECK(bessel_i1_over_i0(49.9) == doctest::Approx(0.9899287204074461).epsilon(1e-11));
  CHECK(bessel_i1_over_i0(50.1) == doctest::Approx(0.9899691330985528).epsilon(1e-11));
}

TEST_CASE("log_i0 tape op gradient matches I1/I0") {
  Mat X(1, 2);
  X << 0.7, 12.0;
  Tape tape;
  Var v = tape.leaf(X);
  tape.backward(sum_all(log_i0(v)));
  CHECK(tape.grad(v)(0, 0) == doctest::Approx(bessel_i1_over_i0(0.7)).epsilon(1e-10));
  CHECK(tape.grad(v)(0, 1) == doctest::Approx(bessel_i1_over_i0(12.0)).epsilon(1e-10));
}

TEST_CASE("broadcast ops match finite differences") {
  std::mt19937_64 rng(19);
  std::normal_distribution<double> g(0.0, 1.0);
  Mat X(4, 3), B(1, 3);
  for (int i = 0; i < 12; ++i) X(i / 3, i % 3) = g(rng);
  for (int i = 0; i < 3; ++i) B(0, i) = g(rng);

  auto value = [&](const Mat& b) {
    Tape t;
    Var vx = t.constant(X);
    Var vb = t.leaf(b);
    Var y = sub_colvec(add_rowvec(vx, vb), row_sum(vx));
    return t.scalar(sum_all(square(y)));
  };
  Tape tape;
  Var vx = tape.constant(X);
  Var vb = tape.leaf(B);
  Var y = sub_colvec(add_rowvec(vx, vb), row_sum(vx));
  tape.backward(sum_all(square(y)));
  CHECK(max_rel_err(tape.grad(vb), fd_grad(value, B)) < 1e-6);
}
