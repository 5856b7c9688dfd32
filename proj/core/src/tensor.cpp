#include "gfn/tensor.hpp"

#include <cmath>

namespace gfn {

Var Tape::leaf(const Mat& value) {
  return emit(value, true, nullptr);
}

Var Tape::constant(const Mat& value) {
  return emit(value, false, nullptr);
}

Var Tape::constant_scalar(double v) {
  Mat m(1, 1);
  m(0, 0) = v;
  return constant(m);
}

double Tape::scalar(Var v) const {
  const Mat& m = value(v);
  if (m.size() != 1) throw ShapeError("scalar() on non-scalar node");
  return m(0, 0);
}

Mat Tape::grad(Var v) const {
  const Node& n = node(v);
  if (n.grad_alloc) return n.grad;
  return Mat::Zero(n.value.rows(), n.value.cols());
}

Var Tape::emit(Mat value, bool needs_grad, std::function<void(Tape&, const Node&)> pull) {
  Node n;
  n.value = std::move(value);
  n.needs_grad = needs_grad;
  n.pull = std::move(pull);
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size() - 1)};
}

Mat& Tape::grad_buf(int id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (!n.grad_alloc) {
    n.grad = Mat::Zero(n.value.rows(), n.value.cols());
    n.grad_alloc = true;
  }
  return n.grad;
}

void Tape::backward(Var loss) {
  Node& top = node(loss);
  if (top.value.size() != 1) throw std::runtime_error("backward() target must be a scalar");
  for (auto& n : nodes_) {
    n.grad_alloc = false;
    n.grad.resize(0, 0);
  }
  grad_buf(loss.id)(0, 0) = 1.0;
  for (int i = loss.id; i >= 0; --i) {
    const Node& n = nodes_[static_cast<std::size_t>(i)];
    if (n.pull && n.grad_alloc && n.needs_grad) n.pull(*this, n);
  }
}

void Tape::clear() { nodes_.clear(); }

namespace {

Tape& same_tape(Var a, Var b) {
  if (a.tape != b.tape) throw std::runtime_error("Vars from different tapes");
  return *a.tape;
}

bool same_shape(const Mat& a, const Mat& b) {
  return a.rows() == b.rows() && a.cols() == b.cols();
}

}  // namespace

Var matmul(Var a, Var b) {
  Tape& t = same_tape(a, b);
  const Mat& A = t.value(a);
  const Mat& B = t.value(b);
  if (A.cols() != B.rows()) throw ShapeError("matmul shape mismatch");
  bool ng = t.node(a).needs_grad || t.node(b).needs_grad;
  int ia = a.id, ib = b.id;
  return t.emit(A * B, ng, [ia, ib](Tape& tp, const Tape::Node& n) {
    const Mat& g = n.grad;
    if (tp.node(Var{&tp, ia}).needs_grad)
      tp.grad_buf(ia).noalias() += g * tp.node(Var{&tp, ib}).value.transpose();
    if (tp.node(Var{&tp, ib}).needs_grad)
      tp.grad_buf(ib).noalias() += tp.node(Var{&tp, ia}).value.transpose() * g;
  });
}

Var add(Var a, Var b) {
  Tape& t = same_tape(a, b);
  if (!same_shape(t.value(a), t.value(b))) throw ShapeError("add shape mismatch");
  bool ng = t.node(a).needs_grad || t.node(b).needs_grad;
  int ia = a.id, ib = b.id;
  return t.emit(t.value(a) + t.value(b), ng, [ia, ib](Tape& tp, const Tape::Node& n) {
    if (tp.node(Var{&tp, ia}).needs_grad) tp.grad_buf(ia) += n.grad;
    if (tp.node(Var{&tp, ib}).needs_grad) tp.grad_buf(ib) += n.grad;
  });
}

Var sub(Var a, Var b) {
  Tape& t = same_tape(a, b);
  if (!same_shape(t.value(a), t.value(b))) throw ShapeError("sub shape mismatch");
  bool ng = t.node(a).needs_grad || t.node(b).needs_grad;
  int ia = a.id, ib = b.id;
  return t.emit(t.value(a) - t.value(b), ng, [ia, ib](Tape& tp, const Tape::Node& n) {
    if (tp.node(Var{&tp, ia}).needs_grad) tp.grad_buf(ia) += n.grad;
    if (tp.node(Var{&tp, ib}).needs_grad) tp.grad_buf(ib) -= n.grad;
  });
}

Var mul(Var a, Var b) {
  Tape& t = same_tape(a, b);
  if (!same_shape(t.value(a), t.value(b))) throw ShapeError("mul shape mismatch");
  bool ng = t.node(a).needs_grad || t.node(b).needs_grad;
  int ia = a.id, ib = b.id;
  return t.emit(t.value(a).cwiseProduct(t.value(b)), ng, [ia, ib](Tape& tp, const Tape::Node& n) {
    if (tp.node(Var{&tp, ia}).needs_grad)
      tp.grad_buf(ia) += n.grad.cwiseProduct(tp.node(Var{&tp, ib}).value);
    if (tp.node(Var{&tp, ib}).needs_grad)
      tp.grad_buf(ib) += n.grad.cwiseProduct(tp.node(Var{&tp, ia}).value);
  });
}

Var cdiv(Var a, Var b) {
  Tape& t = same_tape(a, b);
  if (!same_shape(t.value(a), t.value(b))) throw ShapeError("cdiv shape mismatch");
  bool ng = t.node(a).needs_grad || t.node(b).needs_grad;
  int ia = a.id, ib = b.id;
  return t.emit(t.value(a).cwiseQuotient(t.value(b)), ng, [ia, ib](Tape& tp, const Tape::Node& n) {
    const Mat& B = tp.node(Var{&tp, ib}).value;
    if (tp.node(Var{&tp, ia}).needs_grad) tp.grad_buf(ia) += n.grad.cwiseQuotient(B);
    if (tp.node(Var{&tp, ib}).needs_grad)
      tp.grad_buf(ib) -= n.grad.cwiseProduct(n.value).cwiseQuotient(B);
  });
}

Var neg(Var a) { return mul_scalar(a, -1.0); }

Var add_scalar(Var a, double c) {
  Tape& t = *a.tape;
  int ia = a.id;
  return t.emit((t.value(a).array() + c).matrix(), t.node(a).needs_grad,
                [ia](Tape& tp, const Tape::Node& n) { tp.grad_buf(ia) += n.grad; });
}

Var mul_scalar(Var a, double c) {
  Tape& t = *a.tape;
  int ia = a.id;
  return t.emit(t.value(a) * c, t.node(a).needs_grad,
                [ia, c](Tape& tp, const Tape::Node& n) { tp.grad_buf(ia) += n.grad * c; });
}

Var add_rowvec(Var x, Var b) {
  Tape& t = same_tape(x, b);
  const Mat& X = t.value(x);
  const Mat& B = t.value(b);
  if (B.rows() != 1 || B.cols() != X.cols()) throw ShapeError("add_rowvec shape mismatch");
  bool ng = t.node(x).needs_grad || t.node(b).needs_grad;
  int ix = x.id, ib = b.id;
  Mat out = X;
  out.rowwise() += B.row(0);
  return t.emit(std::move(out), ng, [ix, ib](Tape& tp, const Tape::Node& n) {
    if (tp.node(Var{&tp, ix}).needs_grad) tp.grad_buf(ix) += n.grad;
    if (tp.node(Var{&tp, ib}).needs_grad) tp.grad_buf(ib).row(0) += n.grad.colwise().sum();
  });
}

Var sub_colvec(Var x, Var c) {
  Tape& t = same_tape(x, c);
  const Mat& X = t.value(x);
  const Mat& C = t.value(c);
  if (C.cols() != 1 || C.rows() != X.rows()) throw ShapeError("sub_colvec shape mismatch");
  bool ng = t.node(x).needs_grad || t.node(c).needs_grad;
  int ix = x.id, ic = c.id;
  Mat out = X;
  out.colwise() -= C.col(0);
  return t.emit(std::move(out), ng, [ix, ic](Tape& tp, const Tape::Node& n) {
    if (tp.node(Var{&tp, ix}).needs_grad) tp.grad_buf(ix) += n.grad;
    if (tp.node(Var{&tp, ic}).needs_grad) tp.grad_buf(ic).col(0) -= n.grad.rowwise().sum();
  });
}

Var mul_mat(Var a, const Mat& m) {
  Tape& t = *a.tape;
  if (!same_shape(t.value(a), m)) throw ShapeError("mul_mat shape mismatch");
  int ia = a.id;
  return t.emit(t.value(a).cwiseProduct(m), t.node(a).needs_grad,
                [ia, m](Tape& tp, const Tape::Node& n) {
                  tp.grad_buf(ia) += n.grad.cwiseProduct(m);
                });
}

// Elementwise helper: value = f(x), pull uses dval computed from x (and value).
namespace {
template <class F, class D>
Var unary(Var a, F f, D dfdx) {
  Tape& t = *a.tape;
  const Mat& X = t.value(a);
  int ia = a.id;
  Mat out = f(X.array()).matrix();
  return t.emit(std::move(out), t.node(a).needs_grad,
                [ia, dfdx](Tape& tp, const Tape::Node& n) {
                  const Mat& X = tp.node(Var{&tp, ia}).value;
                  tp.grad_buf(ia).array() += n.grad.array() * dfdx(X.array(), n.value.array());
                });
}
using Arr = Eigen::ArrayXXd;
}  // namespace

Var vtanh(Var a) {
  return unary(a, [](const auto& x) -> Arr { return x.tanh(); },
               [](const auto&, const auto& y) -> Arr { return 1.0 - y * y; });
}

Var leaky_relu(Var a, double slope) {
  return unary(a,
               [slope](const auto& x) -> Arr { return (x > 0.0).select(x, slope * x); },
               [slope](const auto& x, const auto&) -> Arr {
                 return (x > 0.0).select(Arr::Constant(x.rows(), x.cols(), 1.0),
                                         Arr::Constant(x.rows(), x.cols(), slope));
               });
}

Var sigmoid(Var a) {
  return unary(a, [](const auto& x) -> Arr { return 1.0 / (1.0 + (-x).exp()); },
               [](const auto&, const auto& y) -> Arr { return y * (1.0 - y); });
}

Var softplus(Var a) {
  // log(1+e^x) computed stably as max(x,0) + log1p(exp(-|x|))
  return unary(a,
               [](const auto& x) -> Arr {
                 return x.max(0.0) + (-x.abs()).exp().log1p();
               },
               [](const auto& x, const auto&) -> Arr { return 1.0 / (1.0 + (-x).exp()); });
}

Var vlog(Var a) {
  return unary(a, [](const auto& x) -> Arr { return x.log(); },
               [](const auto& x, const auto&) -> Arr { return 1.0 / x; });
}

Var vexp(Var a) {
  return unary(a, [](const auto& x) -> Arr { return x.exp(); },
               [](const auto&, const auto& y) -> Arr { return y; });
}

Var vsin(Var a) {
  return unary(a, [](const auto& x) -> Arr { return x.sin(); },
               [](const auto& x, const auto&) -> Arr { return x.cos(); });
}

Var vcos(Var a) {
  return unary(a, [](const auto& x) -> Arr { return x.cos(); },
               [](const auto& x, const auto&) -> Arr { return -x.sin(); });
}

Var square(Var a) {
  return unary(a, [](const auto& x) -> Arr { return x.square(); },
               [](const auto& x, const auto&) -> Arr { return 2.0 * x; });
}

Var vlgamma(Var a) {
  return unary(a,
               [](const auto& x) -> Arr { return x.unaryExpr([](double v) { return std::lgamma(v); }); },
               [](const auto& x, const auto&) -> Arr {
                 return x.unaryExpr([](double v) { return digamma(v); });
               });
}

Var log_i0(Var a) {
  return unary(a,
               [](const auto& x) -> Arr {
                 return x.unaryExpr([](double v) { return log_bessel_i0(v); });
               },
               [](const auto& x, const auto&) -> Arr {
                 return x.unaryExpr([](double v) { return bessel_i1_over_i0(v); });
               });
}

Var sum_all(Var a) {
  Tape& t = *a.tape;
  int ia = a.id;
  Mat out(1, 1);
  out(0, 0) = t.value(a).sum();
  return t.emit(std::move(out), t.node(a).needs_grad, [ia](Tape& tp, const Tape::Node& n) {
    tp.grad_buf(ia).array() += n.grad(0, 0);
  });
}

Var mean_all(Var a) {
  Tape& t = *a.tape;
  double inv = 1.0 / static_cast<double>(t.value(a).size());
  return mul_scalar(sum_all(a), inv);
}

Var row_sum(Var a) {
  Tape& t = *a.tape;
  int ia = a.id;
  Mat out = t.value(a).rowwise().sum();
  return t.emit(std::move(out), t.node(a).needs_grad, [ia](Tape& tp, const Tape::Node& n) {
    tp.grad_buf(ia).colwise() += n.grad.col(0);
  });
}

Var logsumexp_rows(Var a) {
  Tape& t = *a.tape;
  const Mat& X = t.value(a);
  int ia = a.id;
  Mat out(X.rows(), 1);
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    double m = X.row(i).maxCoeff();
    out(i, 0) = m + std::log((X.row(i).array() - m).exp().sum());
  }
  return t.emit(std::move(out), t.node(a).needs_grad, [ia](Tape& tp, const Tape::Node& n) {
    const Mat& X = tp.node(Var{&tp, ia}).value;
    Mat shifted = X;
    shifted.colwise() -= n.value.col(0);
    Mat soft = shifted.array().exp().matrix();
    tp.grad_buf(ia) += (soft.array().colwise() * n.grad.col(0).array()).matrix();
  });
}

Var segment_sum(Var x, const std::vector<int>& seg, int nseg) {
  Tape& t = *x.tape;
  const Mat& X = t.value(x);
  if (X.cols() != 1 || static_cast<std::size_t>(X.rows()) != seg.size())
    throw ShapeError("segment_sum expects a column vector matching seg");
  int ix = x.id;
  Mat out = Mat::Zero(nseg, 1);
  for (std::size_t i = 0; i < seg.size(); ++i) out(seg[i], 0) += X(static_cast<Eigen::Index>(i), 0);
  return t.emit(std::move(out), t.node(x).needs_grad, [ix, seg](Tape& tp, const Tape::Node& n) {
    Mat& g = tp.grad_buf(ix);
    for (std::size_t i = 0; i < seg.size(); ++i)
      g(static_cast<Eigen::Index>(i), 0) += n.grad(seg[i], 0);
  });
}

Var concat_cols(Var a, Var b) {
  Tape& t = same_tape(a, b);
  const Mat& A = t.value(a);
  const Mat& B = t.value(b);
  if (A.rows() != B.rows()) throw ShapeError("concat_cols row mismatch");
  bool ng = t.node(a).needs_grad || t.node(b).needs_grad;
  int ia = a.id, ib = b.id;
  Mat out(A.rows(), A.cols() + B.cols());
  out << A, B;
  Eigen::Index ca = A.cols();
  return t.emit(std::move(out), ng, [ia, ib, ca](Tape& tp, const Tape::Node& n) {
    if (tp.node(Var{&tp, ia}).needs_grad)
      tp.grad_buf(ia) += n.grad.leftCols(ca);
    if (tp.node(Var{&tp, ib}).needs_grad)
      tp.grad_buf(ib) += n.grad.rightCols(n.grad.cols() - ca);
  });
}

Var slice_cols(Var x, int start, int len) {
  Tape& t = *x.tape;
  const Mat& X = t.value(x);
  if (start < 0 || len < 0 || start + len > X.cols()) throw ShapeError("slice_cols out of range");
  int ix = x.id;
  return t.emit(X.middleCols(start, len), t.node(x).needs_grad,
                [ix, start, len](Tape& tp, const Tape::Node& n) {
                  tp.grad_buf(ix).middleCols(start, len) += n.grad;
                });
}

Var gather_rows(Var x, const std::vector<int>& idx) {
  Tape& t = *x.tape;
  const Mat& X = t.value(x);
  int ix = x.id;
  Mat out(static_cast<Eigen::Index>(idx.size()), X.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = X.row(idx[i]);
  return t.emit(std::move(out), t.node(x).needs_grad, [ix, idx](Tape& tp, const Tape::Node& n) {
    Mat& g = tp.grad_buf(ix);
    for (std::size_t i = 0; i < idx.size(); ++i)
      g.row(idx[i]) += n.grad.row(static_cast<Eigen::Index>(i));
  });
}

// ---- scalar special functions ----

double digamma(double x) {
  // Recurrence up to x >= 12, then the asymptotic series.
  double result = 0.0;
  while (x < 12.0) {
    result -= 1.0 / x;
    x += 1.0;
  }
  double inv = 1.0 / x;
  double inv2 = inv * inv;
  result += std::log(x) - 0.5 * inv -
            inv2 * (1.0 / 12.0 -
                    inv2 * (1.0 / 120.0 -
                            inv2 * (1.0 / 252.0 -
                                    inv2 * (1.0 / 240.0 - inv2 * (1.0 / 132.0 - inv2 * 691.0 / 32760.0)))));
  return result;
}

namespace {
// term recurrence for the large-x expansion of I_nu, valid for nu = 0, 1
double bessel_asym_corr(double x, double four_nu_sq) {
  double term = 1.0, sum = 1.0;
  for (int k = 1; k <= 12; ++k) {
    double odd = 2.0 * k - 1.0;
    term *= (odd * odd - four_nu_sq) / (8.0 * k * x);
    sum += term;
    if (std::abs(term) < 1e-16 * std::abs(sum)) break;
  }
  return sum;
}
}  // namespace

double log_bessel_i0(double x) {
  x = std::abs(x);
  if (x < 50.0) {
    // power series: I0(x) = sum ((x/2)^(2k) / (k!)^2
    double t = 0.25 * x * x;
    double term = 1.0, sum = 1.0;
    for (int k = 1; k < 256; ++k) {
      term *= t / (static_cast<double>(k) * k);
      sum += term;
      if (term < 1e-17 * sum) break;
    }
    return std::log(sum);
  }
  return x - 0.5 * std::log(2.0 * M_PI * x) + std::log(bessel_asym_corr(x, 0.0));
}

namespace {
double log_bessel_i1(double x) {
  if (x < 50.0) {
    // I1(x) = (x/2) * sum ((x/2)^(2k) / (k! (k+1)!))
    double t = 0.25 * x * x;
    double term = 1.0, sum = 1.0;
    for (int k = 1; k < 256; ++k) {
      term *= t / (static_cast<double>(k) * (k + 1.0));
      sum += term;
      if (term < 1e-17 * sum) break;
    }
    return std::log(0.5 * x) + std::log(sum);
  }
  return x - 0.5 * std::log(2.0 * M_PI * x) + std::log(bessel_asym_corr(x, 4.0));
}
}  // namespace

double bessel_i1_over_i0(double x) {
  if (x == 0.0) return 0.0;
  double s = x < 0.0 ? -1.0 : 1.0;
  x = std::abs(x);
  return s * std::exp(log_bessel_i1(x) - log_bessel_i0(x));
}

}  // namespace gfn
