#pragma once

#include <Eigen/Dense>
#include <functional>
#include <stdexcept>
#include <vector>

namespace gfn {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

class Tape;

/// Handle to a node on a tape. Cheap to copy; valid until the tape is cleared.
struct Var {
  Tape* tape = nullptr;
  int id = -1;
  bool valid() const { return tape != nullptr && id >= 0; }
};

struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Reverse-mode tape over dense 64-bit matrices. Nodes are appended in
/// evaluation order, so reverse iteration is a valid topological order for
/// the backward sweep. Single-threaded; one tape per training step.
class Tape {
 public:
  /// Leaf parameter: participates in gradient accumulation.
  Var leaf(const Mat& value);
  /// Constant input: no gradient is ever tracked through it.
  Var constant(const Mat& value);
  Var constant_scalar(double v);

  const Mat& value(Var v) const { return node(v).value; }
  double scalar(Var v) const;
  /// Gradient of the last backward() target w.r.t. v. Zero matrix if v was
  /// not reached by the sweep.
  Mat grad(Var v) const;

  /// Runs the reverse sweep from a scalar loss node.
  void backward(Var loss);

  void clear();
  std::size_t size() const { return nodes_.size(); }

  // -- internal node machinery (used by the op free functions) --
  struct Node {
    Mat value;
    Mat grad;            // materialized lazily during backward()
    bool needs_grad = false;
    bool grad_alloc = false;
    // Pulls this node's grad into its parents' grads.
    std::function<void(Tape&, const Node&)> pull;
  };
  Node& node(Var v) {
    check(v);
    return nodes_[static_cast<std::size_t>(v.id)];
  }
  const Node& node(Var v) const {
    check(v);
    return nodes_[static_cast<std::size_t>(v.id)];
  }
  Var emit(Mat value, bool needs_grad, std::function<void(Tape&, const Node&)> pull);
  Mat& grad_buf(int id);

 private:
  void check(Var v) const {
    if (v.tape != this || v.id < 0 || static_cast<std::size_t>(v.id) >= nodes_.size())
      throw std::runtime_error("Var does not belong to this tape");
  }
  std::vector<Node> nodes_;
};

// ---- ops ----

Var matmul(Var a, Var b);
Var add(Var a, Var b);           // same shape
Var sub(Var a, Var b);
Var mul(Var a, Var b);           // elementwise
Var cdiv(Var a, Var b);          // elementwise a/b
Var neg(Var a);
Var add_scalar(Var a, double c);
Var mul_scalar(Var a, double c);
Var add_rowvec(Var x, Var b);    // x: n*m, b: 1*m broadcast over rows
Var sub_colvec(Var x, Var c);    // x: n*m, c: n*1 broadcast over cols
Var mul_mat(Var a, const Mat& m);  // elementwise by a constant mask/matrix

Var vtanh(Var a);
Var leaky_relu(Var a, double slope = 0.01);
Var sigmoid(Var a);
Var softplus(Var a);
Var vlog(Var a);
Var vexp(Var a);
Var vsin(Var a);
Var vcos(Var a);
Var square(Var a);
Var vlgamma(Var a);   // elementwise log-gamma; derivative is digamma
Var log_i0(Var a);    // elementwise log I0 (modified Bessel); derivative I1/I0

Var sum_all(Var a);              // -> 1x1
Var mean_all(Var a);             // -> 1x1
Var row_sum(Var a);              // n*m -> n*1
Var logsumexp_rows(Var a);       // n*k -> n*1
/// Sums rows of a column vector into segments: out[seg[i]] += x[i].
Var segment_sum(Var x, const std::vector<int>& seg, int nseg);
Var concat_cols(Var a, Var b);
Var slice_cols(Var x, int start, int len);
/// out.row(i) = x.row(idx[i]); gradient scatters back.
Var gather_rows(Var x, const std::vector<int>& idx);

// scalar special functions shared with the plain (non-tape) code paths
double digamma(double x);
double log_bessel_i0(double x);
double bessel_i1_over_i0(double x);

}  // namespace gfn
