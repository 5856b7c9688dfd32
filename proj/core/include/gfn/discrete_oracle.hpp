#pragma once

#include <random>
#include <string>
#include <vector>

#include "gfn/tensor.hpp"

namespace gfn {

/// Finite pointed DAG. Vertex 0 is the source, vertex n-1 the sink; rewards
/// live on terminating vertices (those with an edge to the sink).
struct PointedDag {
  int n = 0;
  std::vector<std::pair<int, int>> edges;
  Vec reward;  // size n; nonzero only on terminating vertices

  int source() const { return 0; }
  int sink() const { return n - 1; }
};

/// Text format: "vertices N", then "edge a b" and "reward v x" lines;
/// '#' starts a comment.
PointedDag parse_dag(const std::string& text);
PointedDag load_dag(const std::string& path);
std::string format_dag(const PointedDag& dag);

/// Throws naming the violated axiom: acyclicity, reachability from the
/// source, co-reachability of the sink, no direct source->sink edge,
/// positive reward mass on the terminating set.
void validate_dag(const PointedDag& dag);

/// kappa: adjacency counts plus the sink self-loop. nu: trajectory counts
/// from the source. kappab: the reverse kernel nu(i) kappa(i,j) / nu(j).
struct DiscreteKernels {
  Mat kappa;   // kappa(i, j) = #edges i -> j (0/1) with kappa(sink, sink) = 1
  Mat kappab;  // kappab(j, i): backward kernel; row source() is zero
  Vec nu;
};
DiscreteKernels kernels_from_dag(const PointedDag& dag);

/// Tabular flow: mu over vertices, row-stochastic P_F (rows except sink) and
/// P_B (rows except source), Z = mu(source).
struct DiscreteFlow {
  Vec mu;
  Mat pf;  // pf(i, j) = P_F(j | i); pf(x, sink) is the termination probability
  Mat pb;  // pb(j, i) = P_B(i | j); row sink holds P_B(x | sink) = R(x)/Z
  double z = 0.0;
};

/// Exact flow induced by a backward policy: mu(s) = R(s) + sum over children
/// c of mu(c) P_B(s | c), then P_F(c | s) = mu(c) P_B(s | c) / mu(s). All
/// balance conditions hold by construction.
DiscreteFlow flow_from_backward(const PointedDag& dag, const Mat& pb);

/// Terminating distribution of a forward policy by topological-order DP.
Vec exact_terminating_distribution(const PointedDag& dag, const Mat& pf);
/// Same by exhaustive trajectory enumeration (small graphs).
Vec brute_force_terminating_distribution(const PointedDag& dag, const Mat& pf);

/// Maximal absolute residual of each balance condition, as exact finite sums.
struct ResidualReport {
  double fm = 0.0;        // incoming flow vs mu at every non-source vertex
  double db = 0.0;        // mu(s) P_F - mu(s') P_B on every interior edge
  double tb = 0.0;        // Z prod P_F - R prod P_B over complete trajectories
  double rm = 0.0;        // mu(x) P_F(x, sink) - R(x)
  double pb_total = 0.0;  // sum_n P_B^n(s, {source}) = 1 at every vertex
};
ResidualReport check_conditions(const PointedDag& dag, const DiscreteFlow& flow);

/// Erdos-Renyi over a random topological order; patched so every interior
/// vertex is reachable from the source and reaches the sink.
PointedDag random_dag(int n_vertices, double edge_prob, std::mt19937_64& rng);
/// Random row-stochastic backward policy supported on the reversed edges.
Mat random_backward_policy(const PointedDag& dag, std::mt19937_64& rng);
/// Random row-stochastic forward policy supported on the edges.
Mat random_forward_policy(const PointedDag& dag, std::mt19937_64& rng);

/// Vertices in a topological order starting at the source, ending at the sink.
std::vector<int> topological_order(const PointedDag& dag);

}  // namespace gfn
