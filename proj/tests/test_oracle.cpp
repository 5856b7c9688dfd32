#include <doctest.h>

#include <random>

#include "gfn/discrete_oracle.hpp"

using namespace gfn;

namespace {
// s0 -> a -> sink, reward 1 at a
PointedDag chain_dag() {
  PointedDag d;
  d.n = 3;
  d.edges = {{0, 1}, {1, 2}};
  d.reward = Vec::Zero(3);
  d.reward(1) = 1.0;
  return d;
}

// s0 -> {a, b} -> c -> sink
PointedDag diamond_dag() {
  PointedDag d;
  d.n = 5;
  d.edges = {{0, 1}, {0, 2}, {1, 3}, {2, 3}, {3, 4}};
  d.reward = Vec::Zero(5);
  d.reward(3) = 1.0;
  return d;
}

// s0 -> {a, b} -> sink with rewards (1, 3)
PointedDag two_terminal_dag() {
  PointedDag d;
  d.n = 4;
  d.edges = {{0, 1}, {0, 2}, {1, 3}, {2, 3}};
  d.reward = Vec::Zero(4);
  d.reward(1) = 1.0;
  d.reward(2) = 3.0;
  return d;
}

Mat uniform_backward(const PointedDag& dag) {
  Mat pb = Mat::Zero(dag.n, dag.n);
  for (auto [a, b] : dag.edges)
    if (b != dag.sink()) pb(b, a) = 1.0;
  for (int j = 0; j < dag.n; ++j) {
    double s = pb.row(j).sum();
    if (s > 0.0) pb.row(j) /= s;
  }
  return pb;
}
}  // namespace

TEST_CASE("chain: trajectory counts and reverse kernel") {
  DiscreteKernels k = kernels_from_dag(chain_dag());
  CHECK(k.nu(0) == doctest::Approx(1.0));
  CHECK(k.nu(1) == doctest::Approx(1.0));
  CHECK(k.nu(2) == doctest::Approx(1.0));
  CHECK(k.kappab(1, 0) == doctest::Approx(1.0));
  CHECK(k.kappab.row(0).sum() == doctest::Approx(0.0));  // no backward steps from s0
}

TEST_CASE("diamond: two trajectories reach the join vertex") {
  DiscreteKernels k = kernels_from_dag(diamond_dag());
  CHECK(k.nu(3) == doctest::Approx(2.0));
  CHECK(k.nu(4) == doctest::Approx(2.0));
}

TEST_CASE("reverse kernel satisfies nu x kappa = nu x kappa_b off the corners") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    PointedDag dag = random_dag(10, 0.35, rng);
    DiscreteKernels k = kernels_from_dag(dag);
    for (int i = 0; i < dag.n; ++i)
      for (int j = 0; j < dag.n; ++j) {
        if (i == dag.source() && j == dag.source()) continue;
        if (i == dag.sink() && j == dag.sink()) continue;
        CHECK(k.nu(i) * k.kappa(i, j) == doctest::Approx(k.nu(j) * k.kappab(j, i)).epsilon(1e-12));
      }
  }
}

TEST_CASE("two-terminal toy: Z = 4 and P_F(a | s0) = 1/4") {
  DiscreteFlow f = flow_from_backward(two_terminal_dag(), uniform_backward(two_terminal_dag()));
  CHECK(f.z == doctest::Approx(4.0).epsilon(1e-15));
  CHECK(f.pf(0, 1) == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(f.pf(0, 2) == doctest::Approx(0.75).epsilon(1e-15));
  ResidualReport rep = check_conditions(two_terminal_dag(), f);
  CHECK(rep.fm <= 1e-15);
  CHECK(rep.db <= 1e-15);
  CHECK(rep.tb <= 1e-15);
  CHECK(rep.rm <= 1e-15);
  CHECK(rep.pb_total <= 1e-15);
}

TEST_CASE("one-step terminating distribution") {
  PointedDag dag = two_terminal_dag();
  DiscreteFlow f = flow_from_backward(dag, uniform_backward(dag));
  Vec pt = exact_terminating_distribution(dag, f.pf);
  CHECK(pt(1) == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(pt(2) == doctest::Approx(0.75).epsilon(1e-14));
}

TEST_CASE("diamond with uniform forward policy: all mass at the join") {
  std::mt19937_64 rng(1);
  PointedDag dag = diamond_dag();
  Mat pf = Mat::Zero(5, 5);
  pf(0, 1) = pf(0, 2) = 0.5;
  pf(1, 3) = pf(2, 3) = 1.0;
  pf(3, 4) = 1.0;
  Vec pt = exact_terminating_distribution(dag, pf);
  CHECK(pt(3) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("DP terminating distribution equals brute-force enumeration") {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 30; ++trial) {
    PointedDag dag = random_dag(8, 0.4, rng);
    Mat pf = random_forward_policy(dag, rng);
    Vec dp = exact_terminating_distribution(dag, pf);
    Vec bf = brute_force_terminating_distribution(dag, pf);
    CHECK((dp - bf).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("perturbing one forward entry breaks FM/DB/TB but not RM") {
  PointedDag dag = diamond_dag();
  DiscreteFlow f = flow_from_backward(dag, uniform_backward(dag));
  f.pf(0, 1) += 0.01;
  f.pf(0, 2) -= 0.01;
  ResidualReport rep = check_conditions(dag, f);
  CHECK(rep.fm > 1e-3);
  CHECK(rep.db > 1e-3);
  CHECK(rep.tb > 1e-3);
  CHECK(rep.rm <= 1e-15);  // terminal row untouched
}

TEST_CASE("total backward probability reaches one for random backward kernels") {
  std::mt19937_64 rng(51);
  for (int trial = 0; trial < 30; ++trial) {
    PointedDag dag = random_dag(12, 0.3, rng);
    Mat pb = random_backward_policy(dag, rng);
    DiscreteFlow f = flow_from_backward(dag, pb);
    ResidualReport rep = check_conditions(dag, f);
    CHECK(rep.pb_total <= 1e-12);
  }
}

TEST_CASE("DAG text format round trips") {
  PointedDag dag = two_terminal_dag();
  std::string text = format_dag(dag);
  PointedDag back = parse_dag(text);
  CHECK(back.n == dag.n);
  CHECK(back.edges == dag.edges);
  CHECK((back.reward - dag.reward).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("axiom violations are rejected by name") {
  PointedDag degenerate;  // source and sink only
  degenerate.n = 2;
  degenerate.edges = {{0, 1}};
  degenerate.reward = Vec::Zero(2);
  CHECK_THROWS(validate_dag(degenerate));

  PointedDag direct = two_terminal_dag();
  direct.edges.emplace_back(0, 3);  // source -> sink
  CHECK_THROWS(validate_dag(direct));

  PointedDag cyclic = two_terminal_dag();
  cyclic.edges.emplace_back(2, 1);
  cyclic.edges.emplace_back(1, 2);
  CHECK_THROWS(validate_dag(cyclic));

  PointedDag unreachable = two_terminal_dag();
  unreachable.n = 5;  // vertex 3 becomes interior, 4 the sink, 3 disconnected
  unreachable.edges = {{0, 1}, {0, 2}, {1, 4}, {2, 4}, {3, 4}};
  unreachable.reward = Vec::Zero(5);
  unreachable.reward(1) = 1.0;
  CHECK_THROWS(validate_dag(unreachable));
}
