#include "gfn/discrete_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>

namespace gfn {

namespace {
std::vector<std::vector<int>> adjacency(const PointedDag& dag) {
  std::vector<std::vector<int>> adj(static_cast<std::size_t>(dag.n));
  for (auto [a, b] : dag.edges) adj[static_cast<std::size_t>(a)].push_back(b);
  return adj;
}

std::vector<std::vector<int>> reverse_adjacency(const PointedDag& dag) {
  std::vector<std::vector<int>> radj(static_cast<std::size_t>(dag.n));
  for (auto [a, b] : dag.edges) radj[static_cast<std::size_t>(b)].push_back(a);
  return radj;
}
}  // namespace

std::vector<int> topological_order(const PointedDag& dag) {
  auto adj = adjacency(dag);
  std::vector<int> indeg(static_cast<std::size_t>(dag.n), 0);
  for (auto [a, b] : dag.edges) ++indeg[static_cast<std::size_t>(b)];
  std::vector<int> queue, order;
  for (int v = 0; v < dag.n; ++v)
    if (indeg[static_cast<std::size_t>(v)] == 0) queue.push_back(v);
  while (!queue.empty()) {
    int v = queue.back();
    queue.pop_back();
    order.push_back(v);
    for (int w : adj[static_cast<std::size_t>(v)])
      if (--indeg[static_cast<std::size_t>(w)] == 0) queue.push_back(w);
  }
  if (static_cast<int>(order.size()) != dag.n)
    throw std::runtime_error("pointed DAG axiom violated: graph contains a cycle");
  return order;
}

void validate_dag(const PointedDag& dag) {
  if (dag.n < 3)
    throw std::runtime_error(
        "pointed DAG axiom violated: source, sink, and at least one interior state must be "
        "distinct");
  if (dag.reward.size() != dag.n) throw std::runtime_error("reward vector size mismatch");
  for (auto [a, b] : dag.edges) {
    if (a < 0 || b < 0 || a >= dag.n || b >= dag.n) throw std::runtime_error("edge out of range");
    if (b == dag.source()) throw std::runtime_error("pointed DAG axiom violated: edge into the source");
    if (a == dag.sink()) throw std::runtime_error("pointed DAG axiom violated: edge out of the sink");
    if (a == dag.source() && b == dag.sink())
      throw std::runtime_error("pointed DAG axiom violated: direct source-to-sink edge");
  }
  topological_order(dag);  // throws on cycles
  // reachability from the source
  auto adj = adjacency(dag);
  std::vector<char> reach(static_cast<std::size_t>(dag.n), 0);
  std::vector<int> stack{dag.source()};
  reach[0] = 1;
  while (!stack.empty()) {
    int v = stack.back();
    stack.pop_back();
    for (int w : adj[static_cast<std::size_t>(v)])
      if (!reach[static_cast<std::size_t>(w)]) {
        reach[static_cast<std::size_t>(w)] = 1;
        stack.push_back(w);
      }
  }
  for (int v = 0; v < dag.n; ++v)
    if (!reach[static_cast<std::size_t>(v)])
      throw std::runtime_error("pointed DAG axiom violated: state unreachable from the source");
  // co-reachability of the sink
  auto radj = reverse_adjacency(dag);
  std::vector<char> coreach(static_cast<std::size_t>(dag.n), 0);
  stack = {dag.sink()};
  coreach[static_cast<std::size_t>(dag.sink())] = 1;
  while (!stack.empty()) {
    int v = stack.back();
    stack.pop_back();
    for (int w : radj[static_cast<std::size_t>(v)])
      if (!coreach[static_cast<std::size_t>(w)]) {
        coreach[static_cast<std::size_t>(w)] = 1;
        stack.push_back(w);
      }
  }
  for (int v = 0; v < dag.n; ++v)
    if (!coreach[static_cast<std::size_t>(v)])
      throw std::runtime_error("pointed DAG axiom violated: state cannot reach the sink");
  // reward positivity on the terminating set only
  double total = 0.0;
  std::vector<char> terminating(static_cast<std::size_t>(dag.n), 0);
  for (auto [a, b] : dag.edges)
    if (b == dag.sink()) terminating[static_cast<std::size_t>(a)] = 1;
  for (int v = 0; v < dag.n; ++v) {
    double r = dag.reward(v);
    if (r < 0.0 || !std::isfinite(r)) throw std::runtime_error("reward must be finite and nonnegative");
    if (r > 0.0 && !terminating[static_cast<std::size_t>(v)])
      throw std::runtime_error("reward on a non-terminating state");
    total += r;
  }
  if (total <= 0.0) throw std::runtime_error("reward measure must be positive");
}

PointedDag parse_dag(const std::string& text) {
  PointedDag dag;
  std::istringstream in(text);
  std::string line;
  std::vector<std::pair<int, double>> rewards;
  while (std::getline(in, line)) {
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    std::istringstream ls(line);
    std::string tok;
    if (!(ls >> tok)) continue;
    if (tok == "vertices") {
      ls >> dag.n;
    } else if (tok == "edge") {
      int a, b;
      ls >> a >> b;
      dag.edges.emplace_back(a, b);
    } else if (tok == "reward") {
      int v;
      double r;
      ls >> v >> r;
      rewards.emplace_back(v, r);
    } else {
      throw std::runtime_error("unknown DAG directive: " + tok);
    }
  }
  if (dag.n <= 0) throw std::runtime_error("DAG text missing a vertices line");
  dag.reward = Vec::Zero(dag.n);
  for (auto [v, r] : rewards) {
    if (v < 0 || v >= dag.n) throw std::runtime_error("reward vertex out of range");
    dag.reward(v) = r;
  }
  validate_dag(dag);
  return dag;
}

PointedDag load_dag(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open DAG file: " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_dag(ss.str());
}

std::string format_dag(const PointedDag& dag) {
  std::ostringstream out;
  out << "vertices " << dag.n << "\n";
  for (auto [a, b] : dag.edges) out << "edge " << a << " " << b << "\n";
  out.precision(17);
  for (int v = 0; v < dag.n; ++v)
    if (dag.reward(v) != 0.0) out << "reward " << v << " " << dag.reward(v) << "\n";
  return out.str();
}

DiscreteKernels kernels_from_dag(const PointedDag& dag) {
  validate_dag(dag);
  int n = dag.n;
  DiscreteKernels K;
  K.kappa = Mat::Zero(n, n);
  for (auto [a, b] : dag.edges) K.kappa(a, b) += 1.0;
  K.kappa(dag.sink(), dag.sink()) = 1.0;
  // nu: number of trajectories from the source (topological DP)
  K.nu = Vec::Zero(n);
  K.nu(dag.source()) = 1.0;
  for (int v : topological_order(dag))
    for (int w = 0; w < n; ++w)
      if (w != v && K.kappa(v, w) > 0.0) K.nu(w) += K.nu(v) * K.kappa(v, w);
  // reverse kernel: kappab(j, i) = nu(i) kappa(i, j) / nu(j), zero row at s0
  K.kappab = Mat::Zero(n, n);
  for (int j = 0; j < n; ++j) {
    if (j == dag.source()) continue;
    for (int i = 0; i < n; ++i) K.kappab(j, i) = K.nu(i) * K.kappa(i, j) / K.nu(j);
  }
  return K;
}

DiscreteFlow flow_from_backward(const PointedDag& dag, const Mat& pb) {
  validate_dag(dag);
  int n = dag.n, src = dag.source(), snk = dag.sink();
  auto adj = adjacency(dag);
  auto order = topological_order(dag);
  DiscreteFlow f;
  f.mu = Vec::Zero(n);
  double z = dag.reward.sum();
  f.mu(snk) = z;
  // pull reward mass backward through P_B in reverse topological order
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    int s = *it;
    if (s == snk) continue;
    double m = dag.reward(s);
    for (int c : adj[static_cast<std::size_t>(s)])
      if (c != snk) m += f.mu(c) * pb(c, s);
    f.mu(s) = m;
  }
  f.z = f.mu(src);
  f.pf = Mat::Zero(n, n);
  for (int s = 0; s < n; ++s) {
    if (s == snk) continue;
    for (int c : adj[static_cast<std::size_t>(s)])
      f.pf(s, c) = (c == snk) ? dag.reward(s) / f.mu(s) : f.mu(c) * pb(c, s) / f.mu(s);
  }
  f.pb = pb;
  f.pb.row(snk).setZero();
  for (int x = 0; x < n; ++x)
    if (dag.reward(x) > 0.0) f.pb(snk, x) = dag.reward(x) / z;
  return f;
}

Vec exact_terminating_distribution(const PointedDag& dag, const Mat& pf) {
  int n = dag.n, snk = dag.sink();
  Vec reach = Vec::Zero(n);
  reach(dag.source()) = 1.0;
  auto adj = adjacency(dag);
  for (int v : topological_order(dag))
    for (int w : adj[static_cast<std::size_t>(v)])
      if (w != snk) reach(w) += reach(v) * pf(v, w);
  Vec pt = Vec::Zero(n);
  for (int x = 0; x < n; ++x)
    if (x != snk) pt(x) = reach(x) * pf(x, snk);
  return pt;
}

Vec brute_force_terminating_distribution(const PointedDag& dag, const Mat& pf) {
  int snk = dag.sink();
  auto adj = adjacency(dag);
  Vec pt = Vec::Zero(dag.n);
  std::function<void(int, double)> dfs = [&](int v, double prob) {
    for (int w : adj[static_cast<std::size_t>(v)]) {
      if (w == snk)
        pt(v) += prob * pf(v, snk);
      else
        dfs(w, prob * pf(v, w));
    }
  };
  dfs(dag.source(), 1.0);
  return pt;
}

ResidualReport check_conditions(const PointedDag& dag, const DiscreteFlow& flow) {
  int n = dag.n, src = dag.source(), snk = dag.sink();
  auto adj = adjacency(dag);
  ResidualReport rep;
  // FM: incoming flow equals mu at every non-source vertex
  for (int j = 0; j < n; ++j) {
    if (j == src) continue;
    double in = 0.0;
    for (int i = 0; i < n; ++i) in += flow.mu(i) * flow.pf(i, j);
    rep.fm = std::max(rep.fm, std::abs(in - flow.mu(j)));
  }
  // DB on interior edges; RM on terminating ones
  for (auto [a, b] : dag.edges) {
    if (b == snk)
      rep.rm = std::max(rep.rm, std::abs(flow.mu(a) * flow.pf(a, snk) - dag.reward(a)));
    else
      rep.db = std::max(rep.db, std::abs(flow.mu(a) * flow.pf(a, b) - flow.mu(b) * flow.pb(b, a)));
  }
  // TB over every complete trajectory
  std::function<void(int, double, double)> dfs = [&](int v, double prod_f, double prod_b) {
    for (int w : adj[static_cast<std::size_t>(v)]) {
      if (w == snk) {
        double lhs = flow.z * prod_f * flow.pf(v, snk);
        rep.tb = std::max(rep.tb, std::abs(lhs - dag.reward(v) * prod_b));
      } else {
        dfs(w, prod_f * flow.pf(v, w), prod_b * flow.pb(w, v));
      }
    }
  };
  dfs(src, 1.0, 1.0);
  // total backward probability of reaching the source from every state
  Vec h = Vec::Zero(n);
  h(src) = 1.0;
  auto order = topological_order(dag);
  auto radj = reverse_adjacency(dag);
  for (int v : order) {
    if (v == src) continue;
    double acc = 0.0;
    for (int p : radj[static_cast<std::size_t>(v)]) acc += flow.pb(v, p) * h(p);
    h(v) = acc;
    rep.pb_total = std::max(rep.pb_total, std::abs(h(v) - 1.0));
  }
  return rep;
}

PointedDag random_dag(int n_vertices, double edge_prob, std::mt19937_64& rng) {
  if (n_vertices < 4) throw std::runtime_error("random_dag: need at least 4 vertices");
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (;;) {
    PointedDag dag;
    dag.n = n_vertices;
    int src = 0, snk = n_vertices - 1;
    int ni = n_vertices - 2;
    std::vector<int> interior(static_cast<std::size_t>(ni));
    for (int i = 0; i < ni; ++i) interior[static_cast<std::size_t>(i)] = i + 1;
    std::shuffle(interior.begin(), interior.end(), rng);  // random topological order
    std::vector<char> has_in(static_cast<std::size_t>(dag.n), 0), has_out(static_cast<std::size_t>(dag.n), 0);
    auto add_edge = [&](int a, int b) {
      dag.edges.emplace_back(a, b);
      has_out[static_cast<std::size_t>(a)] = 1;
      has_in[static_cast<std::size_t>(b)] = 1;
    };
    for (int i = 0; i < ni; ++i) {
      if (unif(rng) < edge_prob) add_edge(src, interior[static_cast<std::size_t>(i)]);
      for (int j = i + 1; j < ni; ++j)
        if (unif(rng) < edge_prob)
          add_edge(interior[static_cast<std::size_t>(i)], interior[static_cast<std::size_t>(j)]);
      if (unif(rng) < edge_prob) add_edge(interior[static_cast<std::size_t>(i)], snk);
    }
    for (int i = 0; i < ni; ++i) {
      int v = interior[static_cast<std::size_t>(i)];
      if (!has_in[static_cast<std::size_t>(v)]) add_edge(src, v);
      if (!has_out[static_cast<std::size_t>(v)]) add_edge(v, snk);
    }
    if (!has_out[static_cast<std::size_t>(src)]) add_edge(src, interior[0]);
    dag.reward = Vec::Zero(dag.n);
    for (auto [a, b] : dag.edges)
      if (b == snk && dag.reward(a) == 0.0) dag.reward(a) = 0.1 + 1.9 * unif(rng);
    try {
      validate_dag(dag);
    } catch (const std::exception&) {
      continue;
    }
    return dag;
  }
}

namespace {
Mat random_row_policy(const PointedDag& dag, const Mat& support, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  int n = dag.n;
  Mat p = Mat::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    double total = 0.0;
    for (int j = 0; j < n; ++j)
      if (support(i, j) > 0.0) {
        p(i, j) = 0.05 + unif(rng);
        total += p(i, j);
      }
    if (total > 0.0) p.row(i) /= total;
  }
  return p;
}
}  // namespace

Mat random_backward_policy(const PointedDag& dag, std::mt19937_64& rng) {
  int n = dag.n;
  Mat support = Mat::Zero(n, n);
  for (auto [a, b] : dag.edges)
    if (b != dag.sink()) support(b, a) = 1.0;  // child row, parent column
  return random_row_policy(dag, support, rng);
}

Mat random_forward_policy(const PointedDag& dag, std::mt19937_64& rng) {
  int n = dag.n;
  Mat support = Mat::Zero(n, n);
  for (auto [a, b] : dag.edges) support(a, b) = 1.0;
  return random_row_policy(dag, support, rng);
}

}  // namespace gfn
