#include <doctest.h>

#include <cmath>
#include <random>

#include "gfn/evaluation.hpp"

using namespace gfn;

namespace {
DomainSpec unit_box() {
  DomainSpec d;
  d.lo = Vec::Zero(2);
  d.hi = Vec::Ones(2);
  d.bounded = true;
  d.reward_sup = 1.0;
  return d;
}

Mat gaussian_cloud(int n, double cx, double cy, double sd, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, sd);
  Mat m(n, 2);
  for (int i = 0; i < n; ++i) {
    m(i, 0) = cx + g(rng);
    m(i, 1) = cy + g(rng);
  }
  return m;
}

// a tiny deterministic environment for the bound estimators
class StubEnv : public Environment {
 public:
  explicit StubEnv(Vec ratios) : ratios_(std::move(ratios)) { store_.add_zeros("log_z", 1, 1); }
  int max_traj_len() const override { return 1; }
  int terminal_dim() const override { return 1; }
  DomainSpec domain() const override { return unit_box(); }
  ParamStore& params() override { return store_; }
  const ParamStore& params() const override { return store_; }
  double reward_logdensity(const Vec&) const override { return 0.0; }
  std::vector<Trajectory> rollout_batch(int n, double, std::mt19937_64&) override {
    std::vector<Trajectory> out;
    for (int i = 0; i < n; ++i) {
      Trajectory t;
      t.states.push_back(Vec::Zero(1));
      // ratio = log r + sum log pb - sum log pf = ratios_(i mod size)
      t.log_pf = {-ratios_(i % ratios_.size()), 0.0};
      t.log_pb = {0.0};
      t.log_reward = 0.0;
      out.push_back(t);
    }
    return out;
  }
  TrajectoryBatchTerms eval_batch(Tape&, const std::map<std::string, Var>&,
                                  const std::vector<Trajectory>&) override {
    throw std::runtime_error("not needed");
  }

 private:
  Vec ratios_;
  ParamStore store_;
};
}  // namespace

TEST_CASE("JSD hand value for p = [1,0], q = [1/2,1/2]") {
  Vec p(2), q(2);
  p << 1.0, 0.0;
  q << 0.5, 0.5;
  CHECK(jsd_from_pmfs(p, q) == doctest::Approx(0.215762).epsilon(1e-5));
}

TEST_CASE("JSD bounds: identity and disjoint supports") {
  Vec p(2), q(2);
  p << 0.3, 0.7;
  CHECK(jsd_from_pmfs(p, p) == doctest::Approx(0.0));
  p << 1.0, 0.0;
  q << 0.0, 1.0;
  CHECK(jsd_from_pmfs(p, q) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("KDE pipeline: identical sample sets give near-zero JSD") {
  std::mt19937_64 rng(3);
  Mat s = gaussian_cloud(4000, 0.5, 0.5, 0.1, rng);
  auto rep = jsd_estimate(s, s, unit_box(), 100);
  CHECK(rep.jsd <= 0.01);
}

TEST_CASE("KDE pipeline: well-separated clouds approach log 2") {
  std::mt19937_64 rng(5);
  Mat a = gaussian_cloud(4000, 0.15, 0.15, 0.02, rng);
  Mat b = gaussian_cloud(4000, 0.85, 0.85, 0.02, rng);
  auto rep = jsd_estimate(a, b, unit_box(), 100);
  CHECK(rep.jsd >= std::log(2.0) - 0.02);
  CHECK(rep.jsd <= std::log(2.0) + 1e-9);
}

TEST_CASE("JSD estimator is symmetric in its sample sets") {
  std::mt19937_64 rng(7);
  Mat a = gaussian_cloud(3000, 0.4, 0.5, 0.08, rng);
  Mat b = gaussian_cloud(3000, 0.6, 0.5, 0.08, rng);
  auto r1 = jsd_estimate(a, b, unit_box(), 100);
  auto r2 = jsd_estimate(b, a, unit_box(), 100);
  CHECK(std::abs(r1.jsd - r2.jsd) < 0.005);
}

TEST_CASE("torus KDE is invariant to shifting samples by 2 pi") {
  std::mt19937_64 rng(9);
  DomainSpec dom;
  dom.lo = Vec::Zero(2);
  dom.hi = Vec::Constant(2, 2.0 * M_PI);
  dom.bounded = true;
  dom.torus = true;
  Mat a = gaussian_cloud(2000, 1.0, 5.0, 0.4, rng);
  Mat b = gaussian_cloud(2000, 1.1, 5.1, 0.4, rng);
  auto r1 = jsd_estimate(a, b, dom, 80);
  Mat a_shift = a;
  a_shift.col(0).array() += 2.0 * M_PI;
  auto r2 = jsd_estimate(a_shift, b, dom, 80);
  CHECK(r1.jsd == doctest::Approx(r2.jsd).epsilon(1e-9));
}

TEST_CASE("rejection sampling: uniform target accepts everything") {
  std::mt19937_64 rng(11);
  Mat s = rejection_sample([](const Vec&) { return 0.0; }, unit_box(), 1.0, 500, rng);
  CHECK(s.rows() == 500);
  CHECK(s.minCoeff() >= 0.0);
  CHECK(s.maxCoeff() <= 1.0);
}

TEST_CASE("rejection sampling reproduces Beta moments") {
  std::mt19937_64 rng(13);
  DomainSpec dom = unit_box();
  // product of Beta(2,2) marginals; mode density 1.5 each
  auto logdensity = [](const Vec& x) {
    auto lb = [](double u) { return std::log(6.0) + std::log(u) + std::log1p(-u); };
    return lb(x(0)) + lb(x(1));
  };
  int n = 40000;
  Mat s = rejection_sample(logdensity, dom, 1.5 * 1.5, n, rng);
  double mean = s.col(0).mean();
  double se = std::sqrt(0.05) / std::sqrt(static_cast<double>(n));  // var of Beta(2,2) = 1/20
  CHECK(std::abs(mean - 0.5) < 3.0 * se);
}

TEST_CASE("rejection sampling aborts on vanishing acceptance") {
  std::mt19937_64 rng(15);
  CHECK_THROWS(rejection_sample([](const Vec&) { return -50.0; }, unit_box(), 1.0, 10, rng));
}

TEST_CASE("log-partition bounds: equal ratios collapse both estimates") {
  StubEnv env(Vec::Constant(3, 0.37));
  std::mt19937_64 rng(17);
  auto rep = logz_bounds(env, 30, rng);
  CHECK(rep.B == doctest::Approx(0.37).epsilon(1e-12));
  CHECK(rep.B_RW == doctest::Approx(0.37).epsilon(1e-12));
}

TEST_CASE("log-partition bounds: Jensen ordering on mixed ratios") {
  Vec ratios(4);
  ratios << -1.0, 0.2, 0.5, 2.0;
  StubEnv env(ratios);
  std::mt19937_64 rng(19);
  auto rep = logz_bounds(env, 40, rng);
  CHECK(rep.B <= rep.B_RW);
  // against direct arithmetic
  double b = ratios.mean();
  double brw = std::log(ratios.array().exp().mean());
  CHECK(rep.B == doctest::Approx(b).epsilon(1e-12));
  CHECK(rep.B_RW == doctest::Approx(brw).epsilon(1e-12));
}
