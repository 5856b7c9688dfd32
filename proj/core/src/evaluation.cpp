#include "gfn/evaluation.hpp"

#include <cmath>
#include <stdexcept>

namespace gfn {

namespace {
constexpr double kTwoPi = 2.0 * M_PI;

// 1-D Gaussian kernel matrix between samples and grid coordinates; torus mode
// adds the +-2pi images.
Mat kernel_matrix(const Vec& x, const Vec& grid, double h, bool torus) {
  Mat K(x.size(), grid.size());
  double norm = 1.0 / (std::sqrt(kTwoPi) * h);
  for (Eigen::Index a = 0; a < grid.size(); ++a) {
    Eigen::ArrayXd d = x.array() - grid(a);
    Eigen::ArrayXd k = (-0.5 * (d / h).square()).exp();
    if (torus) {
      k += (-0.5 * ((d + kTwoPi) / h).square()).exp();
      k += (-0.5 * ((d - kTwoPi) / h).square()).exp();
    }
    K.col(a) = (norm * k).matrix();
  }
  return K;
}
}  // namespace

KdeModel KdeModel::fit(const Mat& samples, bool torus) {
  if (samples.rows() < 2) throw std::runtime_error("KdeModel: need at least two samples");
  KdeModel m;
  m.samples = samples;
  m.torus = torus;
  Eigen::Index n = samples.rows(), d = samples.cols();
  double factor = std::pow(static_cast<double>(n), -1.0 / (d + 4));  // Scott's rule
  m.bandwidth.resize(d);
  for (Eigen::Index j = 0; j < d; ++j) {
    double mean = samples.col(j).mean();
    double sd = std::sqrt((samples.col(j).array() - mean).square().sum() / (n - 1));
    m.bandwidth(j) = std::max(sd, 1e-6) * factor;
  }
  return m;
}

Mat KdeModel::score_grid(const Vec& gx, const Vec& gy) const {
  if (samples.cols() != 2) throw std::runtime_error("score_grid: 2-D domains only");
  Mat kx = kernel_matrix(samples.col(0), gx, bandwidth(0), torus);
  Mat ky = kernel_matrix(samples.col(1), gy, bandwidth(1), torus);
  return (kx.transpose() * ky) / static_cast<double>(samples.rows());
}

Mat rejection_sample(const std::function<double(const Vec&)>& logdensity, const DomainSpec& dom,
                     double bound, int n, std::mt19937_64& rng) {
  if (!dom.bounded || bound <= 0.0)
    throw std::runtime_error("rejection_sample: needs a bounded domain and a density bound");
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Eigen::Index d = dom.lo.size();
  Mat out(n, d);
  double log_bound = std::log(bound);
  long proposals = 0;
  int accepted = 0;
  while (accepted < n) {
    Vec x(d);
    for (Eigen::Index j = 0; j < d; ++j) x(j) = dom.lo(j) + (dom.hi(j) - dom.lo(j)) * unif(rng);
    ++proposals;
    double lr = logdensity(x);
    if (std::isfinite(lr) && std::log(unif(rng)) < lr - log_bound) {
      out.row(accepted++) = x.transpose();
    }
    if (proposals >= 100000 && static_cast<double>(accepted) / proposals < 1e-4)
      throw std::runtime_error("rejection_sample: acceptance rate below 1e-4");
  }
  return out;
}

double jsd_from_pmfs(const Vec& p, const Vec& q) {
  if (p.size() != q.size()) throw std::runtime_error("jsd_from_pmfs: size mismatch");
  double jsd = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    double m = 0.5 * (p(i) + q(i));
    if (m == 0.0) continue;  // denormal p+q underflows; the cell contributes < 1e-323
    if (p(i) > 0.0) jsd += 0.5 * p(i) * std::log(p(i) / m);
    if (q(i) > 0.0) jsd += 0.5 * q(i) * std::log(q(i) / m);
  }
  return jsd;
}

JsdReport jsd_estimate(const Mat& samples_a, const Mat& samples_b, const DomainSpec& dom,
                       int res) {
  if (dom.lo.size() != 2) throw std::runtime_error("jsd_estimate: 2-D domains only");
  Vec gx(res), gy(res);
  for (int i = 0; i < res; ++i) {
    double f = (i + 0.5) / res;  // cell centers
    gx(i) = dom.lo(0) + f * (dom.hi(0) - dom.lo(0));
    gy(i) = dom.lo(1) + f * (dom.hi(1) - dom.lo(1));
  }
  KdeModel ka = KdeModel::fit(samples_a, dom.torus);
  KdeModel kb = KdeModel::fit(samples_b, dom.torus);
  Mat da = ka.score_grid(gx, gy);
  Mat db = kb.score_grid(gx, gy);
  Eigen::Map<Vec> pa(da.data(), da.size());
  Eigen::Map<Vec> pb(db.data(), db.size());
  Vec p = pa / pa.sum();
  Vec q = pb / pb.sum();
  JsdReport rep;
  rep.jsd = jsd_from_pmfs(p, q);
  rep.n_samples = static_cast<int>(std::min(samples_a.rows(), samples_b.rows()));
  rep.grid_res = res;
  return rep;
}

Mat model_samples(Environment& env, int n, std::mt19937_64& rng) {
  Mat out(n, env.terminal_dim());
  int done = 0;
  while (done < n) {
    int chunk = std::min(n - done, 1000);
    auto batch = env.rollout_batch(chunk, 0.0, rng);
    for (const auto& t : batch) out.row(done++) = t.states.back().transpose();
  }
  return out;
}

JsdReport jsd_vs_target(Environment& env, int n, int res, std::mt19937_64& rng) {
  DomainSpec dom = env.domain();
  Mat target = rejection_sample([&](const Vec& x) { return env.reward_logdensity(x); }, dom,
                                dom.reward_sup, n, rng);
  Mat model = model_samples(env, n, rng);
  return jsd_estimate(model, target, dom, res);
}

LogZBoundReport logz_bounds(Environment& env, int K, std::mt19937_64& rng) {
  auto batch = env.rollout_batch(K, 0.0, rng);
  std::vector<double> ratios;
  ratios.reserve(static_cast<std::size_t>(K));
  LogZBoundReport rep;
  rep.K = K;
  for (const auto& t : batch) {
    LogTerms lt = trajectory_log_terms(t);
    double r = lt.log_reward + lt.sum_log_pb - lt.sum_log_pf;
    if (std::isfinite(r))
      ratios.push_back(r);
    else
      ++rep.skipped;
  }
  if (ratios.empty()) throw std::runtime_error("logz_bounds: no finite ratios");
  rep.ratios = Eigen::Map<Vec>(ratios.data(), static_cast<Eigen::Index>(ratios.size()));
  rep.B = rep.ratios.mean();
  double m = rep.ratios.maxCoeff();
  rep.B_RW = m + std::log((rep.ratios.array() - m).exp().mean());
  return rep;
}

}  // namespace gfn
