#include "gfn/env_euclid.hpp"

#include <cmath>

namespace gfn {

namespace {
constexpr double kLog2Pi = 1.8378770664093453;

double gauss_logpdf_iso(const Vec& x, const Vec& mean, double var) {
  double q = (x - mean).squaredNorm();
  return -0.5 * (q / var + x.size() * (kLog2Pi + std::log(var)));
}
}  // namespace

EuclidEnv::EuclidEnv(const SdeConfig& cfg) : cfg_(cfg) {
  std::mt19937_64 rng(cfg.init_seed);
  int h = cfg.hidden;
  x_spec_ = MlpSpec{{cfg.d, h, h}, Activation::LeakyRelu};
  t_spec_ = MlpSpec{{cfg.fourier_dim, h, h}, Activation::LeakyRelu};
  joint_spec_ = MlpSpec{{2 * h, h, h, cfg.d}, Activation::LeakyRelu};
  add_mlp_params(store_, x_spec_, "xnet", rng);
  add_mlp_params(store_, t_spec_, "tnet", rng);
  // zero final layer: the initial sampler is an exact Brownian walk
  add_mlp_params(store_, joint_spec_, "joint", rng, 0.0);
  store_.add_zeros("log_z", 1, 1);
}

double EuclidEnv::target_logdensity(const Vec& x) const {
  if (cfg_.target == SdeTarget::NineGaussians) {
    double m = -std::numeric_limits<double>::infinity();
    Vec comp(9);
    int k = 0;
    for (double mx : {-5.0, 0.0, 5.0})
      for (double my : {-5.0, 0.0, 5.0}) {
        Vec mu(2);
        mu << mx, my;
        comp(k) = gauss_logpdf_iso(x, mu, 1.0);
        m = std::max(m, comp(k));
        ++k;
      }
    return m + std::log((comp.array() - m).exp().sum()) - std::log(9.0);
  }
  // Neal's funnel in 10 dimensions
  double ll = -0.5 * (x(0) * x(0) / 9.0 + kLog2Pi + std::log(9.0));
  double v = std::exp(x(0));
  for (Eigen::Index i = 1; i < x.size(); ++i)
    ll += -0.5 * (x(i) * x(i) / v + kLog2Pi + x(0));
  return ll;
}

Mat EuclidEnv::drift(const Mat& x, const std::vector<int>& t) const {
  Mat tf(x.rows(), cfg_.fourier_dim);
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    tf.row(i) = fourier_time_features(static_cast<double>(t[static_cast<std::size_t>(i)]),
                                      cfg_.fourier_dim, static_cast<double>(cfg_.T));
  Mat hx = mlp_forward(store_, x_spec_, "xnet", x);
  Mat ht = mlp_forward(store_, t_spec_, "tnet", tf);
  auto act = [](Mat& m) { m = (m.array() > 0.0).select(m.array(), 0.01 * m.array()).matrix(); };
  act(hx);
  act(ht);
  Mat joint(x.rows(), hx.cols() + ht.cols());
  joint << hx, ht;
  return mlp_forward(store_, joint_spec_, "joint", joint);
}

double EuclidEnv::pf_logdensity(const Vec& xt, int t, const Vec& xnext) const {
  std::vector<int> ts{t};
  Mat mu = drift(xt.transpose(), ts);
  Vec mean = xt + mu.row(0).transpose() / cfg_.T;
  return gauss_logpdf_iso(xnext, mean, cfg_.sigma / cfg_.T);
}

double EuclidEnv::pb_logdensity(const Vec& xt, int t, const Vec& xprev) const {
  if (t == 1) return 0.0;
  double frac = static_cast<double>(t - 1) / t;
  return gauss_logpdf_iso(xprev, xt * frac, (cfg_.sigma / cfg_.T) * frac);
}

DomainSpec EuclidEnv::domain() const {
  DomainSpec d;
  if (cfg_.target == SdeTarget::NineGaussians) {
    d.lo = Vec::Constant(2, -8.0);
    d.hi = Vec::Constant(2, 8.0);
    // density peak of the equal-weight unit-covariance mixture
    d.reward_sup = (1.0 + 8.0 * std::exp(-12.5)) / (9.0 * 2.0 * M_PI);
    d.bounded = true;
  } else {
    d.lo = Vec::Constant(cfg_.d, -10.0);
    d.hi = Vec::Constant(cfg_.d, 10.0);
    d.reward_sup = 0.0;  // unbounded density: rejection sampling unsupported
    d.bounded = false;
  }
  d.torus = false;
  return d;
}

std::vector<Trajectory> EuclidEnv::rollout_batch(int n, double eps, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  int T = cfg_.T, d = cfg_.d;
  double var_model = cfg_.sigma / T;
  double var_sample = var_model + eps * eps / T;  // exploration inflates sampling only
  double sd = std::sqrt(var_sample);

  std::vector<Trajectory> out(static_cast<std::size_t>(n));
  Mat x = Mat::Zero(n, d);
  for (auto& t : out) {
    t.states.reserve(static_cast<std::size_t>(T));
    t.log_pf.reserve(static_cast<std::size_t>(T + 1));
    t.log_pb.reserve(static_cast<std::size_t>(T));
  }
  std::vector<int> steps(static_cast<std::size_t>(n));
  for (int t = 0; t < T; ++t) {
    std::fill(steps.begin(), steps.end(), t);
    Mat mu = drift(x, steps);
    Mat mean = x + mu / T;
    Mat nxt(n, d);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < d; ++j) nxt(i, j) = mean(i, j) + sd * gauss(rng);
    for (int i = 0; i < n; ++i) {
      Vec xn = nxt.row(i).transpose();
      out[static_cast<std::size_t>(i)].states.push_back(xn);
      out[static_cast<std::size_t>(i)].log_pf.push_back(
          gauss_logpdf_iso(xn, mean.row(i).transpose(), var_model));
    }
    x = nxt;
  }
  for (auto& traj : out) {
    traj.log_pf.push_back(0.0);  // deterministic step to the sink at t = T
    traj.log_pb.push_back(0.0);  // deterministic collapse to the origin at t = 1
    for (int t = 2; t <= T; ++t)
      traj.log_pb.push_back(pb_logdensity(traj.states[static_cast<std::size_t>(t - 1)], t,
                                          traj.states[static_cast<std::size_t>(t - 2)]));
    traj.log_reward = target_logdensity(traj.states.back());
    validate_trajectory(traj, T);
  }
  return out;
}

Var EuclidEnv::drift_tape(Tape& tape, const std::map<std::string, Var>& lv, const Mat& x,
                          const std::vector<int>& t) const {
  // the time branch only sees T distinct inputs: evaluate once, gather rows
  Mat tf(cfg_.T, cfg_.fourier_dim);
  for (int s = 0; s < cfg_.T; ++s)
    tf.row(s) = fourier_time_features(static_cast<double>(s), cfg_.fourier_dim,
                                      static_cast<double>(cfg_.T));
  Var ht = leaky_relu(mlp_forward(tape, lv, t_spec_, "tnet", tape.constant(tf)));
  Var ht_rows = gather_rows(ht, t);
  Var hx = leaky_relu(mlp_forward(tape, lv, x_spec_, "xnet", tape.constant(x)));
  Var joint = concat_cols(hx, ht_rows);
  return mlp_forward(tape, lv, joint_spec_, "joint", joint);
}

TrajectoryBatchTerms EuclidEnv::eval_batch(Tape& tape, const std::map<std::string, Var>& lv,
                                           const std::vector<Trajectory>& batch) {
  int K = static_cast<int>(batch.size());
  int T = cfg_.T, d = cfg_.d;
  double var_model = cfg_.sigma / T;

  Mat xs(K * T, d), xnext(K * T, d);
  std::vector<int> steps(static_cast<std::size_t>(K) * T);
  std::vector<int> seg(static_cast<std::size_t>(K) * T);
  Vec log_r(K), pb_sum(K);
  for (int k = 0; k < K; ++k) {
    const Trajectory& traj = batch[static_cast<std::size_t>(k)];
    if (traj.length() != T) throw std::runtime_error("euclid batch: trajectory length != T");
    double pb = 0.0;
    for (double v : traj.log_pb) pb += v;
    pb_sum(k) = pb;
    log_r(k) = traj.log_reward;
    for (int t = 0; t < T; ++t) {
      int row = k * T + t;
      if (t == 0)
        xs.row(row).setZero();
      else
        xs.row(row) = traj.states[static_cast<std::size_t>(t - 1)].transpose();
      xnext.row(row) = traj.states[static_cast<std::size_t>(t)].transpose();
      steps[static_cast<std::size_t>(row)] = t;
      seg[static_cast<std::size_t>(row)] = k;
    }
  }
  Var mu = drift_tape(tape, lv, xs, steps);
  Var mean = add(tape.constant(xs), mul_scalar(mu, 1.0 / T));
  Var lp = gaussian_diag_logpdf(mean, xnext, var_model);
  Var sum_pf = segment_sum(lp, seg, K);
  Var sum_pb = tape.constant(pb_sum);
  return TrajectoryBatchTerms{sum_pf, sum_pb, log_r};
}

}  // namespace gfn
