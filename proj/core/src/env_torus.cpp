#include "gfn/env_torus.hpp"

#include <cmath>

namespace gfn {

namespace {
constexpr double kTwoPi = 2.0 * M_PI;

double wrap(double a) {
  a = std::fmod(a, kTwoPi);
  return a < 0.0 ? a + kTwoPi : a;
}

Vec softmax(const Vec& logits) {
  Vec e = (logits.array() - logits.maxCoeff()).exp();
  return e / e.sum();
}

Vec softplus_v(const Vec& x) {
  return x.unaryExpr([](double v) { return v > 30.0 ? v : std::log1p(std::exp(v)); });
}
}  // namespace

TorusEnv::TorusEnv(const TorusConfig& cfg) : cfg_(cfg) {
  std::mt19937_64 rng(cfg.init_seed);
  std::vector<int> widths{input_dim()};
  for (int l = 0; l < cfg.hidden_layers; ++l) widths.push_back(cfg.hidden);
  widths.push_back(6 * cfg.components);  // two angles x (logits, mu, kappa)
  spec_ = MlpSpec{widths, Activation::LeakyRelu};
  add_mlp_params(store_, spec_, "pf", rng);
  add_mlp_params(store_, spec_, "pb", rng);
  store_.add_zeros("log_z", 1, 1);
}

double TorusEnv::reward_logdensity(const Vec& x) const {
  double v = std::sin(3.0 * x(0)) + std::cos(2.0 * x(1)) + 2.0;
  if (v <= 0.0) return -std::numeric_limits<double>::infinity();
  return 3.0 * std::log(v);
}

Eigen::RowVectorXd TorusEnv::encode(const Vec& angles, int t) const {
  Eigen::RowVectorXd out = Eigen::RowVectorXd::Zero(input_dim());
  int F = cfg_.freqs;
  for (int k = 1; k <= F; ++k) {
    out(2 * (k - 1)) = std::sin(k * angles(0));
    out(2 * (k - 1) + 1) = std::cos(k * angles(0));
    out(2 * F + 2 * (k - 1)) = std::sin(k * angles(1));
    out(2 * F + 2 * (k - 1) + 1) = std::cos(k * angles(1));
  }
  out(4 * F + t) = 1.0;
  return out;
}

Mat TorusEnv::net_raw(const std::string& prefix, const Mat& inputs) const {
  return mlp_forward(store_, spec_, prefix, inputs);
}

TorusEnv::PolicyHeads TorusEnv::heads_from_row(const Mat& row) const {
  int C = cfg_.components;
  PolicyHeads h;
  auto fill = [&](VonMisesMixtureParams& p, int off) {
    p.weights = softmax(row.row(0).segment(off, C).transpose());
    p.mu = row.row(0).segment(off + C, C).transpose();
    p.kappa = softplus_v(row.row(0).segment(off + 2 * C, C).transpose());
  };
  fill(h.psi, 0);
  fill(h.phi, 3 * C);
  return h;
}

TorusEnv::PolicyHeads TorusEnv::forward_heads(const Vec& angles, int t) const {
  return heads_from_row(net_raw("pf", encode(angles, t)));
}

TorusEnv::PolicyHeads TorusEnv::backward_heads(const Vec& angles, int t) const {
  return heads_from_row(net_raw("pb", encode(angles, t)));
}

double TorusEnv::forward_logdensity(const Vec& s, int t, const Vec& next) const {
  PolicyHeads h = forward_heads(s, t);
  return log_density(h.psi, next(0)) + log_density(h.phi, next(1));
}

double TorusEnv::backward_logdensity(const Vec& next, int t_next, const Vec& prev) const {
  if (t_next <= 1) return 0.0;  // deterministic move to s0
  PolicyHeads h = backward_heads(next, t_next);
  return log_density(h.psi, prev(0)) + log_density(h.phi, prev(1));
}

DomainSpec TorusEnv::domain() const {
  DomainSpec d;
  d.lo = Vec::Zero(2);
  d.hi = Vec::Constant(2, kTwoPi);
  d.torus = true;
  d.reward_sup = 64.0;
  d.bounded = true;
  return d;
}

std::vector<Trajectory> TorusEnv::rollout_batch(int n, double eps, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<Trajectory> out(static_cast<std::size_t>(n));
  Mat inputs(n, input_dim());
  Mat cur = Mat::Zero(n, 2);
  for (int t = 0; t < cfg_.T; ++t) {
    for (int i = 0; i < n; ++i) inputs.row(i) = encode(cur.row(i).transpose(), t);
    Mat raw = net_raw("pf", inputs);
    for (int i = 0; i < n; ++i) {
      PolicyHeads h = heads_from_row(raw.row(i));
      double psi, phi;
      if (eps > 0.0 && unif(rng) < eps) {
        psi = kTwoPi * unif(rng);
        phi = kTwoPi * unif(rng);
      } else {
        psi = wrap(sample(h.psi, rng));
        phi = wrap(sample(h.phi, rng));
      }
      Vec nxt(2);
      nxt << psi, phi;
      out[static_cast<std::size_t>(i)].states.push_back(nxt);
      out[static_cast<std::size_t>(i)].log_pf.push_back(log_density(h.psi, psi) +
                                                        log_density(h.phi, phi));
      cur.row(i) = nxt.transpose();
    }
  }
  for (auto& traj : out) {
    traj.log_pf.push_back(0.0);  // deterministic termination at t = T
    traj.log_pb.push_back(0.0);
    for (int t = 2; t <= cfg_.T; ++t)
      traj.log_pb.push_back(backward_logdensity(traj.states[static_cast<std::size_t>(t - 1)], t,
                                                traj.states[static_cast<std::size_t>(t - 2)]));
    traj.log_reward = reward_logdensity(traj.states.back());
    validate_trajectory(traj, cfg_.T);
  }
  return out;
}

Var TorusEnv::policy_logpdf_tape(Tape& tape, const std::map<std::string, Var>& lv,
                                 const std::string& prefix, const Mat& inputs,
                                 const Mat& targets) const {
  int C = cfg_.components;
  Var raw = mlp_forward(tape, lv, spec_, prefix, tape.constant(inputs));
  auto angle_lp = [&](int off, const Vec& x) {
    Var logw = log_softmax_rows(slice_cols(raw, off, C));
    Var mu = slice_cols(raw, off + C, C);
    Var kappa = softplus(slice_cols(raw, off + 2 * C, C));
    return vonmises_mixture_logpdf(logw, mu, kappa, x);
  };
  return add(angle_lp(0, targets.col(0)), angle_lp(3 * C, targets.col(1)));
}

TrajectoryBatchTerms TorusEnv::eval_batch(Tape& tape, const std::map<std::string, Var>& lv,
                                          const std::vector<Trajectory>& batch) {
  int K = static_cast<int>(batch.size());
  int T = cfg_.T;
  Mat f_in(K * T, input_dim()), f_tgt(K * T, 2);
  Mat b_in(K * (T - 1), input_dim()), b_tgt(K * (T - 1), 2);
  std::vector<int> f_seg(static_cast<std::size_t>(K) * T), b_seg(static_cast<std::size_t>(K) * (T - 1));
  Vec log_r(K);
  for (int k = 0; k < K; ++k) {
    const Trajectory& traj = batch[static_cast<std::size_t>(k)];
    if (traj.length() != T) throw std::runtime_error("torus batch: trajectory length != T");
    log_r(k) = traj.log_reward;
    for (int t = 0; t < T; ++t) {
      int row = k * T + t;
      Vec prev = (t == 0) ? Vec::Zero(2) : traj.states[static_cast<std::size_t>(t - 1)];
      f_in.row(row) = encode(prev, t);
      f_tgt.row(row) = traj.states[static_cast<std::size_t>(t)].transpose();
      f_seg[static_cast<std::size_t>(row)] = k;
    }
    for (int t = 2; t <= T; ++t) {
      int row = k * (T - 1) + (t - 2);
      b_in.row(row) = encode(traj.states[static_cast<std::size_t>(t - 1)], t);
      b_tgt.row(row) = traj.states[static_cast<std::size_t>(t - 2)].transpose();
      b_seg[static_cast<std::size_t>(row)] = k;
    }
  }
  Var sum_pf = segment_sum(policy_logpdf_tape(tape, lv, "pf", f_in, f_tgt), f_seg, K);
  Var sum_pb = segment_sum(policy_logpdf_tape(tape, lv, "pb", b_in, b_tgt), b_seg, K);
  return TrajectoryBatchTerms{sum_pf, sum_pb, log_r};
}

}  // namespace gfn
