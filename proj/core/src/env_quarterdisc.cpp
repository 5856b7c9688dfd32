#include "gfn/env_quarterdisc.hpp"

#include <cmath>
#include <limits>

namespace gfn {

namespace {
constexpr double kHalfPi = 0.5 * M_PI;

double clamp01(double v) { return std::min(1.0, std::max(0.0, v)); }

Vec softmax(const Vec& logits) {
  Vec e = (logits.array() - logits.maxCoeff()).exp();
  return e / e.sum();
}

double sigmoid_s(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Vec concentration(const Vec& raw) {
  // clamp to [0.1, 5.1]
  return (0.1 + 5.0 * (1.0 / (1.0 + (-raw.array()).exp()))).matrix();
}
}  // namespace

QuarterDiscEnv::QuarterDiscEnv(const GridConfig& cfg) : cfg_(cfg) {
  std::mt19937_64 rng(cfg.init_seed);
  int K = cfg.source_components;
  store_.add("s0.r_logits", 1, K, 0.01, rng);
  store_.add("s0.r_a", 1, K, 0.5, rng);
  store_.add("s0.r_b", 1, K, 0.5, rng);
  store_.add("s0.th_logits", 1, K, 0.01, rng);
  store_.add("s0.th_a", 1, K, 0.5, rng);
  store_.add("s0.th_b", 1, K, 0.5, rng);

  std::vector<int> widths{2};
  for (int l = 0; l < cfg.hidden_layers; ++l) widths.push_back(cfg.hidden);
  trunk_spec_ = MlpSpec{widths, Activation::LeakyRelu};
  add_mlp_params(store_, trunk_spec_, "trunk", rng, std::sqrt(2.0 / cfg.hidden));

  int A = cfg.angle_components;
  store_.add("head_pf.W", cfg.hidden, 3 * A + 1, 0.01, rng);
  store_.add_zeros("head_pf.b", 1, 3 * A + 1);
  if (cfg.learned_pb) {
    store_.add("head_pb.W", cfg.hidden, 3 * A, 0.01, rng);
    store_.add_zeros("head_pb.b", 1, 3 * A);
  }
  store_.add("head_u.W", cfg.hidden, 1, 0.01, rng);
  store_.add_zeros("head_u.b", 1, 1);
  store_.add_zeros("logu_s0", 1, 1);
  store_.add_zeros("log_z", 1, 1, 1.0);
}

AngleInterval QuarterDiscEnv::forward_interval(const Vec& s) const {
  double rho = cfg_.rho;
  double lo = std::acos(clamp01((1.0 - s(0)) / rho));
  double hi = std::asin(clamp01((1.0 - s(1)) / rho));
  return {lo, hi};
}

AngleInterval QuarterDiscEnv::backward_interval(const Vec& s) const {
  double rho = cfg_.rho;
  double lo = std::acos(clamp01(s(0) / rho));
  double hi = std::asin(clamp01(s(1) / rho));
  return {lo, hi};
}

double QuarterDiscEnv::reward_logdensity(const Vec& x) const {
  // tol guards the open/closed interval boundaries against fp wobble
  constexpr double tol = 1e-12;
  // the terminal space is the unit quarter disc: no chain of rho-steps from
  // the source can land past norm 1, so the target carries no mass there
  if (x.norm() > 1.0 + 1e-9 || x.minCoeff() < -1e-9)
    return -std::numeric_limits<double>::infinity();
  double a1 = std::abs(x(0) - 0.5), a2 = std::abs(x(1) - 0.5);
  double r = 0.1;
  if (a1 > 0.25 + tol && a1 <= 0.5 + tol && a2 > 0.25 + tol && a2 <= 0.5 + tol) r += 0.5;
  if (a1 > 0.3 + tol && a1 < 0.4 - tol && a2 > 0.3 + tol && a2 < 0.4 - tol) r += 2.0;
  return std::log(r);
}

int QuarterDiscEnv::max_traj_len() const {
  return 1 + static_cast<int>(std::ceil(std::sqrt(2.0) / cfg_.rho));
}

DomainSpec QuarterDiscEnv::domain() const {
  DomainSpec d;
  d.lo = Vec::Zero(2);
  d.hi = Vec::Ones(2);
  d.torus = false;
  d.reward_sup = 2.6;
  d.bounded = true;
  return d;
}

Mat QuarterDiscEnv::net_raw(const Mat& states) const {
  Mat h = mlp_forward(store_, trunk_spec_, "trunk", states);
  h = (h.array() > 0.0).select(h.array(), 0.01 * h.array()).matrix();
  int A = cfg_.angle_components;
  int cols = 3 * A + 1 + (cfg_.learned_pb ? 3 * A : 0) + 1;
  Mat out(states.rows(), cols);
  Mat pf = h * store_.at("head_pf.W");
  pf.rowwise() += store_.at("head_pf.b").row(0);
  out.leftCols(3 * A + 1) = pf;
  int off = 3 * A + 1;
  if (cfg_.learned_pb) {
    Mat pb = h * store_.at("head_pb.W");
    pb.rowwise() += store_.at("head_pb.b").row(0);
    out.middleCols(off, 3 * A) = pb;
    off += 3 * A;
  }
  Mat u = h * store_.at("head_u.W");
  u.rowwise() += store_.at("head_u.b").row(0);
  out.col(off) = u;
  return out;
}

QuarterDiscEnv::SourceHeads QuarterDiscEnv::source_heads() const {
  SourceHeads sh;
  sh.radius.weights = softmax(store_.at("s0.r_logits").row(0).transpose());
  sh.radius.alpha = concentration(store_.at("s0.r_a").row(0).transpose());
  sh.radius.beta = concentration(store_.at("s0.r_b").row(0).transpose());
  sh.radius.lo = 0.0;
  sh.radius.hi = cfg_.rho;
  sh.angle.weights = softmax(store_.at("s0.th_logits").row(0).transpose());
  sh.angle.alpha = concentration(store_.at("s0.th_a").row(0).transpose());
  sh.angle.beta = concentration(store_.at("s0.th_b").row(0).transpose());
  sh.angle.lo = 0.0;
  sh.angle.hi = kHalfPi;
  return sh;
}

QuarterDiscEnv::ForwardHeads QuarterDiscEnv::forward_heads(const Vec& s) const {
  ForwardHeads fh;
  AngleInterval iv = forward_interval(s);
  if (forced_termination(s) || iv.empty()) {
    fh.p_term = 1.0;
    fh.forced = true;
    return fh;
  }
  Mat row = net_raw(s.transpose());
  int A = cfg_.angle_components;
  fh.p_term = sigmoid_s(row(0, 3 * A));
  fh.angle.weights = softmax(row.row(0).segment(0, A).transpose());
  fh.angle.alpha = concentration(row.row(0).segment(A, A).transpose());
  fh.angle.beta = concentration(row.row(0).segment(2 * A, A).transpose());
  fh.angle.lo = iv.lo;
  fh.angle.hi = iv.hi;
  fh.forced = false;
  return fh;
}

BetaMixtureParams QuarterDiscEnv::backward_heads(const Vec& s) const {
  AngleInterval iv = backward_interval(s);
  BetaMixtureParams p;
  int A = cfg_.angle_components;
  if (cfg_.learned_pb) {
    Mat row = net_raw(s.transpose());
    int off = 3 * A + 1;
    p.weights = softmax(row.row(0).segment(off, A).transpose());
    p.alpha = concentration(row.row(0).segment(off + A, A).transpose());
    p.beta = concentration(row.row(0).segment(off + 2 * A, A).transpose());
  } else {
    p.weights = Vec::Ones(1);
    p.alpha = Vec::Ones(1);
    p.beta = Vec::Ones(1);
  }
  p.lo = iv.lo;
  p.hi = iv.hi;
  return p;
}

double QuarterDiscEnv::forward_logdensity(const Vec& s, const Vec& next, bool from_source) const {
  if (from_source) {
    SourceHeads sh = source_heads();
    double r = next.norm();
    double th = std::atan2(next(1), next(0));
    return log_density(sh.radius, r) + log_density(sh.angle, th) - std::log(r);
  }
  ForwardHeads fh = forward_heads(s);
  if (fh.forced) return -std::numeric_limits<double>::infinity();
  Vec d = next - s;
  double th = std::atan2(d(1), d(0));
  return std::log1p(-fh.p_term) + log_density(fh.angle, th) - std::log(cfg_.rho);
}

double QuarterDiscEnv::termination_logprob(const Vec& s) const {
  ForwardHeads fh = forward_heads(s);
  return std::log(fh.p_term);
}

double QuarterDiscEnv::backward_logdensity(const Vec& next, const Vec& prev) const {
  if (parent_is_source(next)) return 0.0;  // deterministic move to s0
  BetaMixtureParams p = backward_heads(next);
  Vec d = next - prev;
  double th = std::atan2(d(1), d(0));
  return log_density(p, th) - std::log(cfg_.rho);
}

std::vector<Trajectory> QuarterDiscEnv::rollout_batch(int n, double eps, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<Trajectory> out(static_cast<std::size_t>(n));
  SourceHeads sh = source_heads();
  int max_len = max_traj_len();

  for (auto& traj : out) {
    // first step from the source
    double r, th;
    if (eps > 0.0 && unif(rng) < eps) {
      r = cfg_.rho * std::sqrt(unif(rng));  // uniform on the quarter disc
      th = kHalfPi * unif(rng);
    } else {
      r = sample(sh.radius, rng);
      th = sample(sh.angle, rng);
    }
    Vec s(2);
    s << r * std::cos(th), r * std::sin(th);
    traj.states.push_back(s);
    traj.log_pf.push_back(log_density(sh.radius, r) + log_density(sh.angle, th) - std::log(r));

    // interior steps
    while (true) {
      ForwardHeads fh = forward_heads(traj.states.back());
      if (fh.forced) {
        traj.log_pf.push_back(0.0);
        break;
      }
      double p_sample = fh.p_term;
      if (eps > 0.0) p_sample = (1.0 - eps) * fh.p_term + eps * 0.5;
      if (unif(rng) < p_sample) {
        traj.log_pf.push_back(std::log(fh.p_term));
        break;
      }
      double a;
      if (eps > 0.0 && unif(rng) < eps)
        a = fh.angle.lo + (fh.angle.hi - fh.angle.lo) * unif(rng);
      else
        a = sample(fh.angle, rng);
      Vec nxt = traj.states.back();
      nxt(0) += cfg_.rho * std::cos(a);
      nxt(1) += cfg_.rho * std::sin(a);
      traj.log_pf.push_back(std::log1p(-fh.p_term) + log_density(fh.angle, a) -
                            std::log(cfg_.rho));
      traj.states.push_back(nxt);
    }

    // backward terms along the realized states
    traj.log_pb.push_back(0.0);  // s1 -> s0 is deterministic
    for (int t = 1; t < traj.length(); ++t)
      traj.log_pb.push_back(backward_logdensity(traj.states[t], traj.states[t - 1]));
    traj.log_reward = reward_logdensity(traj.states.back());
    validate_trajectory(traj, max_len);
  }
  return out;
}

// ---- tape-side evaluation ----

struct QuarterDiscEnv::NetOut {
  Var pf_logw, pf_a, pf_b;     // n x A
  Var log_pterm, log_1mpterm;  // n x 1
  Var pb_logw, pb_a, pb_b;     // n x A (learned mode only)
  Var log_u;                   // n x 1
};

QuarterDiscEnv::NetOut QuarterDiscEnv::net_heads(Tape& tape, const std::map<std::string, Var>& lv,
                                                 const Mat& states) const {
  Var in = tape.constant(states);
  Var h = leaky_relu(mlp_forward(tape, lv, trunk_spec_, "trunk", in));
  int A = cfg_.angle_components;
  NetOut o;
  Var pf = add_rowvec(matmul(h, lv.at("head_pf.W")), lv.at("head_pf.b"));
  o.pf_logw = log_softmax_rows(slice_cols(pf, 0, A));
  o.pf_a = add_scalar(mul_scalar(sigmoid(slice_cols(pf, A, A)), 5.0), 0.1);
  o.pf_b = add_scalar(mul_scalar(sigmoid(slice_cols(pf, 2 * A, A)), 5.0), 0.1);
  Var tl = slice_cols(pf, 3 * A, 1);
  o.log_pterm = neg(softplus(neg(tl)));
  o.log_1mpterm = neg(softplus(tl));
  if (cfg_.learned_pb) {
    Var pb = add_rowvec(matmul(h, lv.at("head_pb.W")), lv.at("head_pb.b"));
    o.pb_logw = log_softmax_rows(slice_cols(pb, 0, A));
    o.pb_a = add_scalar(mul_scalar(sigmoid(slice_cols(pb, A, A)), 5.0), 0.1);
    o.pb_b = add_scalar(mul_scalar(sigmoid(slice_cols(pb, 2 * A, A)), 5.0), 0.1);
  }
  o.log_u = add_rowvec(matmul(h, lv.at("head_u.W")), lv.at("head_u.b"));
  return o;
}

namespace {

// Row bookkeeping shared by the TB/DB/FM builders.
struct GridLayout {
  int K = 0;
  Vec r0, th0;                  // first-step polar coords, K
  Mat states;                   // all interior states s_1..s_n, R x 2
  std::vector<int> traj;        // R
  std::vector<int> state_row_of_traj_first;  // K: row of s_1
  std::vector<char> is_terminal;             // row is s_n
  std::vector<char> forced;                  // forced termination at that s_n
  // continue transitions t = 1..n-1: indices into rows
  std::vector<int> from_row, to_row;
  Vec cont_theta;  // realized angle per continue transition
  Vec log_r;       // K
};

GridLayout build_layout(const QuarterDiscEnv& env, const std::vector<Trajectory>& batch) {
  GridLayout L;
  L.K = static_cast<int>(batch.size());
  L.r0.resize(L.K);
  L.th0.resize(L.K);
  L.log_r.resize(L.K);
  int rows = 0;
  for (const auto& t : batch) rows += t.length();
  L.states.resize(rows, 2);
  int row = 0;
  std::vector<double> cont_theta;
  for (int k = 0; k < L.K; ++k) {
    const Trajectory& t = batch[static_cast<std::size_t>(k)];
    L.r0(k) = t.states[0].norm();
    L.th0(k) = std::atan2(t.states[0](1), t.states[0](0));
    L.log_r(k) = t.log_reward;
    L.state_row_of_traj_first.push_back(row);
    for (int i = 0; i < t.length(); ++i) {
      L.states.row(row) = t.states[static_cast<std::size_t>(i)].transpose();
      L.traj.push_back(k);
      bool terminal = (i + 1 == t.length());
      L.is_terminal.push_back(terminal ? 1 : 0);
      L.forced.push_back(terminal && env.forced_termination(t.states[static_cast<std::size_t>(i)])
                             ? 1
                             : 0);
      if (!terminal) {
        L.from_row.push_back(row);
        L.to_row.push_back(row + 1);
        Vec d = t.states[static_cast<std::size_t>(i + 1)] - t.states[static_cast<std::size_t>(i)];
        cont_theta.push_back(std::atan2(d(1), d(0)));
      }
      ++row;
    }
  }
  L.cont_theta = Eigen::Map<Vec>(cont_theta.data(), static_cast<Eigen::Index>(cont_theta.size()));
  return L;
}

}  // namespace

TrajectoryBatchTerms QuarterDiscEnv::eval_batch(Tape& tape, const std::map<std::string, Var>& lv,
                                                const std::vector<Trajectory>& batch) {
  GridLayout L = build_layout(*this, batch);
  int A = cfg_.angle_components;
  NetOut net = net_heads(tape, lv, L.states);

  // first step: radius and angle Beta mixtures with the polar Jacobian
  std::vector<int> zeros(static_cast<std::size_t>(L.K), 0);
  auto rep = [&](const char* name) { return gather_rows(lv.at(name), zeros); };
  Var r_logw = log_softmax_rows(rep("s0.r_logits"));
  Var r_a = add_scalar(mul_scalar(sigmoid(rep("s0.r_a")), 5.0), 0.1);
  Var r_b = add_scalar(mul_scalar(sigmoid(rep("s0.r_b")), 5.0), 0.1);
  Var th_logw = log_softmax_rows(rep("s0.th_logits"));
  Var th_a = add_scalar(mul_scalar(sigmoid(rep("s0.th_a")), 5.0), 0.1);
  Var th_b = add_scalar(mul_scalar(sigmoid(rep("s0.th_b")), 5.0), 0.1);
  Var lp_r = beta_mixture_logpdf(r_logw, r_a, r_b, L.r0, 0.0, cfg_.rho);
  Var lp_th = beta_mixture_logpdf(th_logw, th_a, th_b, L.th0, 0.0, kHalfPi);
  Var first = add(add(lp_r, lp_th), tape.constant((-L.r0.array().log()).matrix()));

  int R = static_cast<int>(L.traj.size());
  // per-row forward contribution
  // continue transitions: log(1-pterm) at from_row + angle pdf - log rho
  Var lp_cont = Var{};
  int M = static_cast<int>(L.from_row.size());
  Var sum_pf = first;
  if (M > 0) {
    Var logw_f = gather_rows(net.pf_logw, L.from_row);
    Var a_f = gather_rows(net.pf_a, L.from_row);
    Var b_f = gather_rows(net.pf_b, L.from_row);
    Var pdf = beta_mixture_logpdf(logw_f, a_f, b_f, L.cont_theta, 0.0, kHalfPi);
    Var keep = gather_rows(net.log_1mpterm, L.from_row);
    lp_cont = add_scalar(add(pdf, keep), -std::log(cfg_.rho));
    std::vector<int> seg(static_cast<std::size_t>(M));
    for (int i = 0; i < M; ++i) seg[static_cast<std::size_t>(i)] = L.traj[static_cast<std::size_t>(L.from_row[static_cast<std::size_t>(i)])];
    sum_pf = add(sum_pf, segment_sum(lp_cont, seg, L.K));
  }
  // termination rows: forced -> 0, else log pterm
  {
    Mat mask(R, 1);
    for (int i = 0; i < R; ++i)
      mask(i, 0) = (L.is_terminal[static_cast<std::size_t>(i)] && !L.forced[static_cast<std::size_t>(i)]) ? 1.0 : 0.0;
    Var term = mul_mat(net.log_pterm, mask);
    sum_pf = add(sum_pf, segment_sum(term, L.traj, L.K));
  }

  // backward: transitions into rows s_2..s_n (to_row entries)
  Var sum_pb;
  if (M > 0) {
    Vec thmin(M), thmax(M);
    for (int i = 0; i < M; ++i) {
      AngleInterval iv = backward_interval(L.states.row(L.to_row[static_cast<std::size_t>(i)]).transpose());
      thmin(i) = iv.lo;
      thmax(i) = iv.hi;
    }
    Var lp_b = Var{};
    if (cfg_.learned_pb) {
      Var logw_b = gather_rows(net.pb_logw, L.to_row);
      Var a_b = gather_rows(net.pb_a, L.to_row);
      Var b_b = gather_rows(net.pb_b, L.to_row);
      lp_b = add_scalar(beta_mixture_logpdf(logw_b, a_b, b_b, L.cont_theta, thmin, thmax),
                        -std::log(cfg_.rho));
    } else {
      Mat c(M, 1);
      for (int i = 0; i < M; ++i) c(i, 0) = -std::log((thmax(i) - thmin(i)) * cfg_.rho);
      lp_b = tape.constant(c);
    }
    std::vector<int> seg(static_cast<std::size_t>(M));
    for (int i = 0; i < M; ++i) seg[static_cast<std::size_t>(i)] = L.traj[static_cast<std::size_t>(L.to_row[static_cast<std::size_t>(i)])];
    sum_pb = segment_sum(lp_b, seg, L.K);
  } else {
    sum_pb = tape.constant(Mat::Zero(L.K, 1));
  }

  return TrajectoryBatchTerms{sum_pf, sum_pb, L.log_r};
}

Var QuarterDiscEnv::db_rm_loss(Tape& tape, const std::map<std::string, Var>& lv,
                               const std::vector<Trajectory>& batch, double alpha) {
  GridLayout L = build_layout(*this, batch);
  int M = static_cast<int>(L.from_row.size());
  NetOut net = net_heads(tape, lv, L.states);

  // first-step pair (s0, s1)
  std::vector<int> zeros(static_cast<std::size_t>(L.K), 0);
  auto rep = [&](const char* name) { return gather_rows(lv.at(name), zeros); };
  Var r_logw = log_softmax_rows(rep("s0.r_logits"));
  Var r_a = add_scalar(mul_scalar(sigmoid(rep("s0.r_a")), 5.0), 0.1);
  Var r_b = add_scalar(mul_scalar(sigmoid(rep("s0.r_b")), 5.0), 0.1);
  Var th_logw = log_softmax_rows(rep("s0.th_logits"));
  Var th_a = add_scalar(mul_scalar(sigmoid(rep("s0.th_a")), 5.0), 0.1);
  Var th_b = add_scalar(mul_scalar(sigmoid(rep("s0.th_b")), 5.0), 0.1);
  Var lp_first = add(add(beta_mixture_logpdf(r_logw, r_a, r_b, L.r0, 0.0, cfg_.rho),
                         beta_mixture_logpdf(th_logw, th_a, th_b, L.th0, 0.0, kHalfPi)),
                     tape.constant((-L.r0.array().log()).matrix()));
  Var logu_s0 = gather_rows(lv.at("logu_s0"), zeros);
  Var logu_s1 = gather_rows(net.log_u, L.state_row_of_traj_first);
  // p_B(s1, s0) = 1
  Var res_first = square(sub(add(logu_s0, lp_first), logu_s1));
  std::vector<int> seg_first(static_cast<std::size_t>(L.K));
  for (int k = 0; k < L.K; ++k) seg_first[static_cast<std::size_t>(k)] = k;
  Var acc = segment_sum(res_first, seg_first, L.K);

  // interior pairs
  if (M > 0) {
    Var logw_f = gather_rows(net.pf_logw, L.from_row);
    Var a_f = gather_rows(net.pf_a, L.from_row);
    Var b_f = gather_rows(net.pf_b, L.from_row);
    Var pdf = beta_mixture_logpdf(logw_f, a_f, b_f, L.cont_theta, 0.0, kHalfPi);
    Var lp_cont = add_scalar(add(pdf, gather_rows(net.log_1mpterm, L.from_row)),
                             -std::log(cfg_.rho));
    Vec thmin(M), thmax(M);
    for (int i = 0; i < M; ++i) {
      AngleInterval iv = backward_interval(L.states.row(L.to_row[static_cast<std::size_t>(i)]).transpose());
      thmin(i) = iv.lo;
      thmax(i) = iv.hi;
    }
    Var lp_b;
    if (cfg_.learned_pb) {
      lp_b = add_scalar(beta_mixture_logpdf(gather_rows(net.pb_logw, L.to_row),
                                            gather_rows(net.pb_a, L.to_row),
                                            gather_rows(net.pb_b, L.to_row), L.cont_theta,
                                            thmin, thmax),
                        -std::log(cfg_.rho));
    } else {
      Mat c(M, 1);
      for (int i = 0; i < M; ++i) c(i, 0) = -std::log((thmax(i) - thmin(i)) * cfg_.rho);
      lp_b = tape.constant(c);
    }
    Var u_from = gather_rows(net.log_u, L.from_row);
    Var u_to = gather_rows(net.log_u, L.to_row);
    Var res = square(sub(add(u_from, lp_cont), add(u_to, lp_b)));
    std::vector<int> seg(static_cast<std::size_t>(M));
    for (int i = 0; i < M; ++i) seg[static_cast<std::size_t>(i)] = L.traj[static_cast<std::size_t>(L.from_row[static_cast<std::size_t>(i)])];
    acc = add(acc, segment_sum(res, seg, L.K));
  }

  // reward matching at the terminal state
  int R = static_cast<int>(L.traj.size());
  std::vector<int> term_rows;
  for (int i = 0; i < R; ++i)
    if (L.is_terminal[static_cast<std::size_t>(i)]) term_rows.push_back(i);
  Mat free_mask(static_cast<Eigen::Index>(term_rows.size()), 1);
  for (std::size_t i = 0; i < term_rows.size(); ++i)
    free_mask(static_cast<Eigen::Index>(i), 0) = L.forced[static_cast<std::size_t>(term_rows[i])] ? 0.0 : 1.0;
  Var u_term = gather_rows(net.log_u, term_rows);
  Var lp_term = mul_mat(gather_rows(net.log_pterm, term_rows), free_mask);
  Var rm = square(sub(add(u_term, lp_term), tape.constant(L.log_r)));
  acc = add(acc, mul_scalar(rm, alpha));
  return mean_all(acc);
}

Var QuarterDiscEnv::fm_rm_loss(Tape& tape, const std::map<std::string, Var>& lv,
                               const std::vector<Trajectory>& batch, double alpha,
                               int quad_nodes) {
  GridLayout L = build_layout(*this, batch);
  int R = static_cast<int>(L.traj.size());
  NetOut net = net_heads(tape, lv, L.states);

  // split rows: parent is s0 (norm < rho) vs arc parents
  std::vector<int> src_rows, arc_rows;
  for (int i = 0; i < R; ++i) {
    Vec s = L.states.row(i).transpose();
    if (parent_is_source(s))
      src_rows.push_back(i);
    else
      arc_rows.push_back(i);
  }

  Var acc = tape.constant(Mat::Zero(L.K, 1));
  std::vector<int> zeros1(src_rows.size(), 0);

  if (!src_rows.empty()) {
    // single-parent deterministic backward support: integral = u(s0) p_F(s0, s')
    Vec r0(static_cast<Eigen::Index>(src_rows.size())), th0(static_cast<Eigen::Index>(src_rows.size()));
    for (std::size_t i = 0; i < src_rows.size(); ++i) {
      Vec s = L.states.row(src_rows[i]).transpose();
      r0(static_cast<Eigen::Index>(i)) = s.norm();
      th0(static_cast<Eigen::Index>(i)) = std::atan2(s(1), s(0));
    }
    auto rep = [&](const char* name) { return gather_rows(lv.at(name), zeros1); };
    Var lp = add(add(beta_mixture_logpdf(log_softmax_rows(rep("s0.r_logits")),
                                         add_scalar(mul_scalar(sigmoid(rep("s0.r_a")), 5.0), 0.1),
                                         add_scalar(mul_scalar(sigmoid(rep("s0.r_b")), 5.0), 0.1),
                                         r0, 0.0, cfg_.rho),
                     beta_mixture_logpdf(log_softmax_rows(rep("s0.th_logits")),
                                         add_scalar(mul_scalar(sigmoid(rep("s0.th_a")), 5.0), 0.1),
                                         add_scalar(mul_scalar(sigmoid(rep("s0.th_b")), 5.0), 0.1),
                                         th0, 0.0, kHalfPi)),
                 tape.constant((-r0.array().log()).matrix()));
    Var res = square(sub(add(gather_rows(lv.at("logu_s0"), zeros1), lp),
                         gather_rows(net.log_u, src_rows)));
    std::vector<int> seg(src_rows.size());
    for (std::size_t i = 0; i < src_rows.size(); ++i) seg[i] = L.traj[static_cast<std::size_t>(src_rows[i])];
    acc = add(acc, segment_sum(res, seg, L.K));
  }

  if (!arc_rows.empty()) {
    int S = static_cast<int>(arc_rows.size());
    int Q = quad_nodes;
    Mat parents(S * Q, 2);
    Vec theta(S * Q);
    Mat wmask(S * Q, 1);
    std::vector<int> pseg(static_cast<std::size_t>(S) * Q);
    Vec base_nodes, base_weights;
    for (int i = 0; i < S; ++i) {
      Vec s = L.states.row(arc_rows[static_cast<std::size_t>(i)]).transpose();
      AngleInterval iv = backward_interval(s);
      gauss_legendre(Q, iv.lo, iv.hi, base_nodes, base_weights);
      for (int j = 0; j < Q; ++j) {
        int idx = i * Q + j;
        double th = base_nodes(j);
        Vec p(2);
        p << s(0) - cfg_.rho * std::cos(th), s(1) - cfg_.rho * std::sin(th);
        parents.row(idx) = p.transpose();
        theta(idx) = th;
        bool valid = !forced_termination(p);
        wmask(idx, 0) = valid ? base_weights(j) : 0.0;
        pseg[static_cast<std::size_t>(idx)] = i;
      }
    }
    NetOut pnet = net_heads(tape, lv, parents);
    // integrand d(theta): u(p) (1 - pterm(p)) beta_pdf(theta | p) over (0, pi/2)
    Var pdf = beta_mixture_logpdf(pnet.pf_logw, pnet.pf_a, pnet.pf_b, theta, 0.0, kHalfPi);
    Var logterm = add(add(pnet.log_u, pnet.log_1mpterm), pdf);
    Var integrand = mul_mat(vexp(logterm), wmask);
    Var integral = segment_sum(integrand, pseg, S);
    Var res = square(sub(vlog(integral), gather_rows(net.log_u, arc_rows)));
    std::vector<int> seg(static_cast<std::size_t>(S));
    for (int i = 0; i < S; ++i) seg[static_cast<std::size_t>(i)] = L.traj[static_cast<std::size_t>(arc_rows[static_cast<std::size_t>(i)])];
    acc = add(acc, segment_sum(res, seg, L.K));
  }

  // reward matching term
  std::vector<int> term_rows;
  for (int i = 0; i < R; ++i)
    if (L.is_terminal[static_cast<std::size_t>(i)]) term_rows.push_back(i);
  Mat free_mask(static_cast<Eigen::Index>(term_rows.size()), 1);
  for (std::size_t i = 0; i < term_rows.size(); ++i)
    free_mask(static_cast<Eigen::Index>(i), 0) = L.forced[static_cast<std::size_t>(term_rows[i])] ? 0.0 : 1.0;
  Var rm = square(sub(add(gather_rows(net.log_u, term_rows),
                          mul_mat(gather_rows(net.log_pterm, term_rows), free_mask)),
                      tape.constant(L.log_r)));
  acc = add(acc, mul_scalar(rm, alpha));
  return mean_all(acc);
}

void gauss_legendre(int n, double a, double b, Vec& nodes, Vec& weights) {
  nodes.resize(n);
  weights.resize(n);
  // Newton iteration on P_n over [-1, 1], then affine map to [a, b]
  for (int i = 0; i < n; ++i) {
    double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int j = 0; j < n; ++j) {
        double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j + 1.0) * x * p1 - j * p2) / (j + 1.0);
      }
      pp = n * (x * p0 - p1) / (x * x - 1.0);
      double dx = p0 / pp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    nodes(i) = 0.5 * (b - a) * (-x) + 0.5 * (a + b);
    weights(i) = (b - a) / ((1.0 - x * x) * pp * pp);
  }
}

}  // namespace gfn
