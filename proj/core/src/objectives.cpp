#include "gfn/objectives.hpp"

#include <cmath>

namespace gfn {

BatchFilter filter_finite_reward(const std::vector<Trajectory>& batch) {
  BatchFilter out;
  out.kept.reserve(batch.size());
  for (const auto& t : batch) {
    if (std::isfinite(t.log_reward))
      out.kept.push_back(t);
    else
      ++out.skipped;
  }
  return out;
}

double tb_residual(const Trajectory& traj, double log_z) {
  LogTerms lt = trajectory_log_terms(traj);
  return log_z + lt.sum_log_pf - lt.log_reward - lt.sum_log_pb;
}

Var tb_loss(Tape& tape, Var log_z, const TrajectoryBatchTerms& terms) {
  int K = static_cast<int>(terms.log_r.size());
  std::vector<int> zeros(static_cast<std::size_t>(K), 0);
  Var z = gather_rows(log_z, zeros);
  Var resid = sub(add(z, sub(terms.sum_log_pf, terms.sum_log_pb)), tape.constant(terms.log_r));
  return mean_all(square(resid));
}

namespace {
// self-normalized weights from log-weights; returns ESS alongside
Vec normalized_weights(const Vec& logw, double& ess) {
  Vec w = (logw.array() - logw.maxCoeff()).exp();
  w /= w.sum();
  ess = 1.0 / w.squaredNorm();
  return w;
}
}  // namespace

KlResult reverse_kl_surrogate(Tape& tape, const TrajectoryBatchTerms& terms,
                              const Vec* behavior_logprob) {
  int K = static_cast<int>(terms.log_r.size());
  const Mat& pf = tape.value(terms.sum_log_pf);
  const Mat& pb = tape.value(terms.sum_log_pb);
  Vec L(K);  // detached per-trajectory integrand log(p_F / (r p_B))
  for (int i = 0; i < K; ++i) L(i) = pf(i, 0) - terms.log_r(i) - pb(i, 0);

  KlResult out;
  Vec w;
  if (behavior_logprob != nullptr) {
    Vec logw = pf.col(0) - *behavior_logprob;
    w = normalized_weights(logw, out.ess);
  } else {
    w = Vec::Constant(K, 1.0 / K);
    out.ess = static_cast<double>(K);
  }
  out.flagged = out.ess < 2.0;
  double baseline = w.dot(L);
  // surrogate: sum_i w_i (L_i - b) log p_F(tau_i); grad = score-function estimator
  Vec coeff = (w.array() * (L.array() - baseline)).matrix();
  out.loss = sum_all(mul_mat(terms.sum_log_pf, coeff));
  return out;
}

KlResult forward_kl_loss(Tape& tape, const TrajectoryBatchTerms& terms) {
  int K = static_cast<int>(terms.log_r.size());
  const Mat& pf = tape.value(terms.sum_log_pf);
  const Mat& pb = tape.value(terms.sum_log_pb);
  Vec logw(K);
  for (int i = 0; i < K; ++i) logw(i) = terms.log_r(i) + pb(i, 0) - pf(i, 0);
  KlResult out;
  Vec w = normalized_weights(logw, out.ess);
  out.flagged = out.ess < 2.0;
  out.loss = sum_all(mul_mat(neg(terms.sum_log_pf), w));
  return out;
}

}  // namespace gfn
