#pragma once

#include "gfn/env.hpp"
#include "gfn/tensor.hpp"

namespace gfn {

/// Trajectories whose terminal reward density is zero are excluded from batch
/// means rather than propagated as -inf.
struct BatchFilter {
  std::vector<Trajectory> kept;
  int skipped = 0;
};
BatchFilter filter_finite_reward(const std::vector<Trajectory>& batch);

/// Plain TB residual/loss for a single trajectory (test and bound helpers).
double tb_residual(const Trajectory& traj, double log_z);
inline double tb_loss_value(const Trajectory& traj, double log_z) {
  double r = tb_residual(traj, log_z);
  return r * r;
}

/// Mean squared trajectory-balance residual over a batch:
/// (log Z + sum log p_F - log r - sum log p_B)^2.
Var tb_loss(Tape& tape, Var log_z, const TrajectoryBatchTerms& terms);

struct KlResult {
  Var loss;           // surrogate whose gradient is the estimator
  double ess = 0.0;   // effective sample size of the weights
  bool flagged = false;  // ess < 2
};

/// Score-function estimator of the reverse KL gradient with a batch-mean
/// baseline. If behavior_logprob is non-null the batch is treated as
/// off-policy and self-normalized importance weights are applied.
KlResult reverse_kl_surrogate(Tape& tape, const TrajectoryBatchTerms& terms,
                              const Vec* behavior_logprob = nullptr);

/// Weighted NLL with self-normalized weights w ~ r * p_B / p_F (detached).
KlResult forward_kl_loss(Tape& tape, const TrajectoryBatchTerms& terms);

}  // namespace gfn
