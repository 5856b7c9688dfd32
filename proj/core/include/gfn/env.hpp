#pragma once

#include <map>
#include <random>
#include <vector>

#include "gfn/nn.hpp"
#include "gfn/tensor.hpp"

namespace gfn {

/// A complete rollout s0 -> s1 -> ... -> sn -> sink. Only interior payloads
/// are stored; the source and sink are implicit. log_pf has n+1 entries (the
/// last is the termination step), log_pb has n entries where the entry for
/// the reversed transition into s0 is 0 when that move is deterministic.
struct Trajectory {
  std::vector<Vec> states;
  std::vector<double> log_pf;
  std::vector<double> log_pb;
  double log_reward = 0.0;

  int length() const { return static_cast<int>(states.size()); }
};

struct LogTerms {
  double sum_log_pf;
  double sum_log_pb;
  double log_reward;
};

/// The three aggregates the TB loss consumes, in natural log.
LogTerms trajectory_log_terms(const Trajectory& traj);

/// Differentiable per-trajectory aggregates for a batch (K trajectories).
struct TrajectoryBatchTerms {
  Var sum_log_pf;  // K x 1
  Var sum_log_pb;  // K x 1 (constant node when P_B is fixed)
  Vec log_r;       // K
};

/// Sampling/evaluation domain for metrics (rejection sampling, KDE grids).
struct DomainSpec {
  Vec lo, hi;
  bool torus = false;
  double reward_sup = 0.0;  // upper bound M on the reward density
  bool bounded = false;
};

class Environment {
 public:
  virtual ~Environment() = default;

  virtual int max_traj_len() const = 0;
  virtual int terminal_dim() const = 0;
  virtual DomainSpec domain() const = 0;
  virtual ParamStore& params() = 0;
  virtual const ParamStore& params() const = 0;

  /// Samples trajectories from the (possibly exploration-perturbed) policy.
  /// Recorded log p_F always comes from the unperturbed model.
  virtual std::vector<Trajectory> rollout_batch(int n, double eps, std::mt19937_64& rng) = 0;

  /// Re-evaluates the batch on a tape so losses can differentiate through
  /// the policy parameters. States/actions are treated as constants.
  virtual TrajectoryBatchTerms eval_batch(Tape& tape, const std::map<std::string, Var>& lv,
                                          const std::vector<Trajectory>& batch) = 0;

  virtual double reward_logdensity(const Vec& x) const = 0;
};

/// Throws if any recorded value is non-finite (aborted rollout contract).
void validate_trajectory(const Trajectory& traj, int max_len);

}  // namespace gfn
