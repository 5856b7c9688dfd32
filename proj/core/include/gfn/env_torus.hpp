#pragma once

#include "gfn/distributions.hpp"
#include "gfn/env.hpp"

namespace gfn {

struct TorusConfig {
  int T = 10;
  int hidden = 512;
  int hidden_layers = 4;  // 5 linear layers total
  int components = 5;     // von Mises mixture size per angle
  int freqs = 5;          // sin/cos encoding frequencies per angle
  unsigned init_seed = 0;
};

/// T-step chain over [0, 2pi)^2: both policies are products of two independent
/// learned von Mises mixtures; P_F and P_B are separate networks. The reward
/// is the synthetic (sin 3psi + cos 2phi + 2)^3 density.
class TorusEnv : public Environment {
 public:
  explicit TorusEnv(const TorusConfig& cfg);

  double reward_logdensity(const Vec& x) const override;

  /// sin/cos ladder of both angles plus a one-hot step embedding; s0 encodes
  /// as angles (0, 0) at step 0.
  Eigen::RowVectorXd encode(const Vec& angles, int t) const;
  int input_dim() const { return 4 * cfg_.freqs + cfg_.T + 1; }

  struct PolicyHeads {
    VonMisesMixtureParams psi, phi;
  };
  PolicyHeads forward_heads(const Vec& angles, int t) const;
  PolicyHeads backward_heads(const Vec& angles, int t) const;

  double forward_logdensity(const Vec& s, int t, const Vec& next) const;
  double backward_logdensity(const Vec& next, int t_next, const Vec& prev) const;

  int max_traj_len() const override { return cfg_.T; }
  int terminal_dim() const override { return 2; }
  DomainSpec domain() const override;
  ParamStore& params() override { return store_; }
  const ParamStore& params() const override { return store_; }
  std::vector<Trajectory> rollout_batch(int n, double eps, std::mt19937_64& rng) override;
  TrajectoryBatchTerms eval_batch(Tape& tape, const std::map<std::string, Var>& lv,
                                  const std::vector<Trajectory>& batch) override;

  const TorusConfig& config() const { return cfg_; }

 private:
  Mat net_raw(const std::string& prefix, const Mat& inputs) const;
  /// Per-angle mixture log-density on the tape for a batch of rows.
  Var policy_logpdf_tape(Tape& tape, const std::map<std::string, Var>& lv,
                         const std::string& prefix, const Mat& inputs, const Mat& targets) const;
  PolicyHeads heads_from_row(const Mat& row) const;

  TorusConfig cfg_;
  ParamStore store_;
  MlpSpec spec_;
};

}  // namespace gfn
