#pragma once

#include "gfn/distributions.hpp"
#include "gfn/env.hpp"

namespace gfn {

enum class SdeTarget { NineGaussians, Funnel };

struct SdeConfig {
  int T = 100;
  double sigma = 5.0;  // per-step forward variance is sigma / T
  int d = 2;
  SdeTarget target = SdeTarget::NineGaussians;
  int hidden = 64;
  int fourier_dim = 128;
  unsigned init_seed = 0;
};

/// Fixed-length chain through copies of R^d: forward policy is a Gaussian of
/// learned mean x + mu(x, t)/T and fixed variance sigma/T; backward policy is
/// the Brownian bridge pinned at the origin. The drift net starts at zero, so
/// the untrained sampler is an unbiased random walk.
class EuclidEnv : public Environment {
 public:
  explicit EuclidEnv(const SdeConfig& cfg);

  double target_logdensity(const Vec& x) const;
  double reward_logdensity(const Vec& x) const override { return target_logdensity(x); }

  /// Drift mu(x, t) for a batch of rows (plain, sampling path).
  Mat drift(const Mat& x, const std::vector<int>& t) const;

  double pf_logdensity(const Vec& xt, int t, const Vec& xnext) const;
  /// log N(x_{t-1}; x_t (t-1)/t, (sigma/T)((t-1)/t) I); 0 at t = 1.
  double pb_logdensity(const Vec& xt, int t, const Vec& xprev) const;

  int max_traj_len() const override { return cfg_.T; }
  int terminal_dim() const override { return cfg_.d; }
  DomainSpec domain() const override;
  ParamStore& params() override { return store_; }
  const ParamStore& params() const override { return store_; }
  std::vector<Trajectory> rollout_batch(int n, double eps, std::mt19937_64& rng) override;
  TrajectoryBatchTerms eval_batch(Tape& tape, const std::map<std::string, Var>& lv,
                                  const std::vector<Trajectory>& batch) override;

  const SdeConfig& config() const { return cfg_; }

 private:
  Var drift_tape(Tape& tape, const std::map<std::string, Var>& lv, const Mat& x,
                 const std::vector<int>& t) const;

  SdeConfig cfg_;
  ParamStore store_;
  MlpSpec x_spec_, t_spec_, joint_spec_;
};

}  // namespace gfn
