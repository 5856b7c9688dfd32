#pragma once

#include <functional>

#include "gfn/env.hpp"

namespace gfn {

/// Product-Gaussian KDE with per-dimension Scott bandwidths. Torus mode sums
/// the +-2pi image terms of every kernel.
struct KdeModel {
  Mat samples;     // n x d
  Vec bandwidth;   // d
  bool torus = false;

  static KdeModel fit(const Mat& samples, bool torus);
  /// Density at each point of a 2-D grid given by per-axis coordinates.
  Mat score_grid(const Vec& gx, const Vec& gy) const;
};

struct JsdReport {
  double jsd = 0.0;  // natural log; in [0, log 2]
  int n_samples = 0;
  int grid_res = 0;
};

struct LogZBoundReport {
  double B = 0.0;     // mean of log ratios
  double B_RW = 0.0;  // log of mean ratio (log-sum-exp)
  int K = 0;
  Vec ratios;  // retained for standard-error estimation
  int skipped = 0;
};

/// Exact sampling from the normalized target by uniform-proposal rejection.
/// Throws if the acceptance rate falls below 1e-4.
Mat rejection_sample(const std::function<double(const Vec&)>& logdensity, const DomainSpec& dom,
                     double bound, int n, std::mt19937_64& rng);

/// Jensen-Shannon divergence between two pmfs, natural log.
double jsd_from_pmfs(const Vec& p, const Vec& q);

/// KDE both sample sets, score a shared res x res grid over the domain,
/// normalize to pmfs, and compare.
JsdReport jsd_estimate(const Mat& samples_a, const Mat& samples_b, const DomainSpec& dom,
                       int res = 200);

/// Terminal states of n fresh unperturbed rollouts, one row per trajectory.
Mat model_samples(Environment& env, int n, std::mt19937_64& rng);

/// Full pipeline: model samples vs rejection samples of the reward.
JsdReport jsd_vs_target(Environment& env, int n, int res, std::mt19937_64& rng);

/// Importance bounds on log Z from K fresh on-policy rollouts:
/// ratio_i = log [R(x) p_B(tau|x) / p_F(tau)].
LogZBoundReport logz_bounds(Environment& env, int K, std::mt19937_64& rng);

}  // namespace gfn
