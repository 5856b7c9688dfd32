#pragma once

#include <random>

#include "gfn/tensor.hpp"

namespace gfn {

/// Mixture of Beta distributions rescaled to the interval [lo, hi].
struct BetaMixtureParams {
  Vec weights;      // simplex
  Vec alpha, beta;  // concentrations, clamped to [0.1, 5.1] by the policy heads
  double lo = 0.0, hi = 1.0;
};

struct DiagGaussianParams {
  Vec mean;
  Vec var;  // per-dimension, > 0
};

struct VonMisesMixtureParams {
  Vec weights;  // simplex
  Vec mu;       // locations in [0, 2pi)
  Vec kappa;    // concentrations > 0
};

// log density w.r.t. Lebesgue measure on the stated support. Points outside
// a bounded support return -inf (distinct from numeric underflow, which
// yields large-but-finite negatives).
double log_density(const BetaMixtureParams& p, double x);
double log_density(const DiagGaussianParams& p, const Vec& x);
double log_density(const VonMisesMixtureParams& p, double angle);

double sample(const BetaMixtureParams& p, std::mt19937_64& rng);
Vec sample(const DiagGaussianParams& p, std::mt19937_64& rng);
double sample(const VonMisesMixtureParams& p, std::mt19937_64& rng);  // wrapped to [0, 2pi)

// building blocks
double sample_gamma(double shape, std::mt19937_64& rng);              // Marsaglia-Tsang
double sample_beta(double a, double b, std::mt19937_64& rng);
double sample_von_mises(double mu, double kappa, std::mt19937_64& rng);  // Best-Fisher

// ---- differentiable (tape) versions, batched over rows ----

/// logits n*K -> row-wise log-softmax.
Var log_softmax_rows(Var logits);

/// log_w, alpha, beta: n*K; x: n points in [lo, hi]. Includes the 1/(hi-lo)
/// change-of-variables factor.
Var beta_mixture_logpdf(Var log_w, Var alpha, Var beta, const Vec& x, double lo, double hi);
/// Per-row support intervals (lo_i, hi_i).
Var beta_mixture_logpdf(Var log_w, Var alpha, Var beta, const Vec& x, const Vec& lo, const Vec& hi);

/// log_w, mu, kappa: n*K; angles: n points.
Var vonmises_mixture_logpdf(Var log_w, Var mu, Var kappa, const Vec& angles);

/// mean: n*d; x: n*d; fixed scalar variance.
Var gaussian_diag_logpdf(Var mean, const Mat& x, double var);

}  // namespace gfn
