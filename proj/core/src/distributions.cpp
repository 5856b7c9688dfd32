#include "gfn/distributions.hpp"

#include <cmath>
#include <limits>

namespace gfn {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kTwoPi = 2.0 * M_PI;

double log_beta_fn(double a, double b) {
  return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
}

double logsumexp(const Vec& v) {
  double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((v.array() - m).exp().sum());
}
}  // namespace

double log_density(const BetaMixtureParams& p, double x) {
  if (x < p.lo || x > p.hi) return kNegInf;
  double width = p.hi - p.lo;
  double u = (x - p.lo) / width;
  u = std::min(std::max(u, 1e-300), 1.0 - 1e-16);
  Vec comp(p.weights.size());
  for (Eigen::Index k = 0; k < comp.size(); ++k) {
    double a = p.alpha(k), b = p.beta(k);
    comp(k) = std::log(p.weights(k)) + (a - 1.0) * std::log(u) + (b - 1.0) * std::log1p(-u) -
              log_beta_fn(a, b);
  }
  return logsumexp(comp) - std::log(width);
}

double log_density(const DiagGaussianParams& p, const Vec& x) {
  double ll = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    double d = x(i) - p.mean(i);
    ll += -0.5 * (d * d / p.var(i) + std::log(kTwoPi * p.var(i)));
  }
  return ll;
}

double log_density(const VonMisesMixtureParams& p, double angle) {
  Vec comp(p.weights.size());
  for (Eigen::Index k = 0; k < comp.size(); ++k) {
    comp(k) = std::log(p.weights(k)) + p.kappa(k) * std::cos(angle - p.mu(k)) -
              std::log(kTwoPi) - log_bessel_i0(p.kappa(k));
  }
  return logsumexp(comp);
}

double sample_gamma(double shape, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  if (shape < 1.0) {
    // boost via Gamma(shape+1) and a uniform power
    double u = unif(rng);
    return sample_gamma(shape + 1.0, rng) * std::pow(u, 1.0 / shape);
  }
  double d = shape - 1.0 / 3.0;
  double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x = gauss(rng);
    double v = 1.0 + c * x;
    if (v <= 0.0) continue;
    v = v * v * v;
    double u = unif(rng);
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
  }
}

double sample_beta(double a, double b, std::mt19937_64& rng) {
  double x = sample_gamma(a, rng);
  double y = sample_gamma(b, rng);
  return x / (x + y);
}

double sample_von_mises(double mu, double kappa, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  if (kappa < 1e-8) {
    return kTwoPi * unif(rng);
  }
  // Best & Fisher wrapped-Cauchy envelope rejection
  double tau = 1.0 + std::sqrt(1.0 + 4.0 * kappa * kappa);
  double rho = (tau - std::sqrt(2.0 * tau)) / (2.0 * kappa);
  double r = (1.0 + rho * rho) / (2.0 * rho);
  for (;;) {
    double u1 = unif(rng);
    double z = std::cos(M_PI * u1);
    double f = (1.0 + r * z) / (r + z);
    double c = kappa * (r - f);
    double u2 = unif(rng);
    if (c * (2.0 - c) - u2 > 0.0 || std::log(c / u2) + 1.0 - c >= 0.0) {
      double u3 = unif(rng);
      double theta = (u3 < 0.5 ? -1.0 : 1.0) * std::acos(f) + mu;
      theta = std::fmod(theta, kTwoPi);
      if (theta < 0.0) theta += kTwoPi;
      return theta;
    }
  }
}

namespace {
int pick_component(const Vec& weights, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double u = unif(rng);
  double acc = 0.0;
  for (Eigen::Index k = 0; k < weights.size(); ++k) {
    acc += weights(k);
    if (u <= acc) return static_cast<int>(k);
  }
  return static_cast<int>(weights.size() - 1);
}
}  // namespace

double sample(const BetaMixtureParams& p, std::mt19937_64& rng) {
  int k = pick_component(p.weights, rng);
  double u = sample_beta(p.alpha(k), p.beta(k), rng);
  return p.lo + (p.hi - p.lo) * u;
}

Vec sample(const DiagGaussianParams& p, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Vec x(p.mean.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = p.mean(i) + std::sqrt(p.var(i)) * gauss(rng);
  return x;
}

double sample(const VonMisesMixtureParams& p, std::mt19937_64& rng) {
  int k = pick_component(p.weights, rng);
  return sample_von_mises(p.mu(k), p.kappa(k), rng);
}

// ---- tape versions ----

Var log_softmax_rows(Var logits) {
  return sub_colvec(logits, logsumexp_rows(logits));
}

Var beta_mixture_logpdf(Var log_w, Var alpha, Var beta, const Vec& x, const Vec& lo,
                        const Vec& hi) {
  Tape& t = *log_w.tape;
  Eigen::Index n = x.size();
  Eigen::Index K = t.value(log_w).cols();
  Vec width = hi - lo;
  Vec u = ((x - lo).array() / width.array()).cwiseMax(1e-300).cwiseMin(1.0 - 1e-16);
  Mat logu = u.array().log().replicate(1, K).matrix();
  Mat log1mu = (1.0 - u.array()).log().replicate(1, K).matrix();
  Var lu = t.constant(logu);
  Var l1mu = t.constant(log1mu);
  Var ones = t.constant(Mat::Ones(n, K));
  Var am1 = sub(alpha, ones);
  Var bm1 = sub(beta, ones);
  Var log_beta_fn = sub(add(vlgamma(alpha), vlgamma(beta)), vlgamma(add(alpha, beta)));
  Var comp = sub(add(mul(am1, lu), mul(bm1, l1mu)), log_beta_fn);
  Var mix = logsumexp_rows(add(log_w, comp));
  Var logwidth = t.constant(width.array().log().matrix());
  return sub(mix, logwidth);
}

Var beta_mixture_logpdf(Var log_w, Var alpha, Var beta, const Vec& x, double lo, double hi) {
  Eigen::Index n = x.size();
  return beta_mixture_logpdf(log_w, alpha, beta, x, Vec::Constant(n, lo), Vec::Constant(n, hi));
}

Var vonmises_mixture_logpdf(Var log_w, Var mu, Var kappa, const Vec& angles) {
  Tape& t = *log_w.tape;
  Eigen::Index K = t.value(log_w).cols();
  Var x = t.constant(angles.replicate(1, K));
  Var cosdiff = vcos(sub(x, mu));
  Var comp = sub(mul(kappa, cosdiff), log_i0(kappa));
  Var mix = logsumexp_rows(add(log_w, comp));
  return add_scalar(mix, -std::log(kTwoPi));
}

Var gaussian_diag_logpdf(Var mean, const Mat& x, double var) {
  Tape& t = *mean.tape;
  Var diff = sub(t.constant(x), mean);
  Var quad = mul_scalar(row_sum(square(diff)), -0.5 / var);
  double d = static_cast<double>(x.cols());
  return add_scalar(quad, -0.5 * d * std::log(kTwoPi * var));
}

}  // namespace gfn
