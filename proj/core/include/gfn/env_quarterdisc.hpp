#pragma once

#include "gfn/distributions.hpp"
#include "gfn/env.hpp"

namespace gfn {

struct GridConfig {
  double rho = 0.25;
  int hidden = 128;
  int hidden_layers = 2;
  bool learned_pb = true;
  int source_components = 4;  // Beta mixture components for the first step
  int angle_components = 2;   // for interior angle policies
  unsigned init_seed = 0;
};

struct AngleInterval {
  double lo = 0.0, hi = 0.0;
  bool empty() const { return hi <= lo; }
  double width() const { return hi - lo; }
};

/// Continuous quarter-disc environment: first action lands inside the
/// quarter disc of radius rho at the origin, later actions are fixed-radius
/// arc steps inside [0,1]^2 or termination. States past norm 1-rho must
/// terminate.
class QuarterDiscEnv : public Environment {
 public:
  explicit QuarterDiscEnv(const GridConfig& cfg);

  // geometry
  bool forced_termination(const Vec& s) const { return s.norm() > 1.0 - cfg_.rho; }
  /// Angle support for a continuing forward step from s (not the source).
  AngleInterval forward_interval(const Vec& s) const;
  /// Angle support for the backward step from s; empty iff the only parent
  /// is the source (norm < rho).
  AngleInterval backward_interval(const Vec& s) const;
  bool parent_is_source(const Vec& s) const { return s.norm() < cfg_.rho; }

  double reward_logdensity(const Vec& x) const override;

  // plain policy heads (sampling and quadrature checks)
  struct SourceHeads {
    BetaMixtureParams radius;  // on (0, rho)
    BetaMixtureParams angle;   // on (0, pi/2)
  };
  struct ForwardHeads {
    double p_term = 1.0;        // probability of stepping to the sink
    BetaMixtureParams angle;    // over forward_interval(s); unused when p_term == 1
    bool forced = false;
  };
  SourceHeads source_heads() const;
  ForwardHeads forward_heads(const Vec& s) const;
  BetaMixtureParams backward_heads(const Vec& s) const;  // over backward_interval(s)

  /// log p_F(s, s') w.r.t. kappa(s, -): area density from the source, arc
  /// density (incl. the 1/rho arclength Jacobian) from interior states.
  double forward_logdensity(const Vec& s, const Vec& next, bool from_source) const;
  double termination_logprob(const Vec& s) const;
  /// log p_B(s', s) w.r.t. kappa_b(s', -); 0 for the deterministic move to s0.
  double backward_logdensity(const Vec& next, const Vec& prev) const;

  // Environment interface
  int max_traj_len() const override;
  int terminal_dim() const override { return 2; }
  DomainSpec domain() const override;
  ParamStore& params() override { return store_; }
  const ParamStore& params() const override { return store_; }
  std::vector<Trajectory> rollout_batch(int n, double eps, std::mt19937_64& rng) override;
  TrajectoryBatchTerms eval_batch(Tape& tape, const std::map<std::string, Var>& lv,
                                  const std::vector<Trajectory>& batch) override;

  /// Composite DB + alpha*RM objective over a batch (mean per trajectory).
  Var db_rm_loss(Tape& tape, const std::map<std::string, Var>& lv,
                 const std::vector<Trajectory>& batch, double alpha);
  /// Composite FM + alpha*RM objective; parent integrals by Gauss-Legendre.
  Var fm_rm_loss(Tape& tape, const std::map<std::string, Var>& lv,
                 const std::vector<Trajectory>& batch, double alpha, int quad_nodes);

  const GridConfig& config() const { return cfg_; }

 private:
  struct NetOut;  // tape-side head bundle
  NetOut net_heads(Tape& tape, const std::map<std::string, Var>& lv, const Mat& states) const;
  Mat net_raw(const Mat& states) const;  // plain trunk+heads, one row per state

  GridConfig cfg_;
  ParamStore store_;
  MlpSpec trunk_spec_;
};

/// Gauss-Legendre nodes/weights on [a, b].
void gauss_legendre(int n, double a, double b, Vec& nodes, Vec& weights);

}  // namespace gfn
