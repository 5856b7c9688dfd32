#pragma once

#include <string>
#include <vector>

#include "gfn/env_euclid.hpp"
#include "gfn/env_quarterdisc.hpp"
#include "gfn/env_torus.hpp"

namespace gfn {

struct ExperimentConfig {
  std::string name = "custom";
  std::string env = "grid";        // grid | euclid | torus
  std::string objective = "tb";    // tb | db-rm | fm-rm | reverse-kl | forward-kl
  double alpha = 1.0;              // RM weight in the composite losses
  int fm_quad_nodes = 64;

  GridConfig grid;
  SdeConfig sde;
  TorusConfig torus;

  double lr = 1e-3;
  double logz_lr_mult = 1.0;  // log Z usually trains faster than the policy
  double lr_decay = 1.0;      // multiplicative
  int lr_decay_every = 0;     // 0 = no decay
  int batch = 128;
  int iters = 1000;
  double eps0 = 0.0, eps1 = 0.0;  // exploration, linearly annealed

  int eval_every = 500;      // metrics cadence
  int jsd_every = 0;         // 0 = final evaluation only
  int jsd_samples = 100000;
  int jsd_grid_res = 200;
  int logz_every = 0;        // 0 = final evaluation only
  int logz_samples = 2000;   // K for the log-partition bounds

  unsigned seed = 0;
  std::string out_dir = "out";
};

ExperimentConfig config_from_json_text(const std::string& text);
std::string config_to_json_text(const ExperimentConfig& cfg);
ExperimentConfig load_config(const std::string& path);
void save_config(const ExperimentConfig& cfg, const std::string& path);

std::vector<std::string> preset_names();
/// Throws on unknown names; every preset mirrors the published defaults.
ExperimentConfig preset(const std::string& name);

}  // namespace gfn
