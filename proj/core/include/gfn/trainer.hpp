#pragma once

#include <memory>

#include "gfn/config.hpp"
#include "gfn/env.hpp"

namespace gfn {

struct TrainResult {
  double final_loss = 0.0;
  double log_z = 0.0;            // learned value (TB)
  double final_jsd = -1.0;       // -1 when not evaluated
  double final_b = 0.0, final_b_rw = 0.0;
  bool logz_evaluated = false;
  int completed_iters = 0;
  bool aborted_nan = false;
  std::string out_dir;
};

std::unique_ptr<Environment> make_env(const ExperimentConfig& cfg);

/// Deterministic seeded training loop. Writes metrics.csv (fixed header,
/// empty fields for metrics not evaluated that row), config.json, a final
/// checkpoint, and for 2-D bounded envs a KDE density grid.
TrainResult run_experiment(const ExperimentConfig& cfg);

/// Writes a res x res CSV of KDE-estimated terminating density over the
/// domain (rows = y index, cols = x index), normalized to integrate to 1.
void export_density_grid(Environment& env, const std::string& csv_path, int res, int n_samples,
                         std::mt19937_64& rng);

/// Rebuilds the environment from the config stored next to a checkpoint and
/// reloads the parameters (checkpoint path: <dir>/checkpoint.bin).
std::unique_ptr<Environment> load_checkpoint(const std::string& checkpoint_path,
                                             ExperimentConfig& cfg_out);

}  // namespace gfn
