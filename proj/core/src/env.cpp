#include "gfn/env.hpp"

#include <cmath>
#include <stdexcept>

namespace gfn {

LogTerms trajectory_log_terms(const Trajectory& traj) {
  if (traj.states.empty()) throw std::runtime_error("trajectory_log_terms: empty trajectory");
  if (traj.log_pf.size() != traj.states.size() + 1 || traj.log_pb.size() != traj.states.size())
    throw std::runtime_error("trajectory_log_terms: inconsistent log-term counts");
  LogTerms out{0.0, 0.0, traj.log_reward};
  for (double v : traj.log_pf) out.sum_log_pf += v;
  for (double v : traj.log_pb) out.sum_log_pb += v;
  return out;
}

void validate_trajectory(const Trajectory& traj, int max_len) {
  if (traj.length() > max_len)
    throw std::runtime_error("rollout exceeded the maximal trajectory length");
  for (double v : traj.log_pf)
    if (std::isnan(v) || v == std::numeric_limits<double>::infinity())
      throw std::runtime_error("non-finite forward log-density in rollout");
  for (double v : traj.log_pb)
    if (std::isnan(v) || v == std::numeric_limits<double>::infinity())
      throw std::runtime_error("non-finite backward log-density in rollout");
}

}  // namespace gfn
