#ifndef LATENTDS_DS_RUNTIME_HPP
#define LATENTDS_DS_RUNTIME_HPP

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "latentds/diffeo_fdm.hpp"

namespace latentds::ds_runtime {

// Linear contraction toward the attractor, the stable system the deformation
// is wrapped around.
struct LatentDS {
  Eigen::VectorXd attractor;
  double rate = 1.0;
};

struct RolloutTrace {
  std::vector<double> times;
  Eigen::MatrixXd positions;   // one row per sample, demonstration space
  Eigen::MatrixXd velocities;  // matching rows of pushed-forward velocity
  bool converged = false;
  double final_distance = 0.0;

  int n_samples() const { return static_cast<int>(times.size()); }
};

Eigen::VectorXd latent_velocity(const LatentDS& ds, const Eigen::VectorXd& x);

// Demonstration-space velocity at forward(x): Jacobian times the latent field.
Eigen::VectorXd demo_velocity(const diffeo_fdm::DiffeoModel& model, const LatentDS& ds,
                              const Eigen::VectorXd& x);

// Integrates the latent system from inverse(y0) with a classical fixed-step
// RK4 scheme and pushes every state through the deformation. Stops once the
// demonstration-space distance to forward(attractor) drops to eps, or at
// t_max. t_max <= 0 selects the default horizon 50/rate.
RolloutTrace rollout(const diffeo_fdm::DiffeoModel& model, const LatentDS& ds,
                     const Eigen::VectorXd& y0, double dt = 1e-2, double t_max = 0.0,
                     double eps = 1e-2);

void save_trace(const RolloutTrace& trace, const std::string& path);

// {converged, final_distance, steps} as a JSON object string.
std::string summary_json(const RolloutTrace& trace);

}  // namespace latentds::ds_runtime

#endif
