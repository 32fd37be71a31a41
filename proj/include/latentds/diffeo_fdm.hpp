#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace latentds::diffeo_fdm {

// One kernel-translation layer x -> x + v * exp(-|x - c|^2 / (2 w^2)).
// Invertible whenever |v| * e^{-1/2} / w < 1; fitted layers keep this
// product at or below mu.
struct DiffeoLayer {
  Eigen::VectorXd center;
  Eigen::VectorXd translation;
  double width = 0.0;
};

struct SetMeta {
  int n_points = 0;
  int n_dims = 0;
  std::string provenance;
  Eigen::VectorXd start;      // first training point
  Eigen::VectorXd attractor;  // last training point
};

struct DiffeoModel {
  std::vector<DiffeoLayer> layers;
  double mu = 0.0;
  double beta = 0.0;
  double normalized_mse = 0.0;  // achieved on the training pair
  SetMeta source_meta;
  SetMeta target_meta;
};

struct inversion_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Greedy layer-by-layer fit of source onto target. Each layer centers on the
// source point with the largest residual (lowest index on ties), translates
// by beta times that residual clipped to the invertibility bound, and picks
// its width from a fixed grid of multiples of the worst residual norm by the
// lowest resulting MSE, with one local refinement pass. Stops at max_layers,
// at mse_stop, or when no candidate lowers the MSE. The per-layer MSE is
// non-increasing and the result is deterministic in its inputs.
DiffeoModel fit(const Eigen::MatrixXd& source, const Eigen::MatrixXd& target,
                double mu, double beta, int max_layers, double mse_stop = 1e-5);

Eigen::VectorXd forward(const DiffeoModel& model, const Eigen::VectorXd& x);
Eigen::MatrixXd forward(const DiffeoModel& model, const Eigen::MatrixXd& xs);

// Inverts y layer by layer in reverse via fixed-point iteration; each layer's
// perturbation is a contraction with modulus at most mu. Throws
// inversion_error naming the final residual when the budget runs out.
Eigen::VectorXd inverse(const DiffeoModel& model, const Eigen::VectorXd& y,
                        double tol = 1e-10, int max_iter = 200);

// Jacobian of the forward composition at x.
Eigen::MatrixXd jacobian(const DiffeoModel& model, const Eigen::VectorXd& x);

// forward(x) and jacobian(x) in a single pass.
std::pair<Eigen::VectorXd, Eigen::MatrixXd> forward_with_jacobian(const DiffeoModel& model,
                                                                  const Eigen::VectorXd& x);

// Versioned JSON document; re-serialization of a loaded model is
// byte-identical.
std::string to_json(const DiffeoModel& model);
DiffeoModel from_json(const std::string& text);
void save_model(const DiffeoModel& model, const std::string& path);
DiffeoModel load_model(const std::string& path);

}  // namespace latentds::diffeo_fdm
