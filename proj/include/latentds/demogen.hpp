#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace latentds::demogen {

// A single recorded trajectory. The final row is the attractor.
struct Demonstration {
  Eigen::MatrixXd points;                     // N x n positions
  std::optional<Eigen::MatrixXd> velocities;  // N x n, if recorded
  std::optional<double> dt;                   // sampling step, if uniform in time
  std::string label;

  Eigen::Index n_points() const { return points.rows(); }
  Eigen::Index n_dims() const { return points.cols(); }
};

// Throws std::invalid_argument on fewer than 3 samples, non-finite entries,
// or a velocity shape mismatch.
void validate(const Demonstration& demo);

// Spherical spiral winding away from the north pole, sampled uniformly for
// t in [0, 3.14]. Larger c gives more windings.
Demonstration unstable_spiral(double c, int n_samples);

// Spherical spiral integrated with explicit Euler (step 0.003) from
// (theta, psi) = (0.1, 0) under theta' = 0.3(pi - theta), psi' = 0.3(2c pi - psi).
// Stops at the first consecutive-point distance below 1e-2 whose predecessor
// was at least 1e-2; if the step distance never reaches 1e-2, stops once it
// shrinks below 1e-6.
Demonstration stable_spiral(double c);

// Planar spiral with radius growing linearly to 0.1 over a total turn of
// 3*pi, sampled over t in [0, 12].
Demonstration archimedean_spiral(int n_samples);

// Linear interpolation at n_out uniformly spaced index parameters.
// Endpoints are preserved exactly.
Eigen::MatrixXd resample_uniform(const Eigen::MatrixXd& points, int n_out);

// count points uniform in the closed ball of the given radius around y0.
// Byte-identical for identical seeds on any platform.
std::vector<Eigen::VectorXd> perturb_starts(const Eigen::VectorXd& y0, double radius,
                                            int count, std::uint64_t seed);

// CSV with header [time,]y_1..y_n[,v_1..v_n]. Values round-trip at full
// precision; parse failures name the offending line.
Demonstration load_csv(const std::string& path);
void save_csv(const Demonstration& demo, const std::string& path);

}  // namespace latentds::demogen
