#pragma once

#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace latentds::spectral_latent {

// Cyclic multi-copy trajectory graph: n_copies chains of n_points nodes each,
// with the chain tails joined into a single cycle.
struct GraphSpec {
  int n_points = 0;  // N, samples per copy
  int n_dims = 0;    // n, latent dimensions to fill
  int n_copies = 0;  // K, number of copies
};

struct SpectralSelection {
  std::vector<double> eigenvalues;  // ascending, length n_dims, repeats allowed
  std::vector<int> multiplicities;  // one entry per distinct value
  double bound = 0.0;               // strict upper bound 2(1 - cos(pi/N))
};

struct LatentEmbedding {
  Eigen::MatrixXd points;  // N x n latent coordinates, start to attractor
  SpectralSelection selection;
  Eigen::VectorXd a;       // arccos(1 - lambda/2) per column
  Eigen::VectorXd b;       // lambda / (2 sin a) per column
  Eigen::VectorXd gamma;   // arcsin(1 / sqrt(b^2 + 1)) per column
  Eigen::VectorXd start;     // first row
  Eigen::VectorXd attractor; // last row, entries exactly 1 - lambda
};

// Thrown when a graph cannot supply enough repeating eigenvalues under the
// bound; a larger n_copies usually can.
struct eigenvalue_shortfall : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void validate(const GraphSpec& spec);

// Strict upper bound on selectable eigenvalues, 2(1 - cos(pi/N)).
double eigenvalue_bound(int n_points);

// The repeated Laplacian eigenvalues contributed by the paired branch
// matrices, ascending. Each appears with multiplicity 2 in the full spectrum.
std::vector<double> branch_eigenvalues(const GraphSpec& spec);

// The n_dims smallest repeating eigenvalues under the bound: multiplicity-2
// values from branch pairs first, then the single middle-branch value for a
// final odd slot. Throws eigenvalue_shortfall when the graph cannot fill
// n_dims slots.
SpectralSelection repeating_eigenvalues(const GraphSpec& spec);

// Closed-form latent coordinate cos(i a) - b sin(i a), the Chebyshev
// combination T_i(1 - lambda/2) - (lambda/2) V_{i-1}(1 - lambda/2), with i
// counted from 1.
double chebyshev_coordinate(int i, double lambda);

// N x n coordinate matrix, one column per selected eigenvalue, rows reversed
// so the trajectory runs from start to attractor.
LatentEmbedding build_embedding(const GraphSpec& spec);

// Per-dimension affine map taking (start, attractor) onto the demonstration's
// (first, last) points. A dimension whose demonstration displacement is below
// 1e-9 times the demonstration diameter collapses to the constant value.
Eigen::MatrixXd align_to_demo(const LatentEmbedding& embedding, const Eigen::MatrixXd& demo_points);

// Explicit (N K) x (N K) Laplacian of the multi-copy graph. Guarded to
// N*K <= 2000; intended for verification at small sizes.
Eigen::MatrixXd dense_laplacian(const GraphSpec& spec);

}  // namespace latentds::spectral_latent
