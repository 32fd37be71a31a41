#ifndef LATENTDS_EVALKIT_HPP
#define LATENTDS_EVALKIT_HPP

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "latentds/demogen.hpp"

namespace latentds::evalkit {

struct DtwScore {
  double raw = 0.0;
  double normalized = 0.0;
  int path_length = 0;
  int radius = 0;
};

struct TuningCell {
  double mu = 0.0;
  double beta = 0.0;
  int budget = 0;  // requested layer cap
  int layers = 0;  // layers the fit actually placed
  double mse = 0.0;
  bool ok = false;
  std::string error;
};

struct TuningReport {
  std::vector<TuningCell> grid;  // ordered by (mu, beta, budget) ascending
  int selected = -1;
  int lowest_mse = -1;
  std::string selection_rule;
  double threshold = 0.0;
};

// Approximate dynamic time warping over row sequences with Euclidean point
// cost. Sequences of 64 points or fewer are scored with the exact quadratic
// program; longer ones recurse on pairwise-averaged halves and refine inside
// a window of the projected coarse path widened by `radius`. The score is
// symmetric and zero exactly when the sequences are identical.
DtwScore fast_dtw(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, int radius = 1);

// Mean squared pointwise distance scaled by the squared diameter of b.
double normalized_mse(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

// Fits every (mu, beta, budget) combination of aligned embedding against the
// demonstration and applies the selection rule. Cell failures are recorded in
// place rather than aborting the sweep. n_jobs > 1 evaluates cells on that
// many threads; results are deterministic either way.
TuningReport grid_search(const demogen::Demonstration& demo,
                         const Eigen::MatrixXd& embedding_aligned,
                         const std::vector<double>& mus, const std::vector<double>& betas,
                         const std::vector<int>& layer_budgets, double threshold = 1e-5,
                         int n_jobs = 1);

// Selection rule on its own, reusable against a stored grid: among cells
// passing the threshold take the fewest layers (ties: lower beta, then lower
// mu), upgraded to a deeper passing cell when that cell has a tenth of the
// MSE at no more than 1.5x the layers; with no passing cell, the global MSE
// minimum. Returns the chosen index and reports the rule tag and the index
// of the lowest-MSE cell through the out parameters.
int select_cell(const std::vector<TuningCell>& grid, double threshold, std::string* rule,
                int* lowest_mse);

std::string to_json(const TuningReport& report);

// One CSV per layer budget, mu rows against beta columns. Returns the file
// paths written.
std::vector<std::string> write_heatmaps(const TuningReport& report, const std::string& dir);

}  // namespace latentds::evalkit

#endif
