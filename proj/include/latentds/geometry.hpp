#pragma once

#include <algorithm>

#include <Eigen/Dense>

namespace latentds {

// Largest pairwise Euclidean distance between the rows of pts.
inline double diameter(const Eigen::MatrixXd& pts) {
  double best = 0.0;
  for (Eigen::Index i = 0; i + 1 < pts.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < pts.rows(); ++j) {
      best = std::max(best, (pts.row(i) - pts.row(j)).norm());
    }
  }
  return best;
}

}  // namespace latentds
