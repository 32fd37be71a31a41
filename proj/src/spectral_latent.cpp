#include "latentds/spectral_latent.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "latentds/geometry.hpp"

namespace latentds::spectral_latent {
namespace {

constexpr double kPi = 3.14159265358979323846;

// Number of eigenvalues of the branch matrix strictly below x. The matrix is
// symmetric tridiagonal with unit off-diagonals, so the Sturm sequence
// reduces to the scalar recurrence d <- diag[i] - x - 1/d.
int eigenvalues_below(const Eigen::VectorXd& diag, double x) {
  int count = 0;
  double d = 1.0;
  for (Eigen::Index i = 0; i < diag.size(); ++i) {
    d = (i == 0) ? diag[0] - x : diag[i] - x - 1.0 / d;
    if (d == 0.0) d = -std::numeric_limits<double>::min();
    if (d < 0.0) ++count;
  }
  return count;
}

double largest_tridiag_eigenvalue(const Eigen::VectorXd& diag) {
  const int n = static_cast<int>(diag.size());
  double lo = diag.minCoeff() - 2.0;
  double hi = diag.maxCoeff() + 2.0;
  while (hi - lo > 1e-12) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (eigenvalues_below(diag, mid) >= n) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return 0.5 * (lo + hi);
}

Eigen::VectorXd branch_diagonal(int n_points, double alpha) {
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(n_points);
  diag[0] = 1.0;
  diag[n_points - 1] = -1.0 + alpha;
  return diag;
}

// Smallest Laplacian eigenvalue contributed by the branch with cyclic phase
// angle 2 pi j / K.
double branch_value(int n_points, int n_copies, int j) {
  const double alpha = 2.0 * std::cos(2.0 * kPi * static_cast<double>(j) / static_cast<double>(n_copies));
  return 2.0 - largest_tridiag_eigenvalue(branch_diagonal(n_points, alpha));
}

}  // namespace

void validate(const GraphSpec& spec) {
  if (spec.n_points < 3) throw std::invalid_argument("graph needs at least 3 points per copy");
  if (spec.n_dims < 2) throw std::invalid_argument("graph needs at least 2 latent dimensions");
  if (spec.n_copies < 3) throw std::invalid_argument("graph needs at least 3 copies");
}

double eigenvalue_bound(int n_points) {
  if (n_points < 3) throw std::invalid_argument("eigenvalue_bound: need at least 3 points");
  return 2.0 * (1.0 - std::cos(kPi / static_cast<double>(n_points)));
}

std::vector<double> branch_eigenvalues(const GraphSpec& spec) {
  validate(spec);
  const int K = spec.n_copies;
  const int n_pairs = (K % 2 == 0) ? K / 2 - 1 : (K - 1) / 2;
  std::vector<double> values;
  values.reserve(static_cast<size_t>(n_pairs));
  for (int j = 1; j <= n_pairs; ++j) values.push_back(branch_value(spec.n_points, K, j));
  std::sort(values.begin(), values.end());
  return values;
}

SpectralSelection repeating_eigenvalues(const GraphSpec& spec) {
  validate(spec);
  const int n = spec.n_dims;
  const int K = spec.n_copies;

  SpectralSelection sel;
  sel.bound = eigenvalue_bound(spec.n_points);

  std::vector<double> paired = branch_eigenvalues(spec);
  for (double lam : paired) {
    if (!(lam > 0.0 && lam < sel.bound)) continue;
    if (static_cast<int>(sel.eigenvalues.size()) + 2 > n) break;
    sel.eigenvalues.push_back(lam);
    sel.eigenvalues.push_back(lam);
  }
  if (static_cast<int>(sel.eigenvalues.size()) == n - 1 && K % 2 == 0) {
    const double lam = branch_value(spec.n_points, K, K / 2);
    if (lam > 0.0 && lam < sel.bound) sel.eigenvalues.push_back(lam);
  }
  if (static_cast<int>(sel.eigenvalues.size()) != n) {
    throw eigenvalue_shortfall("only " + std::to_string(sel.eigenvalues.size()) + " of " +
                               std::to_string(n) + " repeating eigenvalues available for N=" +
                               std::to_string(spec.n_points) + ", K=" + std::to_string(K) +
                               "; increase the copy count");
  }
  if (!std::is_sorted(sel.eigenvalues.begin(), sel.eigenvalues.end())) {
    std::sort(sel.eigenvalues.begin(), sel.eigenvalues.end());
  }

  for (size_t i = 0; i < sel.eigenvalues.size();) {
    size_t j = i;
    while (j < sel.eigenvalues.size() && sel.eigenvalues[j] == sel.eigenvalues[i]) ++j;
    sel.multiplicities.push_back(static_cast<int>(j - i));
    i = j;
  }
  return sel;
}

double chebyshev_coordinate(int i, double lambda) {
  if (i < 1) throw std::invalid_argument("chebyshev_coordinate: index starts at 1");
  if (!(lambda > 0.0 && lambda < 4.0)) {
    throw std::invalid_argument("chebyshev_coordinate: lambda must lie in (0, 4)");
  }
  const double a = std::acos(1.0 - lambda / 2.0);
  const double b = lambda / (2.0 * std::sin(a));
  return std::cos(i * a) - b * std::sin(i * a);
}

LatentEmbedding build_embedding(const GraphSpec& spec) {
  LatentEmbedding emb;
  emb.selection = repeating_eigenvalues(spec);

  const int N = spec.n_points;
  const int n = spec.n_dims;
  emb.points.resize(N, n);
  emb.a.resize(n);
  emb.b.resize(n);
  emb.gamma.resize(n);
  for (int j = 0; j < n; ++j) {
    const double lam = emb.selection.eigenvalues[static_cast<size_t>(j)];
    emb.a[j] = std::acos(1.0 - lam / 2.0);
    emb.b[j] = lam / (2.0 * std::sin(emb.a[j]));
    emb.gamma[j] = std::asin(1.0 / std::sqrt(emb.b[j] * emb.b[j] + 1.0));
    for (int r = 0; r < N; ++r) emb.points(r, j) = chebyshev_coordinate(N - r, lam);
    emb.points(N - 1, j) = 1.0 - lam;
  }
  emb.start = emb.points.row(0);
  emb.attractor = emb.points.row(N - 1);
  return emb;
}

Eigen::MatrixXd align_to_demo(const LatentEmbedding& embedding, const Eigen::MatrixXd& demo_points) {
  const Eigen::Index N = embedding.points.rows();
  const Eigen::Index n = embedding.points.cols();
  if (demo_points.rows() != N || demo_points.cols() != n) {
    throw std::invalid_argument("align_to_demo: demonstration shape does not match embedding");
  }
  if (!demo_points.allFinite()) throw std::invalid_argument("align_to_demo: non-finite demonstration");

  const double diam = diameter(demo_points);
  Eigen::MatrixXd out(N, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const double demo_first = demo_points(0, j);
    const double demo_last = demo_points(N - 1, j);
    const double displacement = demo_last - demo_first;
    if (std::abs(displacement) < 1e-9 * diam) {
      out.col(j).setConstant(demo_first);
      continue;
    }
    const double scale = displacement / (embedding.attractor[j] - embedding.start[j]);
    out.col(j) = (embedding.points.col(j).array() - embedding.start[j]) * scale + demo_first;
    out(0, j) = demo_first;
    out(N - 1, j) = demo_last;
  }
  return out;
}

Eigen::MatrixXd dense_laplacian(const GraphSpec& spec) {
  validate(spec);
  const long total = static_cast<long>(spec.n_points) * spec.n_copies;
  if (total > 2000) throw std::invalid_argument("dense_laplacian: N*K exceeds the 2000-node guard");

  const int N = spec.n_points;
  const int K = spec.n_copies;
  Eigen::MatrixXd adj = Eigen::MatrixXd::Zero(total, total);
  auto idx = [N](int copy, int i) { return copy * N + i; };
  for (int k = 0; k < K; ++k) {
    for (int i = 0; i + 1 < N; ++i) {
      adj(idx(k, i), idx(k, i + 1)) = 1.0;
      adj(idx(k, i + 1), idx(k, i)) = 1.0;
    }
  }
  for (int k = 0; k < K; ++k) {
    const int next = (k + 1) % K;
    adj(idx(k, N - 1), idx(next, N - 1)) = 1.0;
    adj(idx(next, N - 1), idx(k, N - 1)) = 1.0;
  }
  Eigen::MatrixXd lap = -adj;
  lap.diagonal() = adj.rowwise().sum();
  return lap;
}

}  // namespace latentds::spectral_latent
