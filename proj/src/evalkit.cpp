#include "latentds/evalkit.hpp"

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <thread>
#include <utility>

#include "json.hpp"
#include "latentds/detail/num_format.hpp"
#include "latentds/diffeo_fdm.hpp"
#include "latentds/geometry.hpp"

namespace latentds::evalkit {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kExactCutoff = 64;

struct PathResult {
  double cost = 0.0;
  std::vector<std::pair<int, int>> path;
};

// Dynamic program restricted to columns [lo[i], hi[i]] per row. Rows must
// overlap their predecessor's range so a monotone path always exists.
PathResult windowed_dtw(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                        const std::vector<int>& lo, const std::vector<int>& hi) {
  const int na = static_cast<int>(a.rows());
  const int nb = static_cast<int>(b.rows());
  std::vector<double> prev, cur;
  std::vector<std::vector<uint8_t>> moves(static_cast<size_t>(na));
  int prev_lo = 0, prev_hi = -1;
  for (int i = 0; i < na; ++i) {
    const int row_lo = lo[static_cast<size_t>(i)];
    const int row_hi = hi[static_cast<size_t>(i)];
    cur.assign(static_cast<size_t>(row_hi - row_lo + 1), kInf);
    moves[static_cast<size_t>(i)].assign(cur.size(), 0);
    auto above = [&](int j) {
      return (i > 0 && j >= prev_lo && j <= prev_hi) ? prev[static_cast<size_t>(j - prev_lo)]
                                                     : kInf;
    };
    for (int j = row_lo; j <= row_hi; ++j) {
      const double d = (a.row(i) - b.row(j)).norm();
      const size_t off = static_cast<size_t>(j - row_lo);
      if (i == 0 && j == 0) {
        cur[off] = d;
        continue;
      }
      double best = above(j - 1);  // diagonal
      uint8_t move = 1;
      if (const double up = above(j); up < best) {
        best = up;
        move = 2;
      }
      if (const double left = j > row_lo ? cur[off - 1] : kInf; left < best) {
        best = left;
        move = 3;
      }
      cur[off] = d + best;
      moves[static_cast<size_t>(i)][off] = move;
    }
    prev.swap(cur);
    prev_lo = row_lo;
    prev_hi = row_hi;
  }

  PathResult result;
  result.cost = prev[static_cast<size_t>(nb - 1 - prev_lo)];
  if (!std::isfinite(result.cost)) throw std::logic_error("dtw window disconnected");
  int i = na - 1, j = nb - 1;
  while (true) {
    result.path.emplace_back(i, j);
    const uint8_t move = moves[static_cast<size_t>(i)][static_cast<size_t>(j - lo[static_cast<size_t>(i)])];
    if (move == 0) break;
    if (move != 3) --i;
    if (move != 2) --j;
  }
  std::reverse(result.path.begin(), result.path.end());
  return result;
}

PathResult exact_dtw(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const std::vector<int> lo(static_cast<size_t>(a.rows()), 0);
  const std::vector<int> hi(static_cast<size_t>(a.rows()), static_cast<int>(b.rows()) - 1);
  return windowed_dtw(a, b, lo, hi);
}

Eigen::MatrixXd halve(const Eigen::MatrixXd& m) {
  const Eigen::Index h = m.rows() / 2;
  Eigen::MatrixXd out(h, m.cols());
  for (Eigen::Index i = 0; i < h; ++i) out.row(i) = 0.5 * (m.row(2 * i) + m.row(2 * i + 1));
  return out;
}

// Projects a coarse path onto the fine grid and widens it by the radius.
// Rows the projection misses (odd tails) continue the previous row's end.
void expand_window(const std::vector<std::pair<int, int>>& coarse_path, int na, int nb,
                   int radius, std::vector<int>& lo, std::vector<int>& hi) {
  lo.assign(static_cast<size_t>(na), nb);
  hi.assign(static_cast<size_t>(na), -1);
  for (const auto& [ci, cj] : coarse_path) {
    for (int di = 0; di < 2; ++di) {
      const int i = 2 * ci + di;
      if (i >= na) continue;
      lo[static_cast<size_t>(i)] =
          std::min(lo[static_cast<size_t>(i)], std::max(0, 2 * cj - 2 * radius));
      hi[static_cast<size_t>(i)] =
          std::max(hi[static_cast<size_t>(i)], std::min(nb - 1, 2 * cj + 1 + 2 * radius));
    }
  }
  int prev_hi = 0;
  for (int i = 0; i < na; ++i) {
    if (hi[static_cast<size_t>(i)] < 0) {
      lo[static_cast<size_t>(i)] = prev_hi;
      hi[static_cast<size_t>(i)] = prev_hi;
    } else {
      lo[static_cast<size_t>(i)] = std::min(lo[static_cast<size_t>(i)], prev_hi);
    }
    prev_hi = hi[static_cast<size_t>(i)];
  }
  hi[static_cast<size_t>(na - 1)] = std::max(hi[static_cast<size_t>(na - 1)], nb - 1);
}

PathResult fast_dtw_recursive(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, int radius) {
  if (std::min(a.rows(), b.rows()) <= kExactCutoff) return exact_dtw(a, b);
  const PathResult coarse = fast_dtw_recursive(halve(a), halve(b), radius);
  std::vector<int> lo, hi;
  expand_window(coarse.path, static_cast<int>(a.rows()), static_cast<int>(b.rows()), radius, lo,
                hi);
  return windowed_dtw(a, b, lo, hi);
}

bool lex_less(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      if (x(i, j) != y(i, j)) return x(i, j) < y(i, j);
    }
  }
  return false;
}

bool cell_better(const TuningCell& x, const TuningCell& y) {
  if (x.layers != y.layers) return x.layers < y.layers;
  if (x.beta != y.beta) return x.beta < y.beta;
  return x.mu < y.mu;
}

std::string g_label(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

}  // namespace

DtwScore fast_dtw(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, int radius) {
  if (a.cols() != b.cols()) throw std::invalid_argument("fast_dtw: dimension mismatch");
  if (a.rows() < 1 || b.rows() < 1) throw std::invalid_argument("fast_dtw: empty sequence");
  if (a.cols() < 1) throw std::invalid_argument("fast_dtw: zero-dimensional points");
  if (radius < 0) throw std::invalid_argument("fast_dtw: negative radius");
  if (!a.allFinite() || !b.allFinite()) throw std::invalid_argument("fast_dtw: non-finite input");

  // Argument order must not matter, so pick a canonical one before scoring.
  const Eigen::MatrixXd* first = &a;
  const Eigen::MatrixXd* second = &b;
  if (second->rows() < first->rows() ||
      (second->rows() == first->rows() && lex_less(*second, *first))) {
    std::swap(first, second);
  }

  const PathResult result = fast_dtw_recursive(*first, *second, radius);
  DtwScore score;
  score.raw = result.cost;
  score.path_length = static_cast<int>(result.path.size());
  score.radius = radius;
  if (result.cost == 0.0) {
    score.normalized = 0.0;
  } else {
    const double diam = std::max(diameter(a), diameter(b));
    score.normalized = diam > 0.0 ? result.cost / (score.path_length * diam) : kInf;
  }
  return score;
}

double normalized_mse(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument("normalized_mse: shape mismatch");
  }
  if (a.rows() < 1) throw std::invalid_argument("normalized_mse: empty input");
  const double diam = diameter(b);
  if (diam == 0.0) throw std::invalid_argument("normalized_mse: zero-diameter reference");
  return (a - b).rowwise().squaredNorm().mean() / (diam * diam);
}

int select_cell(const std::vector<TuningCell>& grid, double threshold, std::string* rule,
                int* lowest_mse) {
  if (grid.empty()) throw std::invalid_argument("select_cell: empty grid");
  int lowest = -1;
  for (size_t i = 0; i < grid.size(); ++i) {
    if (!grid[i].ok) continue;
    if (lowest < 0 || grid[i].mse < grid[static_cast<size_t>(lowest)].mse) {
      lowest = static_cast<int>(i);
    }
  }
  if (lowest < 0) throw std::runtime_error("select_cell: every grid cell failed");
  if (lowest_mse) *lowest_mse = lowest;

  int base = -1;
  for (size_t i = 0; i < grid.size(); ++i) {
    if (!grid[i].ok || !(grid[i].mse < threshold)) continue;
    if (base < 0 || cell_better(grid[i], grid[static_cast<size_t>(base)])) {
      base = static_cast<int>(i);
    }
  }
  if (base < 0) {
    if (rule) *rule = "global-min-mse";
    return lowest;
  }

  // A deeper stack wins only when it buys an order of magnitude of accuracy
  // at no more than half again the layer count.
  const TuningCell& base_cell = grid[static_cast<size_t>(base)];
  int upgrade = -1;
  for (size_t i = 0; i < grid.size(); ++i) {
    const TuningCell& cell = grid[i];
    if (!cell.ok || !(cell.mse < threshold)) continue;
    if (cell.layers <= base_cell.layers || 2 * cell.layers > 3 * base_cell.layers) continue;
    if (!(cell.mse <= base_cell.mse / 10.0)) continue;
    if (upgrade < 0 || cell.mse < grid[static_cast<size_t>(upgrade)].mse ||
        (cell.mse == grid[static_cast<size_t>(upgrade)].mse &&
         cell_better(cell, grid[static_cast<size_t>(upgrade)]))) {
      upgrade = static_cast<int>(i);
    }
  }
  if (upgrade >= 0) {
    if (rule) *rule = "threshold-min-layers-override";
    return upgrade;
  }
  if (rule) *rule = "threshold-min-layers";
  return base;
}

TuningReport grid_search(const demogen::Demonstration& demo,
                         const Eigen::MatrixXd& embedding_aligned, const std::vector<double>& mus,
                         const std::vector<double>& betas, const std::vector<int>& layer_budgets,
                         double threshold, int n_jobs) {
  if (mus.empty() || betas.empty() || layer_budgets.empty()) {
    throw std::invalid_argument("grid_search: empty grid axis");
  }
  if (!(threshold > 0.0)) throw std::invalid_argument("grid_search: threshold must be positive");
  if (n_jobs < 1) throw std::invalid_argument("grid_search: n_jobs must be positive");
  if (embedding_aligned.rows() != demo.points.rows() ||
      embedding_aligned.cols() != demo.points.cols()) {
    throw std::invalid_argument("grid_search: embedding and demonstration shapes differ");
  }

  std::vector<double> mu_axis = mus;
  std::vector<double> beta_axis = betas;
  std::vector<int> budget_axis = layer_budgets;
  std::sort(mu_axis.begin(), mu_axis.end());
  std::sort(beta_axis.begin(), beta_axis.end());
  std::sort(budget_axis.begin(), budget_axis.end());

  TuningReport report;
  report.threshold = threshold;
  for (double mu : mu_axis) {
    for (double beta : beta_axis) {
      for (int budget : budget_axis) {
        TuningCell cell;
        cell.mu = mu;
        cell.beta = beta;
        cell.budget = budget;
        report.grid.push_back(std::move(cell));
      }
    }
  }

  auto evaluate = [&](TuningCell& cell) {
    try {
      const diffeo_fdm::DiffeoModel model =
          diffeo_fdm::fit(embedding_aligned, demo.points, cell.mu, cell.beta, cell.budget, 0.0);
      cell.layers = static_cast<int>(model.layers.size());
      cell.mse = model.normalized_mse;
      cell.ok = true;
    } catch (const std::exception& e) {
      cell.ok = false;
      cell.error = e.what();
      cell.mse = kInf;
    }
  };

  const size_t workers =
      std::min(static_cast<size_t>(n_jobs), report.grid.size());
  if (workers <= 1) {
    for (TuningCell& cell : report.grid) evaluate(cell);
  } else {
    std::atomic<size_t> next{0};
    auto drain = [&]() {
      while (true) {
        const size_t idx = next.fetch_add(1);
        if (idx >= report.grid.size()) break;
        evaluate(report.grid[idx]);
      }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (size_t w = 0; w < workers; ++w) pool.emplace_back(drain);
    for (std::thread& t : pool) t.join();
  }

  report.selected = select_cell(report.grid, threshold, &report.selection_rule, &report.lowest_mse);
  return report;
}

std::string to_json(const TuningReport& report) {
  nlohmann::json j;
  j["grid"] = nlohmann::json::array();
  for (const TuningCell& cell : report.grid) {
    nlohmann::json cj;
    cj["mu"] = cell.mu;
    cj["beta"] = cell.beta;
    cj["budget"] = cell.budget;
    cj["layers"] = cell.layers;
    cj["mse"] = cell.mse;
    cj["ok"] = cell.ok;
    cj["error"] = cell.error;
    j["grid"].push_back(cj);
  }
  j["selected"] = report.selected;
  j["lowest_mse"] = report.lowest_mse;
  j["selection_rule"] = report.selection_rule;
  j["threshold"] = report.threshold;
  return j.dump(2) + "\n";
}

std::vector<std::string> write_heatmaps(const TuningReport& report, const std::string& dir) {
  std::filesystem::create_directories(dir);
  std::vector<int> budgets;
  std::vector<double> mu_axis, beta_axis;
  for (const TuningCell& cell : report.grid) {
    budgets.push_back(cell.budget);
    mu_axis.push_back(cell.mu);
    beta_axis.push_back(cell.beta);
  }
  auto unique_sorted = [](auto& v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  };
  unique_sorted(budgets);
  unique_sorted(mu_axis);
  unique_sorted(beta_axis);

  std::vector<std::string> paths;
  for (int budget : budgets) {
    const std::string path =
        (std::filesystem::path(dir) / ("heatmap_M" + std::to_string(budget) + ".csv")).string();
    std::ofstream out(path);
    if (!out) throw std::invalid_argument("cannot write '" + path + "'");
    out << "mu";
    for (double beta : beta_axis) out << ",beta=" << g_label(beta);
    out << "\n";
    for (double mu : mu_axis) {
      out << g_label(mu);
      for (double beta : beta_axis) {
        const TuningCell* found = nullptr;
        for (const TuningCell& cell : report.grid) {
          if (cell.budget == budget && cell.mu == mu && cell.beta == beta) {
            found = &cell;
            break;
          }
        }
        out << ",";
        if (found && found->ok) out << detail::g17(found->mse);
        else out << "nan";
      }
      out << "\n";
    }
    if (!out) throw std::invalid_argument("write failed for '" + path + "'");
    paths.push_back(path);
  }
  return paths;
}

}  // namespace latentds::evalkit
