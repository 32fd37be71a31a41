#include "latentds/ds_runtime.hpp"

#include <fstream>
#include <stdexcept>

#include "json.hpp"
#include "latentds/detail/num_format.hpp"

namespace latentds::ds_runtime {

Eigen::VectorXd latent_velocity(const LatentDS& ds, const Eigen::VectorXd& x) {
  if (ds.rate <= 0.0) throw std::invalid_argument("latent_velocity: rate must be positive");
  if (x.size() != ds.attractor.size()) {
    throw std::invalid_argument("latent_velocity: dimension mismatch");
  }
  return ds.rate * (ds.attractor - x);
}

Eigen::VectorXd demo_velocity(const diffeo_fdm::DiffeoModel& model, const LatentDS& ds,
                              const Eigen::VectorXd& x) {
  return diffeo_fdm::jacobian(model, x) * latent_velocity(ds, x);
}

RolloutTrace rollout(const diffeo_fdm::DiffeoModel& model, const LatentDS& ds,
                     const Eigen::VectorXd& y0, double dt, double t_max, double eps) {
  if (ds.rate <= 0.0) throw std::invalid_argument("rollout: rate must be positive");
  if (dt <= 0.0) throw std::invalid_argument("rollout: dt must be positive");
  if (eps <= 0.0) throw std::invalid_argument("rollout: eps must be positive");
  if (y0.size() != ds.attractor.size()) throw std::invalid_argument("rollout: dimension mismatch");
  const double horizon = t_max > 0.0 ? t_max : 50.0 / ds.rate;
  if (dt >= horizon) throw std::invalid_argument("rollout: dt must be below t_max");

  const Eigen::VectorXd y_star = diffeo_fdm::forward(model, ds.attractor);
  Eigen::VectorXd x = diffeo_fdm::inverse(model, y0, 1e-10, 1000);
  auto g = [&](const Eigen::VectorXd& p) -> Eigen::VectorXd { return ds.rate * (ds.attractor - p); };

  std::vector<double> times;
  std::vector<Eigen::VectorXd> positions;
  std::vector<Eigen::VectorXd> velocities;
  bool converged = false;
  double final_distance = 0.0;
  for (int step = 0;; ++step) {
    const double t = step * dt;
    auto [y, jac] = diffeo_fdm::forward_with_jacobian(model, x);
    times.push_back(t);
    positions.push_back(y);
    velocities.push_back(jac * g(x));

    final_distance = (y - y_star).norm();
    if (final_distance <= eps) {
      converged = true;
      break;
    }
    if (t >= horizon) break;

    const Eigen::VectorXd k1 = g(x);
    const Eigen::VectorXd k2 = g(x + (0.5 * dt) * k1);
    const Eigen::VectorXd k3 = g(x + (0.5 * dt) * k2);
    const Eigen::VectorXd k4 = g(x + dt * k3);
    x += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }

  RolloutTrace trace;
  trace.times = std::move(times);
  trace.converged = converged;
  trace.final_distance = final_distance;
  const Eigen::Index rows = static_cast<Eigen::Index>(trace.times.size());
  trace.positions.resize(rows, y0.size());
  trace.velocities.resize(rows, y0.size());
  for (Eigen::Index i = 0; i < rows; ++i) {
    trace.positions.row(i) = positions[static_cast<size_t>(i)];
    trace.velocities.row(i) = velocities[static_cast<size_t>(i)];
  }
  return trace;
}

void save_trace(const RolloutTrace& trace, const std::string& path) {
  if (trace.positions.rows() != static_cast<Eigen::Index>(trace.times.size()) ||
      trace.velocities.rows() != trace.positions.rows() ||
      trace.velocities.cols() != trace.positions.cols()) {
    throw std::invalid_argument("save_trace: inconsistent trace shapes");
  }
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot write '" + path + "'");
  const Eigen::Index n = trace.positions.cols();
  out << "time";
  for (Eigen::Index j = 0; j < n; ++j) out << ",y_" << (j + 1);
  for (Eigen::Index j = 0; j < n; ++j) out << ",v_" << (j + 1);
  out << "\n";
  for (Eigen::Index i = 0; i < trace.positions.rows(); ++i) {
    out << detail::g17(trace.times[static_cast<size_t>(i)]);
    for (Eigen::Index j = 0; j < n; ++j) out << "," << detail::g17(trace.positions(i, j));
    for (Eigen::Index j = 0; j < n; ++j) out << "," << detail::g17(trace.velocities(i, j));
    out << "\n";
  }
  if (!out) throw std::invalid_argument("write failed for '" + path + "'");
}

std::string summary_json(const RolloutTrace& trace) {
  nlohmann::json j;
  j["converged"] = trace.converged;
  j["final_distance"] = trace.final_distance;
  j["steps"] = trace.n_samples();
  return j.dump(2) + "\n";
}

}  // namespace latentds::ds_runtime
