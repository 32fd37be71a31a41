#include "latentds/diffeo_fdm.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "latentds/geometry.hpp"

namespace latentds::diffeo_fdm {
namespace {

const double kSqrtE = std::exp(0.5);

double kernel(double dist2, double width) { return std::exp(-dist2 / (2.0 * width * width)); }

// Width candidates as multiples of the current worst residual norm.
std::vector<double> width_factors() {
  std::vector<double> factors;
  double f = 0.03;
  for (int i = 0; i < 15; ++i) {
    factors.push_back(f);
    f *= 1.45;
  }
  return factors;
}

double mse_against(const Eigen::MatrixXd& pts, const Eigen::MatrixXd& target, double inv_diam2) {
  return (pts - target).rowwise().squaredNorm().mean() * inv_diam2;
}

void check_meta(const SetMeta& meta) {
  if (meta.n_points < 0 || meta.n_dims < 0) throw std::invalid_argument("negative meta sizes");
}

nlohmann::json vec_to_json(const Eigen::VectorXd& v) {
  nlohmann::json arr = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

Eigen::VectorXd vec_from_json(const nlohmann::json& arr, const char* what) {
  if (!arr.is_array()) throw std::invalid_argument(std::string("model JSON: ") + what + " is not an array");
  Eigen::VectorXd v(arr.size());
  for (size_t i = 0; i < arr.size(); ++i) {
    if (!arr[i].is_number()) throw std::invalid_argument(std::string("model JSON: ") + what + " holds a non-number");
    v[static_cast<Eigen::Index>(i)] = arr[i].get<double>();
  }
  return v;
}

nlohmann::json meta_to_json(const SetMeta& meta) {
  nlohmann::json j;
  j["n_points"] = meta.n_points;
  j["n_dims"] = meta.n_dims;
  j["provenance"] = meta.provenance;
  j["start"] = vec_to_json(meta.start);
  j["attractor"] = vec_to_json(meta.attractor);
  return j;
}

SetMeta meta_from_json(const nlohmann::json& j) {
  SetMeta meta;
  meta.n_points = j.at("n_points").get<int>();
  meta.n_dims = j.at("n_dims").get<int>();
  meta.provenance = j.at("provenance").get<std::string>();
  meta.start = vec_from_json(j.at("start"), "meta start");
  meta.attractor = vec_from_json(j.at("attractor"), "meta attractor");
  check_meta(meta);
  return meta;
}

}  // namespace

DiffeoModel fit(const Eigen::MatrixXd& source, const Eigen::MatrixXd& target,
                double mu, double beta, int max_layers, double mse_stop) {
  if (source.rows() != target.rows() || source.cols() != target.cols()) {
    throw std::invalid_argument("fit: source and target shapes differ");
  }
  if (source.rows() < 1) throw std::invalid_argument("fit: empty training pair");
  if (!source.allFinite() || !target.allFinite()) {
    throw std::invalid_argument("fit: non-finite training data");
  }
  if (!(mu > 0.0 && mu < 1.0)) throw std::invalid_argument("fit: mu must lie in (0, 1)");
  if (!(beta > 0.0 && beta <= 1.0)) throw std::invalid_argument("fit: beta must lie in (0, 1]");
  if (max_layers < 0) throw std::invalid_argument("fit: negative layer budget");
  if (mse_stop < 0.0) throw std::invalid_argument("fit: negative mse_stop");

  DiffeoModel model;
  model.mu = mu;
  model.beta = beta;
  model.source_meta = {static_cast<int>(source.rows()), static_cast<int>(source.cols()), "",
                       source.row(0), source.row(source.rows() - 1)};
  model.target_meta = {static_cast<int>(target.rows()), static_cast<int>(target.cols()), "",
                       target.row(0), target.row(target.rows() - 1)};

  if ((source - target).rowwise().norm().maxCoeff() == 0.0) {
    model.normalized_mse = 0.0;
    return model;
  }
  const double diam = diameter(target);
  if (diam == 0.0) throw std::invalid_argument("fit: zero-diameter target cannot be normalized");
  const double inv_diam2 = 1.0 / (diam * diam);

  static const std::vector<double> factors = width_factors();
  Eigen::MatrixXd current = source;
  double current_mse = mse_against(current, target, inv_diam2);

  for (int layer = 0; layer < max_layers; ++layer) {
    if (current_mse <= mse_stop) break;

    const Eigen::VectorXd norms = (target - current).rowwise().norm();
    Eigen::Index p = 0;
    norms.maxCoeff(&p);
    const double rmax = norms[p];
    if (rmax == 0.0) break;

    const Eigen::VectorXd center = current.row(p);
    const Eigen::VectorXd residual = target.row(p) - current.row(p);
    const Eigen::VectorXd dist2 = (current.rowwise() - center.transpose()).rowwise().squaredNorm();

    struct Candidate {
      double mse = 0.0;
      double width = 0.0;
      Eigen::VectorXd translation;
      Eigen::MatrixXd deformed;
    };
    Candidate best;
    bool have_best = false;
    auto try_width = [&](double width) {
      Eigen::VectorXd v = beta * residual;
      const double cap = mu * width * kSqrtE;
      const double vnorm = v.norm();
      if (vnorm > cap) v *= cap / vnorm;
      const Eigen::VectorXd k = (-dist2.array() / (2.0 * width * width)).exp();
      Eigen::MatrixXd deformed = current + k * v.transpose();
      const double mse = mse_against(deformed, target, inv_diam2);
      if (!have_best || mse < best.mse) {
        best = {mse, width, std::move(v), std::move(deformed)};
        have_best = true;
      }
    };
    for (double f : factors) try_width(f * rmax);
    const double base = best.width;
    try_width(base / 1.2);
    try_width(base * 1.2);

    if (best.mse > current_mse) break;
    model.layers.push_back({center, best.translation, best.width});
    current = std::move(best.deformed);
    current_mse = best.mse;
  }

  model.normalized_mse = current_mse;
  return model;
}

Eigen::VectorXd forward(const DiffeoModel& model, const Eigen::VectorXd& x) {
  Eigen::VectorXd out = x;
  for (const DiffeoLayer& layer : model.layers) {
    out += layer.translation * kernel((out - layer.center).squaredNorm(), layer.width);
  }
  return out;
}

Eigen::MatrixXd forward(const DiffeoModel& model, const Eigen::MatrixXd& xs) {
  Eigen::MatrixXd out = xs;
  for (const DiffeoLayer& layer : model.layers) {
    const Eigen::VectorXd dist2 =
        (out.rowwise() - layer.center.transpose()).rowwise().squaredNorm();
    const Eigen::VectorXd k = (-dist2.array() / (2.0 * layer.width * layer.width)).exp();
    out += k * layer.translation.transpose();
  }
  return out;
}

Eigen::VectorXd inverse(const DiffeoModel& model, const Eigen::VectorXd& y,
                        double tol, int max_iter) {
  if (tol <= 0.0) throw std::invalid_argument("inverse: tol must be positive");
  if (max_iter < 1) throw std::invalid_argument("inverse: max_iter must be positive");
  Eigen::VectorXd out = y;
  for (auto it = model.layers.rbegin(); it != model.layers.rend(); ++it) {
    Eigen::VectorXd x = out;
    bool converged = false;
    for (int i = 0; i < max_iter; ++i) {
      const Eigen::VectorXd next =
          out - it->translation * kernel((x - it->center).squaredNorm(), it->width);
      const double step = (next - x).norm();
      x = next;
      if (step <= tol) {
        converged = true;
        break;
      }
    }
    if (!converged) {
      const double residual =
          (x + it->translation * kernel((x - it->center).squaredNorm(), it->width) - out).norm();
      std::ostringstream msg;
      msg << "inverse: fixed point not within " << tol << " after " << max_iter
          << " iterations (residual " << residual << ")";
      throw inversion_error(msg.str());
    }
    out = x;
  }
  return out;
}

Eigen::MatrixXd jacobian(const DiffeoModel& model, const Eigen::VectorXd& x) {
  return forward_with_jacobian(model, x).second;
}

std::pair<Eigen::VectorXd, Eigen::MatrixXd> forward_with_jacobian(const DiffeoModel& model,
                                                                  const Eigen::VectorXd& x) {
  const Eigen::Index n = x.size();
  Eigen::VectorXd pos = x;
  Eigen::MatrixXd jac = Eigen::MatrixXd::Identity(n, n);
  for (const DiffeoLayer& layer : model.layers) {
    const Eigen::VectorXd d = pos - layer.center;
    const double k = kernel(d.squaredNorm(), layer.width);
    const double w2 = layer.width * layer.width;
    jac = (Eigen::MatrixXd::Identity(n, n) - (k / w2) * layer.translation * d.transpose()) * jac;
    pos += layer.translation * k;
  }
  return {pos, jac};
}

std::string to_json(const DiffeoModel& model) {
  nlohmann::json j;
  j["version"] = 1;
  j["mu"] = model.mu;
  j["beta"] = model.beta;
  j["normalized_mse"] = model.normalized_mse;
  j["layers"] = nlohmann::json::array();
  for (const DiffeoLayer& layer : model.layers) {
    nlohmann::json lj;
    lj["center"] = vec_to_json(layer.center);
    lj["translation"] = vec_to_json(layer.translation);
    lj["width"] = layer.width;
    j["layers"].push_back(lj);
  }
  j["meta"]["source"] = meta_to_json(model.source_meta);
  j["meta"]["target"] = meta_to_json(model.target_meta);
  return j.dump(2) + "\n";
}

DiffeoModel from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("model JSON parse failure: ") + e.what());
  }
  try {
    if (j.at("version").get<int>() != 1) throw std::invalid_argument("unsupported model version");
    DiffeoModel model;
    model.mu = j.at("mu").get<double>();
    model.beta = j.at("beta").get<double>();
    model.normalized_mse = j.at("normalized_mse").get<double>();
    for (const nlohmann::json& lj : j.at("layers")) {
      DiffeoLayer layer;
      layer.center = vec_from_json(lj.at("center"), "layer center");
      layer.translation = vec_from_json(lj.at("translation"), "layer translation");
      layer.width = lj.at("width").get<double>();
      if (!(layer.width > 0.0)) throw std::invalid_argument("model JSON: non-positive layer width");
      if (layer.translation.norm() / (layer.width * kSqrtE) > model.mu * (1.0 + 1e-12)) {
        throw std::invalid_argument("model JSON: layer violates the invertibility bound");
      }
      model.layers.push_back(std::move(layer));
    }
    model.source_meta = meta_from_json(j.at("meta").at("source"));
    model.target_meta = meta_from_json(j.at("meta").at("target"));
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("model JSON structure failure: ") + e.what());
  }
}

void save_model(const DiffeoModel& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot write '" + path + "'");
  out << to_json(model);
  if (!out) throw std::invalid_argument("write failed for '" + path + "'");
}

DiffeoModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_json(buf.str());
}

}  // namespace latentds::diffeo_fdm
