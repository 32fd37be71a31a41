#include "latentds/demogen.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <stdexcept>

#include "latentds/detail/num_format.hpp"

namespace latentds::demogen {
namespace {

constexpr double kPi = 3.14159265358979323846;

std::string fmt_short(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

Eigen::Vector3d sphere_point(double theta, double psi) {
  return {std::sin(theta) * std::cos(psi), std::sin(theta) * std::sin(psi), std::cos(theta)};
}

// 53-bit uniform in [0, 1); mt19937_64 has a standard-fixed sequence.
double next_unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r' && ch != ' ' && ch != '\t') {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

double parse_value(const std::string& token, long line_no) {
  double v = 0.0;
  const char* first = token.data();
  const char* last = token.data() + token.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{} || ptr != last) {
    throw std::invalid_argument("line " + std::to_string(line_no) + ": malformed value '" + token + "'");
  }
  if (!std::isfinite(v)) {
    throw std::invalid_argument("line " + std::to_string(line_no) + ": non-finite value '" + token + "'");
  }
  return v;
}

}  // namespace

void validate(const Demonstration& demo) {
  if (demo.points.rows() < 3) throw std::invalid_argument("demonstration needs at least 3 points");
  if (demo.points.cols() < 1) throw std::invalid_argument("demonstration needs at least 1 dimension");
  if (!demo.points.allFinite()) throw std::invalid_argument("demonstration has non-finite positions");
  if (demo.velocities) {
    if (demo.velocities->rows() != demo.points.rows() || demo.velocities->cols() != demo.points.cols()) {
      throw std::invalid_argument("velocity matrix shape does not match positions");
    }
    if (!demo.velocities->allFinite()) throw std::invalid_argument("demonstration has non-finite velocities");
  }
  if (demo.dt && *demo.dt <= 0.0) throw std::invalid_argument("dt must be positive");
}

Demonstration unstable_spiral(double c, int n_samples) {
  if (c <= 0.0) throw std::invalid_argument("unstable_spiral: c must be positive");
  if (n_samples < 3) throw std::invalid_argument("unstable_spiral: need at least 3 samples");
  const double t_end = 3.14;
  Demonstration demo;
  demo.points.resize(n_samples, 3);
  for (int i = 0; i < n_samples; ++i) {
    const double t = t_end * static_cast<double>(i) / static_cast<double>(n_samples - 1);
    demo.points(i, 0) = std::sin(t) * std::cos(c * t);
    demo.points(i, 1) = std::sin(t) * std::sin(c * t);
    demo.points(i, 2) = std::cos(t);
  }
  demo.dt = t_end / static_cast<double>(n_samples - 1);
  demo.label = "unstable-spiral-c" + fmt_short(c);
  return demo;
}

Demonstration stable_spiral(double c) {
  if (c <= 0.0) throw std::invalid_argument("stable_spiral: c must be positive");
  const double h = 0.003;
  const double gain = 0.3;
  const double stop = 1e-2;
  const double settle = 1e-6;
  const long max_steps = 2000000;

  double theta = 0.1;
  double psi = 0.0;
  std::vector<Eigen::Vector3d> pts;
  pts.push_back(sphere_point(theta, psi));
  double prev_step = -1.0;
  bool done = false;
  for (long k = 0; k < max_steps && !done; ++k) {
    theta += h * gain * (kPi - theta);
    psi += h * gain * (2.0 * c * kPi - psi);
    const Eigen::Vector3d p = sphere_point(theta, psi);
    const double step = (p - pts.back()).norm();
    pts.push_back(p);
    done = (prev_step >= stop && step < stop) || step < settle;
    prev_step = step;
  }
  if (!done) throw std::runtime_error("stable_spiral: trajectory did not settle");

  Demonstration demo;
  demo.points.resize(static_cast<Eigen::Index>(pts.size()), 3);
  for (size_t i = 0; i < pts.size(); ++i) demo.points.row(static_cast<Eigen::Index>(i)) = pts[i];
  demo.dt = h;
  demo.label = "stable-spiral-c" + fmt_short(c);
  return demo;
}

Demonstration archimedean_spiral(int n_samples) {
  if (n_samples < 3) throw std::invalid_argument("archimedean_spiral: need at least 3 samples");
  const double theta_goal = 3.0 * kPi;
  const double radius_end = 0.1;
  const double t_end = 12.0;
  Demonstration demo;
  demo.points.resize(n_samples, 2);
  for (int i = 0; i < n_samples; ++i) {
    const double s = static_cast<double>(i) / static_cast<double>(n_samples - 1);
    const double theta = theta_goal * s;
    const double r = radius_end * s;
    demo.points(i, 0) = r * std::cos(theta);
    demo.points(i, 1) = r * std::sin(theta);
  }
  demo.dt = t_end / static_cast<double>(n_samples - 1);
  demo.label = "archimedean-spiral";
  return demo;
}

Eigen::MatrixXd resample_uniform(const Eigen::MatrixXd& points, int n_out) {
  if (points.rows() < 2) throw std::invalid_argument("resample_uniform: need at least 2 input points");
  if (n_out < 2) throw std::invalid_argument("resample_uniform: need at least 2 output points");
  const Eigen::Index n_in = points.rows();
  Eigen::MatrixXd out(n_out, points.cols());
  for (int j = 0; j < n_out; ++j) {
    const double s = static_cast<double>(j) * static_cast<double>(n_in - 1) / static_cast<double>(n_out - 1);
    Eigen::Index i0 = static_cast<Eigen::Index>(std::floor(s));
    if (i0 > n_in - 2) i0 = n_in - 2;
    const double f = s - static_cast<double>(i0);
    out.row(j) = (1.0 - f) * points.row(i0) + f * points.row(i0 + 1);
  }
  out.row(0) = points.row(0);
  out.row(n_out - 1) = points.row(n_in - 1);
  return out;
}

std::vector<Eigen::VectorXd> perturb_starts(const Eigen::VectorXd& y0, double radius,
                                            int count, std::uint64_t seed) {
  if (radius <= 0.0) throw std::invalid_argument("perturb_starts: radius must be positive");
  if (count < 1) throw std::invalid_argument("perturb_starts: count must be at least 1");
  if (y0.size() < 1) throw std::invalid_argument("perturb_starts: empty base point");

  std::mt19937_64 rng(seed);
  auto gaussian = [&rng]() {
    double u1 = 0.0;
    do {
      u1 = next_unit(rng);
    } while (u1 <= 0.0);
    const double u2 = next_unit(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
  };

  const Eigen::Index n = y0.size();
  std::vector<Eigen::VectorXd> out;
  out.reserve(static_cast<size_t>(count));
  for (int i = 0; i < count; ++i) {
    Eigen::VectorXd dir(n);
    for (Eigen::Index d = 0; d < n; ++d) dir[d] = gaussian();
    const double norm = dir.norm();
    if (norm == 0.0) {
      dir.setZero();
      dir[0] = 1.0;
    } else {
      dir /= norm;
    }
    const double r = radius * std::pow(next_unit(rng), 1.0 / static_cast<double>(n));
    out.push_back(y0 + r * dir);
  }
  return out;
}

Demonstration load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open '" + path + "'");

  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("'" + path + "' is empty");
  const std::vector<std::string> header = split_csv_line(line);

  size_t col = 0;
  const bool has_time = !header.empty() && header[0] == "time";
  if (has_time) col = 1;
  int n = 0;
  while (col < header.size() && header[col] == "y_" + std::to_string(n + 1)) {
    ++n;
    ++col;
  }
  if (n == 0) throw std::invalid_argument("header must list position columns y_1..y_n");
  int nv = 0;
  while (col < header.size() && header[col] == "v_" + std::to_string(nv + 1)) {
    ++nv;
    ++col;
  }
  if (col != header.size()) {
    throw std::invalid_argument("unrecognized column '" + header[col] + "'");
  }
  if (nv != 0 && nv != n) {
    throw std::invalid_argument("velocity columns must match position columns");
  }

  std::vector<double> times;
  std::vector<std::vector<double>> rows;
  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const std::vector<std::string> tok = split_csv_line(line);
    if (tok.size() != header.size()) {
      throw std::invalid_argument("line " + std::to_string(line_no) + ": expected " +
                                  std::to_string(header.size()) + " columns, got " +
                                  std::to_string(tok.size()));
    }
    std::vector<double> vals;
    vals.reserve(tok.size());
    for (const std::string& t : tok) vals.push_back(parse_value(t, line_no));
    if (has_time) {
      times.push_back(vals.front());
      vals.erase(vals.begin());
    }
    rows.push_back(std::move(vals));
  }

  Demonstration demo;
  demo.points.resize(static_cast<Eigen::Index>(rows.size()), n);
  if (nv > 0) demo.velocities = Eigen::MatrixXd(static_cast<Eigen::Index>(rows.size()), n);
  for (size_t i = 0; i < rows.size(); ++i) {
    for (int j = 0; j < n; ++j) demo.points(static_cast<Eigen::Index>(i), j) = rows[i][static_cast<size_t>(j)];
    if (nv > 0) {
      for (int j = 0; j < n; ++j) {
        (*demo.velocities)(static_cast<Eigen::Index>(i), j) = rows[i][static_cast<size_t>(n + j)];
      }
    }
  }
  if (times.size() >= 2) demo.dt = times[1] - times[0];
  demo.label = std::filesystem::path(path).stem().string();
  validate(demo);
  return demo;
}

void save_csv(const Demonstration& demo, const std::string& path) {
  validate(demo);
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot write '" + path + "'");

  const Eigen::Index n = demo.points.cols();
  if (demo.dt) out << "time,";
  for (Eigen::Index j = 0; j < n; ++j) out << "y_" << (j + 1) << (j + 1 < n ? "," : "");
  if (demo.velocities) {
    for (Eigen::Index j = 0; j < n; ++j) out << ",v_" << (j + 1);
  }
  out << "\n";
  for (Eigen::Index i = 0; i < demo.points.rows(); ++i) {
    if (demo.dt) out << detail::g17(static_cast<double>(i) * *demo.dt) << ",";
    for (Eigen::Index j = 0; j < n; ++j) {
      out << detail::g17(demo.points(i, j)) << (j + 1 < n ? "," : "");
    }
    if (demo.velocities) {
      for (Eigen::Index j = 0; j < n; ++j) out << "," << detail::g17((*demo.velocities)(i, j));
    }
    out << "\n";
  }
  if (!out) throw std::invalid_argument("write failed for '" + path + "'");
}

}  // namespace latentds::demogen
