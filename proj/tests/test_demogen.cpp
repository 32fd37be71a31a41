#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "latentds/demogen.hpp"

using namespace latentds;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "latentds_demogen_tests";
  fs::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("unstable spiral starts upright and keeps its shape") {
  const demogen::Demonstration demo = demogen::unstable_spiral(7.0, 500);
  CHECK(demo.points.rows() == 500);
  CHECK(demo.points.cols() == 3);
  CHECK(demo.points(0, 0) == 0.0);
  CHECK(demo.points(0, 1) == 0.0);
  CHECK(demo.points(0, 2) == 1.0);
  CHECK(demo.points.allFinite());
  CHECK(demo.label == "unstable-spiral-c7");
  REQUIRE(demo.dt.has_value());
  CHECK(*demo.dt == doctest::Approx(3.14 / 499.0));

  const demogen::Demonstration other = demogen::unstable_spiral(1.0, 500);
  CHECK((demo.points - other.points).cwiseAbs().maxCoeff() > 0.1);
}

TEST_CASE("unstable spiral rejects bad arguments") {
  CHECK_THROWS_AS(demogen::unstable_spiral(1.0, 1), std::invalid_argument);
  CHECK_THROWS_AS(demogen::unstable_spiral(-1.0, 100), std::invalid_argument);
}

TEST_CASE("stable spiral stops at the step-size crossing") {
  const demogen::Demonstration demo = demogen::stable_spiral(3.0);
  CHECK(demo.points.rows() == 568);
  CHECK(demo.points.cols() == 3);
  const Eigen::Index last = demo.points.rows() - 1;
  const double final_step = (demo.points.row(last) - demo.points.row(last - 1)).norm();
  const double prev_step = (demo.points.row(last - 1) - demo.points.row(last - 2)).norm();
  CHECK(final_step < 1e-2);
  CHECK(prev_step >= 1e-2);

  const demogen::Demonstration wide = demogen::stable_spiral(7.0);
  CHECK(wide.points.rows() == 1301);
}

TEST_CASE("archimedean spiral is linear in angle and radius") {
  const demogen::Demonstration demo = demogen::archimedean_spiral(400);
  CHECK(demo.points.rows() == 400);
  CHECK(demo.points.cols() == 2);
  Eigen::VectorXd r(demo.points.rows());
  for (Eigen::Index i = 0; i < demo.points.rows(); ++i) r[i] = demo.points.row(i).norm();
  CHECK(r[r.size() - 1] == doctest::Approx(0.1).epsilon(1e-12));
  const double dr = r[1] - r[0];
  for (Eigen::Index i = 1; i + 1 < r.size(); ++i) {
    CHECK(r[i + 1] - r[i] == doctest::Approx(dr).epsilon(1e-9));
  }
  REQUIRE(demo.dt.has_value());
  CHECK(*demo.dt == doctest::Approx(12.0 / 399.0));
}

TEST_CASE("resample keeps endpoints exactly and interpolates lines") {
  Eigen::MatrixXd line(5, 2);
  for (int i = 0; i < 5; ++i) line.row(i) << 2.0 * i, -1.0 * i;
  const Eigen::MatrixXd dense = demogen::resample_uniform(line, 9);
  CHECK(dense.rows() == 9);
  CHECK(dense.row(0) == line.row(0));
  CHECK(dense.row(8) == line.row(4));
  for (Eigen::Index i = 0; i < dense.rows(); ++i) {
    CHECK(dense(i, 1) == doctest::Approx(-0.5 * dense(i, 0)).epsilon(1e-12));
  }
  const Eigen::MatrixXd same = demogen::resample_uniform(line, 5);
  CHECK((same - line).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("perturbed starts are deterministic and inside the ball") {
  Eigen::VectorXd y0(3);
  y0 << 0.0, 0.0, 1.0;
  const auto starts = demogen::perturb_starts(y0, 0.1, 20, 42);
  REQUIRE(starts.size() == 20);
  double max_off = 0.0;
  for (const Eigen::VectorXd& s : starts) {
    REQUIRE(s.size() == 3);
    const double off = (s - y0).norm();
    CHECK(off <= 0.1);
    max_off = std::max(max_off, off);
  }
  CHECK(max_off > 0.05);  // not collapsed onto the center

  const auto again = demogen::perturb_starts(y0, 0.1, 20, 42);
  for (size_t i = 0; i < starts.size(); ++i) CHECK(starts[i] == again[i]);
  const auto reseeded = demogen::perturb_starts(y0, 0.1, 20, 43);
  CHECK((reseeded[0] - starts[0]).norm() > 0.0);
}

TEST_CASE("csv round trip preserves every bit") {
  demogen::Demonstration demo = demogen::unstable_spiral(3.0, 77);
  Eigen::MatrixXd vel = Eigen::MatrixXd::Random(77, 3);
  demo.velocities = vel;
  const fs::path path = temp_file("roundtrip.csv");
  demogen::save_csv(demo, path.string());

  const demogen::Demonstration back = demogen::load_csv(path.string());
  CHECK(back.points == demo.points);
  REQUIRE(back.velocities.has_value());
  CHECK(*back.velocities == vel);
  REQUIRE(back.dt.has_value());
  CHECK(*back.dt == *demo.dt);
  CHECK(back.label == "roundtrip");
}

TEST_CASE("csv loader accepts position-only files without time") {
  const fs::path path = temp_file("bare.csv");
  std::ofstream out(path);
  out << "y_1,y_2\n0,1\n2,3\n4,5\n";
  out.close();
  const demogen::Demonstration demo = demogen::load_csv(path.string());
  CHECK(demo.points.rows() == 3);
  CHECK(demo.points.cols() == 2);
  CHECK_FALSE(demo.dt.has_value());
  CHECK_FALSE(demo.velocities.has_value());
  CHECK(demo.points(2, 1) == 5.0);
}

TEST_CASE("csv loader names the offending line") {
  const fs::path path = temp_file("broken.csv");
  std::ofstream out(path);
  out << "y_1,y_2\n0,1\n2,oops\n";
  out.close();
  try {
    demogen::load_csv(path.string());
    FAIL("expected a parse error");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
}

TEST_CASE("csv loader rejects malformed headers and missing files") {
  const fs::path path = temp_file("badheader.csv");
  std::ofstream out(path);
  out << "y_1,y_3\n0,1\n";
  out.close();
  CHECK_THROWS_AS(demogen::load_csv(path.string()), std::invalid_argument);
  CHECK_THROWS_AS(demogen::load_csv("/nonexistent/nowhere.csv"), std::invalid_argument);
}

TEST_CASE("validate flags inconsistent demonstrations") {
  demogen::Demonstration demo;
  demo.points = Eigen::MatrixXd::Zero(4, 2);
  demo.points(1, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(demogen::validate(demo), std::invalid_argument);

  demo.points = Eigen::MatrixXd::Random(4, 2);
  demo.velocities = Eigen::MatrixXd::Zero(3, 2);
  CHECK_THROWS_AS(demogen::validate(demo), std::invalid_argument);
  demo.velocities.reset();
  CHECK_NOTHROW(demogen::validate(demo));
}
