#include <Eigen/Dense>
#include <cmath>
#include <filesystem>
#include <limits>
#include <random>
#include <string>

#include "doctest.h"
#include "latentds/demogen.hpp"
#include "latentds/diffeo_fdm.hpp"
#include "latentds/evalkit.hpp"
#include "latentds/spectral_latent.hpp"

using namespace latentds;

namespace {

// Canonical small training pair: latent embedding aligned onto the planar
// spiral. Cached so the fitting cost is paid once per binary run.
struct FittedPair {
  Eigen::MatrixXd source;
  Eigen::MatrixXd target;
  diffeo_fdm::DiffeoModel model;
};

const FittedPair& fitted_pair() {
  static const FittedPair pair = [] {
    FittedPair p;
    const demogen::Demonstration arch = demogen::archimedean_spiral(80);
    const spectral_latent::LatentEmbedding emb = spectral_latent::build_embedding({80, 2, 3});
    p.source = spectral_latent::align_to_demo(emb, arch.points);
    p.target = arch.points;
    p.model = diffeo_fdm::fit(p.source, p.target, 0.8, 0.9, 40, 1e-7);
    return p;
  }();
  return pair;
}

Eigen::MatrixXd sample_box(const Eigen::MatrixXd& cloud, double margin, int count, unsigned seed) {
  const Eigen::RowVectorXd lo = cloud.colwise().minCoeff();
  const Eigen::RowVectorXd hi = cloud.colwise().maxCoeff();
  const Eigen::RowVectorXd pad = margin * (hi - lo);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Eigen::MatrixXd out(count, cloud.cols());
  for (int i = 0; i < count; ++i) {
    for (Eigen::Index j = 0; j < cloud.cols(); ++j) {
      const double a = lo[j] - pad[j];
      const double b = hi[j] + pad[j];
      out(i, j) = a + (b - a) * unit(rng);
    }
  }
  return out;
}

}  // namespace

TEST_CASE("fitting a pair onto itself needs no layers") {
  Eigen::MatrixXd curve(30, 2);
  for (int i = 0; i < 30; ++i) {
    curve(i, 0) = std::cos(0.1 * i);
    curve(i, 1) = std::sin(0.1 * i) + 0.02 * i;
  }
  const diffeo_fdm::DiffeoModel model = diffeo_fdm::fit(curve, curve, 0.8, 0.9, 25);
  CHECK(model.layers.empty());
  CHECK(model.normalized_mse == 0.0);
  CHECK(model.mu == 0.8);
  CHECK(model.beta == 0.9);
  CHECK(model.source_meta.n_points == 30);
  CHECK(model.source_meta.n_dims == 2);
  CHECK(model.source_meta.start == curve.row(0).transpose());
  CHECK(model.target_meta.attractor == curve.row(29).transpose());
}

TEST_CASE("a single layer acts as a localized translation") {
  diffeo_fdm::DiffeoModel model;
  model.mu = 0.9;
  model.beta = 0.9;
  diffeo_fdm::DiffeoLayer layer;
  layer.center = Eigen::Vector3d(0.5, -1.0, 2.0);
  layer.translation = Eigen::Vector3d(0.05, 0.02, -0.04);
  layer.width = 0.3;
  model.layers.push_back(layer);

  SUBCASE("the center moves by the full translation") {
    const Eigen::VectorXd moved = diffeo_fdm::forward(model, layer.center);
    CHECK(moved == (layer.center + layer.translation).eval());
  }
  SUBCASE("points many widths away barely move") {
    Eigen::VectorXd far = layer.center;
    far[0] += 20.0 * layer.width;
    CHECK((diffeo_fdm::forward(model, far) - far).norm() < 1e-12);
  }
  SUBCASE("matrix forward matches the vector form row by row") {
    Eigen::MatrixXd pts(3, 3);
    pts.row(0) = layer.center.transpose();
    pts.row(1) << 0.55, -0.9, 2.1;
    pts.row(2) << 4.0, 4.0, 4.0;
    const Eigen::MatrixXd batch = diffeo_fdm::forward(model, pts);
    for (int i = 0; i < 3; ++i) {
      const Eigen::VectorXd one = diffeo_fdm::forward(model, pts.row(i).transpose().eval());
      CHECK((batch.row(i).transpose() - one).norm() < 1e-15);
    }
  }
}

TEST_CASE("a model with no layers is the identity") {
  diffeo_fdm::DiffeoModel model;
  const Eigen::VectorXd x = Eigen::Vector3d(1.0, -2.0, 0.25);
  CHECK(diffeo_fdm::forward(model, x) == x);
  CHECK(diffeo_fdm::inverse(model, x) == x);
  CHECK(diffeo_fdm::jacobian(model, x) == Eigen::MatrixXd::Identity(3, 3));
}

TEST_CASE("fit validates its inputs") {
  const Eigen::MatrixXd a = Eigen::MatrixXd::Random(10, 2);
  const Eigen::MatrixXd b = Eigen::MatrixXd::Random(10, 2);
  CHECK_THROWS_AS(diffeo_fdm::fit(a, Eigen::MatrixXd::Random(9, 2), 0.8, 0.9, 5),
                  std::invalid_argument);
  CHECK_THROWS_AS(diffeo_fdm::fit(a, Eigen::MatrixXd::Random(10, 3), 0.8, 0.9, 5),
                  std::invalid_argument);
  CHECK_THROWS_AS(diffeo_fdm::fit(a, b, 0.0, 0.9, 5), std::invalid_argument);
  CHECK_THROWS_AS(diffeo_fdm::fit(a, b, 1.0, 0.9, 5), std::invalid_argument);
  CHECK_THROWS_AS(diffeo_fdm::fit(a, b, 0.8, 0.0, 5), std::invalid_argument);
  CHECK_THROWS_AS(diffeo_fdm::fit(a, b, 0.8, 1.5, 5), std::invalid_argument);
  CHECK_THROWS_AS(diffeo_fdm::fit(a, b, 0.8, 0.9, -1), std::invalid_argument);
  CHECK_THROWS_AS(diffeo_fdm::fit(a, b, 0.8, 0.9, 5, -1e-9), std::invalid_argument);
  Eigen::MatrixXd bad = b;
  bad(3, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(diffeo_fdm::fit(a, bad, 0.8, 0.9, 5), std::invalid_argument);
  const Eigen::MatrixXd flat = Eigen::MatrixXd::Constant(10, 2, 1.25);
  CHECK_THROWS_AS(diffeo_fdm::fit(a, flat, 0.8, 0.9, 5), std::invalid_argument);
}

TEST_CASE("the fitted spiral model behaves as a diffeomorphism") {
  const FittedPair& p = fitted_pair();
  REQUIRE(!p.model.layers.empty());
  // the planar spiral aligns to a nearly one-dimensional source, so a short
  // 40-layer budget leaves visible residual; the map properties below are
  // what this fixture is for
  REQUIRE(p.model.normalized_mse < 0.05);

  SUBCASE("training mse agrees with the standalone metric") {
    const double recomputed = evalkit::normalized_mse(diffeo_fdm::forward(p.model, p.source), p.target);
    CHECK(std::abs(recomputed - p.model.normalized_mse) <= 1e-12 + 1e-6 * recomputed);
  }

  SUBCASE("every layer respects the invertibility clip") {
    const double bound = p.model.mu * std::sqrt(std::exp(1.0));
    for (const diffeo_fdm::DiffeoLayer& layer : p.model.layers) {
      CHECK(layer.translation.norm() <= bound * layer.width * (1.0 + 1e-12));
      CHECK(layer.width > 0.0);
    }
  }

  SUBCASE("inverse(forward(x)) returns x over the padded bounding box") {
    const Eigen::MatrixXd probes = sample_box(p.target, 0.5, 200, 20240817u);
    double worst = 0.0;
    for (int i = 0; i < probes.rows(); ++i) {
      const Eigen::VectorXd x = probes.row(i).transpose();
      const Eigen::VectorXd y = diffeo_fdm::forward(p.model, x);
      const Eigen::VectorXd back = diffeo_fdm::inverse(p.model, y, 1e-10, 1000);
      worst = std::max(worst, (back - x).norm());
    }
    CHECK(worst <= 1e-8);
  }

  SUBCASE("analytic jacobian matches central differences") {
    const Eigen::MatrixXd probes = sample_box(p.target, 0.25, 20, 7u);
    const double h = 1e-6;
    for (int i = 0; i < probes.rows(); ++i) {
      const Eigen::VectorXd x = probes.row(i).transpose();
      const Eigen::MatrixXd analytic = diffeo_fdm::jacobian(p.model, x);
      Eigen::MatrixXd fd(x.size(), x.size());
      for (Eigen::Index j = 0; j < x.size(); ++j) {
        Eigen::VectorXd hi = x, lo = x;
        hi[j] += h;
        lo[j] -= h;
        fd.col(j) = (diffeo_fdm::forward(p.model, hi) - diffeo_fdm::forward(p.model, lo)) / (2.0 * h);
      }
      CHECK((analytic - fd).norm() <= 1e-4 * std::max(1.0, analytic.norm()));
    }
  }

  SUBCASE("the map preserves orientation along the training set") {
    for (int i = 0; i < p.source.rows(); ++i) {
      const Eigen::MatrixXd jac = diffeo_fdm::jacobian(p.model, p.source.row(i).transpose());
      CHECK(jac.determinant() > 0.0);
    }
  }

  SUBCASE("forward_with_jacobian is consistent with the separate calls") {
    const Eigen::VectorXd x = p.source.row(17).transpose();
    const auto [pos, jac] = diffeo_fdm::forward_with_jacobian(p.model, x);
    CHECK(pos == diffeo_fdm::forward(p.model, x));
    CHECK(jac == diffeo_fdm::jacobian(p.model, x));
  }
}

TEST_CASE("a starved fixed-point budget raises inversion_error") {
  diffeo_fdm::DiffeoModel model;
  model.mu = 0.95;
  model.beta = 0.9;
  diffeo_fdm::DiffeoLayer layer;
  layer.center = Eigen::Vector2d(0.0, 0.0);
  layer.width = 1.0;
  layer.translation = Eigen::Vector2d(0.9 * std::sqrt(std::exp(1.0)), 0.0);
  model.layers.push_back(layer);
  const Eigen::VectorXd probe = Eigen::Vector2d(0.4, 0.1);
  const Eigen::VectorXd y = diffeo_fdm::forward(model, probe);
  CHECK_NOTHROW(diffeo_fdm::inverse(model, y, 1e-10, 500));
  CHECK_THROWS_AS(diffeo_fdm::inverse(model, y, 1e-12, 1), diffeo_fdm::inversion_error);
  CHECK_THROWS_AS(diffeo_fdm::inverse(model, y, -1.0, 100), std::invalid_argument);
  CHECK_THROWS_AS(diffeo_fdm::inverse(model, y, 1e-10, 0), std::invalid_argument);
}

TEST_CASE("training error is non-increasing in the layer budget") {
  const demogen::Demonstration arch = demogen::archimedean_spiral(50);
  const spectral_latent::LatentEmbedding emb = spectral_latent::build_embedding({50, 2, 3});
  const Eigen::MatrixXd source = spectral_latent::align_to_demo(emb, arch.points);

  std::vector<diffeo_fdm::DiffeoModel> models;
  for (int budget = 1; budget <= 12; ++budget) {
    models.push_back(diffeo_fdm::fit(source, arch.points, 0.8, 0.9, budget, 0.0));
  }
  for (size_t i = 1; i < models.size(); ++i) {
    CHECK(models[i].normalized_mse <= models[i - 1].normalized_mse);
    CHECK(models[i].layers.size() <= static_cast<size_t>(i + 1));
  }

  // The greedy construction never revisits earlier layers, so a smaller
  // budget is a bitwise prefix of a larger one.
  const std::vector<diffeo_fdm::DiffeoLayer>& longest = models.back().layers;
  for (const diffeo_fdm::DiffeoModel& m : models) {
    REQUIRE(m.layers.size() <= longest.size());
    for (size_t i = 0; i < m.layers.size(); ++i) {
      CHECK(m.layers[i].center == longest[i].center);
      CHECK(m.layers[i].translation == longest[i].translation);
      CHECK(m.layers[i].width == longest[i].width);
    }
  }
}

TEST_CASE("model serialization round trips") {
  const diffeo_fdm::DiffeoModel& model = fitted_pair().model;
  const std::string text = diffeo_fdm::to_json(model);

  SUBCASE("re-serialization is byte identical") {
    const diffeo_fdm::DiffeoModel loaded = diffeo_fdm::from_json(text);
    CHECK(diffeo_fdm::to_json(loaded) == text);
    REQUIRE(loaded.layers.size() == model.layers.size());
    for (size_t i = 0; i < model.layers.size(); ++i) {
      CHECK(loaded.layers[i].center == model.layers[i].center);
      CHECK(loaded.layers[i].translation == model.layers[i].translation);
      CHECK(loaded.layers[i].width == model.layers[i].width);
    }
    CHECK(loaded.mu == model.mu);
    CHECK(loaded.normalized_mse == model.normalized_mse);
    CHECK(loaded.target_meta.provenance == model.target_meta.provenance);
  }

  SUBCASE("file round trip preserves behavior") {
    const std::filesystem::path path =
        std::filesystem::temp_directory_path() / "latentds_model_roundtrip.json";
    diffeo_fdm::save_model(model, path.string());
    const diffeo_fdm::DiffeoModel loaded = diffeo_fdm::load_model(path.string());
    const Eigen::VectorXd x = fitted_pair().source.row(11).transpose();
    CHECK(diffeo_fdm::forward(loaded, x) == diffeo_fdm::forward(model, x));
    std::filesystem::remove(path);
  }

  SUBCASE("unknown versions are rejected") {
    std::string tampered = text;
    const std::string needle = "\"version\": 1";
    const size_t at = tampered.find(needle);
    REQUIRE(at != std::string::npos);
    tampered.replace(at, needle.size(), "\"version\": 2");
    CHECK_THROWS_AS(diffeo_fdm::from_json(tampered), std::invalid_argument);
  }

  SUBCASE("garbage input is rejected") {
    CHECK_THROWS_AS(diffeo_fdm::from_json("not json"), std::invalid_argument);
    CHECK_THROWS_AS(diffeo_fdm::from_json("{}"), std::invalid_argument);
    CHECK_THROWS_AS(diffeo_fdm::load_model("/nonexistent/dir/model.json"), std::invalid_argument);
  }

  SUBCASE("a layer breaking the invertibility bound cannot be loaded") {
    diffeo_fdm::DiffeoModel loose = diffeo_fdm::from_json(text);
    loose.mu = 1e-6;  // claim a far tighter contraction than the layers satisfy
    CHECK_THROWS_AS(diffeo_fdm::from_json(diffeo_fdm::to_json(loose)), std::invalid_argument);
  }
}
