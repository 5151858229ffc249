#include <doctest.h>

#include <numeric>
#include <random>

#include "ihfood/embedding.hpp"
#include "ihfood/errors.hpp"
#include "ihfood/pca.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace ihfood;

TEST_CASE("histogram of a constant 0.5 volume") {
  const Volume v({3, 3, 3}, {1, 1, 1}, 0.5f);
  const auto e = histogram(v, 4);
  CHECK(e.values == std::vector<double>{0, 0, 1, 0});
  CHECK(e.bin_edges == std::vector<double>{0, 0.25, 0.5, 0.75, 1.0});
}

TEST_CASE("histogram of half zeros half ones") {
  Volume v({2, 2, 2}, {1, 1, 1});
  for (std::size_t i = 0; i < 4; ++i) v.data()[i] = 1.0f;
  CHECK(histogram(v, 2).values == std::vector<double>{0.5, 0.5});
}

TEST_CASE("histogram of 1000 uniform voxels matches direct counting") {
  std::mt19937_64 gen(2024);
  const Volume v = testutil::random_volume(gen, {10, 10, 10});
  const auto e = histogram(v, 10);
  const auto expected = oracle::histogram(v.values(), 10);
  for (std::size_t i = 0; i < 10; ++i) {
    CHECK(e.values[i] == expected[i]);
    CHECK(std::abs(e.values[i] - 0.1) <= 0.05);
  }
}

TEST_CASE("histogram edge values fall in the expected bins") {
  Volume v({5, 1, 1}, {1, 1, 1}, std::vector<float>{0.0f, 0.25f, 0.5f, 0.75f, 1.0f});
  const auto e = histogram(v, 4);
  CHECK(e.values == std::vector<double>{0.2, 0.2, 0.2, 0.4});
  CHECK(e.values == oracle::histogram(v.values(), 4));
}

TEST_CASE("histogram rejects unnormalized inputs") {
  Volume v({2, 1, 1}, {1, 1, 1}, std::vector<float>{0.5f, 1.5f});
  CHECK_THROWS_AS(histogram(v, 10), PreconditionError);
  CHECK_THROWS_AS(histogram(Volume({1, 1, 1}, {1, 1, 1}), 0), PreconditionError);
}

TEST_CASE("histogram mass conservation and permutation invariance") {
  std::mt19937_64 gen(1);
  for (int trial = 0; trial < 30; ++trial) {
    Volume v = testutil::random_volume(gen, {7, 3, 5});
    const std::size_t m = 1 + gen() % 64;
    const auto e = histogram(v, m);
    const double total = std::accumulate(e.values.begin(), e.values.end(), 0.0);
    CHECK(std::abs(total - 1.0) <= 1e-9);
    std::shuffle(v.data().begin(), v.data().end(), gen);
    CHECK(histogram(v, m).values == e.values);
  }
}

namespace {

void check_orthonormal(const Eigen::MatrixXd& c, double tol) {
  const Eigen::MatrixXd gram = c * c.transpose();
  CHECK((gram - Eigen::MatrixXd::Identity(c.rows(), c.rows())).cwiseAbs().maxCoeff() <= tol);
}

Eigen::MatrixXd random_matrix(std::mt19937_64& gen, Eigen::Index n, Eigen::Index m) {
  std::normal_distribution<double> nd;
  Eigen::MatrixXd x(n, m);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < m; ++j) x(i, j) = nd(gen);
  return x;
}

}  // namespace

TEST_CASE("PCA of collinear 2D points keeps one component") {
  Eigen::MatrixXd x(5, 2);
  x << 0, 0, 1, 2, 2, 4, 3, 6, -1, -2;
  const auto model = fit_pca(x, 0.9999);
  REQUIRE(model.output_dim() == 1);
  CHECK(model.explained_variance_ratio(0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(model.components(0, 1) > 0.0);
  CHECK(model.components(0, 0) == doctest::Approx(1.0 / std::sqrt(5.0)));
}

TEST_CASE("PCA of isotropic 2D data keeps both components") {
  Eigen::MatrixXd x(4, 2);
  x << 1, 0, -1, 0, 0, 1, 0, -1;
  const auto model = fit_pca(x, 0.9999);
  CHECK(model.output_dim() == 2);
  CHECK(model.explained_variance_ratio(0) == doctest::Approx(0.5));
}

TEST_CASE("PCA of 5 random 4-vectors matches the covariance eigendecomposition") {
  std::mt19937_64 gen(42);
  const Eigen::MatrixXd x = random_matrix(gen, 5, 4);
  const auto model = fit_pca(x, 0.99);
  const auto eig = oracle::covariance_eigen(x);
  const double total = eig.values.sum();

  Eigen::Index k = 0;
  double cum = 0.0;
  while (k < eig.values.size() && cum < 0.99) cum += eig.values(k++) / total;
  REQUIRE(model.output_dim() == static_cast<std::size_t>(k));
  for (Eigen::Index c = 0; c < k; ++c) {
    CHECK(std::abs(model.explained_variance_ratio(c) - eig.values(c) / total) <= 1e-8);
    Eigen::VectorXd ref = eig.vectors.col(c);
    Eigen::Index arg = 0;
    ref.cwiseAbs().maxCoeff(&arg);
    if (ref(arg) < 0) ref = -ref;
    CHECK((model.components.row(c).transpose() - ref).cwiseAbs().maxCoeff() <= 1e-8);
  }
  check_orthonormal(model.components, 1e-8);
}

TEST_CASE("PCA errors") {
  CHECK_THROWS_AS(fit_pca(Eigen::MatrixXd::Ones(1, 3), 0.9), FitError);
  CHECK_THROWS_AS(fit_pca(Eigen::MatrixXd::Ones(3, 3), 0.9), FitError);
  CHECK_THROWS_AS(fit_pca(Eigen::MatrixXd::Random(3, 3), 0.0), PreconditionError);
}

TEST_CASE("pca_transform basics") {
  std::mt19937_64 gen(8);
  const Eigen::MatrixXd x = random_matrix(gen, 10, 4);
  const auto model = fit_pca(x, 1.0);
  CHECK(pca_transform(model, model.mean).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK_THROWS_AS(pca_transform(model, Eigen::VectorXd::Zero(3)), FitError);

  PcaModel identity;
  identity.mean = Eigen::VectorXd::Zero(3);
  identity.components = Eigen::MatrixXd::Identity(3, 3);
  identity.explained_variance_ratio = Eigen::VectorXd::Constant(3, 1.0 / 3.0);
  const Eigen::Vector3d e(0.3, -2.0, 7.5);
  CHECK(pca_transform(identity, e) == e);

  PcaModel hand;
  hand.mean = Eigen::Vector3d(1.0, 2.0, 3.0);
  hand.components.resize(2, 3);
  hand.components << 0.6, 0.8, 0.0, 0.0, 0.0, 1.0;
  hand.explained_variance_ratio = Eigen::Vector2d(0.7, 0.3);
  const Eigen::Vector2d y = pca_transform(hand, Eigen::Vector3d(4.0, -1.0, 5.0));
  // (4-1, -1-2, 5-3) = (3, -3, 2): rows give 0.6*3 - 0.8*3 = -0.6 and 2.
  CHECK(y(0) == doctest::Approx(-0.6));
  CHECK(y(1) == doctest::Approx(2.0));
}

TEST_CASE("PCA transform is an isometry on the data span when k equals the rank") {
  std::mt19937_64 gen(77);
  const Eigen::MatrixXd x = random_matrix(gen, 6, 10);
  const auto model = fit_pca(x, 1.0);
  CHECK(model.output_dim() == 5);
  const Eigen::MatrixXd y = pca_transform_rows(model, x);
  for (int a = 0; a < 6; ++a)
    for (int b = a + 1; b < 6; ++b)
      CHECK(std::abs((x.row(a) - x.row(b)).norm() - (y.row(a) - y.row(b)).norm()) <= 1e-6);
}

TEST_CASE("duplicating rows leaves PCA components unchanged") {
  std::mt19937_64 gen(13);
  const Eigen::MatrixXd x = random_matrix(gen, 7, 5);
  Eigen::MatrixXd doubled(14, 5);
  doubled << x, x;
  const auto a = fit_pca(x, 0.999);
  const auto b = fit_pca(doubled, 0.999);
  REQUIRE(a.output_dim() == b.output_dim());
  CHECK((a.components - b.components).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("PCA contract properties on random data") {
  std::mt19937_64 gen(5150);
  for (int trial = 0; trial < 25; ++trial) {
    const auto n = static_cast<Eigen::Index>(3 + gen() % 40);
    const auto m = static_cast<Eigen::Index>(2 + gen() % 60);
    const Eigen::MatrixXd x = random_matrix(gen, n, m);
    const double v = trial % 2 ? 0.9999 : 0.9;
    const auto model = fit_pca(x, v);
    const double cum = model.explained_variance_ratio.sum();
    const auto rank = std::min(n - 1, m);
    CHECK((cum >= v || static_cast<Eigen::Index>(model.output_dim()) == rank));
    for (Eigen::Index i = 1; i < model.explained_variance_ratio.size(); ++i) {
      CHECK(model.explained_variance_ratio(i) <= model.explained_variance_ratio(i - 1));
    }
    check_orthonormal(model.components, 1e-8);
  }
}

TEST_CASE("PCA model JSON round trip is exact") {
  std::mt19937_64 gen(21);
  const auto model = fit_pca(random_matrix(gen, 8, 6), 0.95);
  const auto back = pca_from_json(nlohmann::json::parse(to_json(model).dump()));
  CHECK(back.mean == model.mean);
  CHECK(back.components == model.components);
  CHECK(back.explained_variance_ratio == model.explained_variance_ratio);
  CHECK(back.v_target == model.v_target);
  auto broken = to_json(model);
  broken["m"] = 99;
  CHECK_THROWS_AS(pca_from_json(broken), FitError);
}
