#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "ihfood/errors.hpp"
#include "ihfood/metrics.hpp"
#include "oracles.hpp"

using namespace ihfood;

namespace {

std::vector<double> draw(std::mt19937_64& gen, std::size_t n, double shift, bool coarse) {
  std::normal_distribution<double> nd(shift, 1.0);
  std::vector<double> out(n);
  for (double& x : out) x = coarse ? std::round(nd(gen) * 2.0) / 2.0 : nd(gen);
  return out;
}

}  // namespace

TEST_CASE("fpr at tpr examples") {
  const std::vector<double> id{1, 2, 3}, ood{10, 11, 12};
  const auto r = fpr_at_tpr(id, ood);
  CHECK(r.fpr == 0.0);
  CHECK(r.threshold == 10.0);

  const std::vector<double> same{5, 5, 5};
  CHECK(fpr_at_tpr(same, same).fpr == 1.0);

  const std::vector<double> id2{0.1, 0.2, 0.3, 0.4, 0.5}, ood2{0.35, 0.45, 0.55, 0.65};
  const auto r2 = fpr_at_tpr(id2, ood2);
  const auto o2 = oracle::fpr_scan(id2, ood2, 0.95);
  CHECK(r2.threshold == 0.35);
  CHECK(r2.fpr == 0.4);
  CHECK(r2.fpr == o2.fpr);
  CHECK(r2.threshold == o2.threshold);
}

TEST_CASE("fpr at tpr matches the threshold scan") {
  std::mt19937_64 gen(2024);
  for (int trial = 0; trial < 100; ++trial) {
    const bool coarse = trial % 2 == 0;
    const auto id = draw(gen, 5 + gen() % 60, 0.0, coarse);
    const auto ood = draw(gen, 5 + gen() % 60, 1.0, coarse);
    for (double target : {0.5, 0.9, 0.95, 1.0}) {
      const auto got = fpr_at_tpr(id, ood, target);
      const auto want = oracle::fpr_scan(id, ood, target);
      CHECK(got.fpr == want.fpr);
      CHECK(got.threshold == want.threshold);
    }
  }
}

TEST_CASE("auroc examples and oracle") {
  const std::vector<double> id{1, 2, 3}, ood{10, 11, 12}, same{5, 5, 5};
  CHECK(auroc(id, ood) == 1.0);
  CHECK(auroc(ood, id) == 0.0);
  CHECK(auroc(same, same) == 0.5);

  std::mt19937_64 gen(30);
  for (int trial = 0; trial < 20; ++trial) {
    const auto a = draw(gen, 30, 0.0, trial % 2 == 0);
    const auto b = draw(gen, 20, 0.7, trial % 2 == 0);
    CHECK(auroc(a, b) == oracle::auroc_pairs(a, b));
    CHECK(auroc(a, b) + auroc(b, a) == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("metrics are invariant under strictly increasing transforms") {
  std::mt19937_64 gen(31);
  for (int trial = 0; trial < 20; ++trial) {
    const auto id = draw(gen, 25, 0.0, true);
    const auto ood = draw(gen, 15, 0.8, true);
    std::vector<double> tid, tood;
    for (double x : id) tid.push_back(std::exp(x) + 3.0);
    for (double x : ood) tood.push_back(std::exp(x) + 3.0);
    CHECK(fpr_at_tpr(id, ood).fpr == fpr_at_tpr(tid, tood).fpr);
    CHECK(auroc(id, ood) == auroc(tid, tood));
  }
}

TEST_CASE("lowering the tpr target never raises fpr") {
  std::mt19937_64 gen(32);
  for (int trial = 0; trial < 30; ++trial) {
    const auto id = draw(gen, 40, 0.0, trial % 3 == 0);
    const auto ood = draw(gen, 40, 0.5, trial % 3 == 0);
    double prev = 2.0;
    for (double target = 1.0; target > 0.0; target -= 0.05) {
      const double f = fpr_at_tpr(id, ood, target).fpr;
      CHECK(f <= prev);
      CHECK(f >= 0.0);
      CHECK(f <= 1.0);
      prev = f;
    }
  }
}

TEST_CASE("metric preconditions") {
  const std::vector<double> ok{1.0}, empty, nan{std::nan("")},
      inf{std::numeric_limits<double>::infinity()};
  CHECK_THROWS_AS(fpr_at_tpr(empty, ok), PreconditionError);
  CHECK_THROWS_AS(fpr_at_tpr(ok, empty), PreconditionError);
  CHECK_THROWS_AS(fpr_at_tpr(nan, ok), PreconditionError);
  CHECK_THROWS_AS(auroc(ok, inf), PreconditionError);
  CHECK_THROWS_AS(fpr_at_tpr(ok, ok, 0.0), PreconditionError);
  CHECK_THROWS_AS(fpr_at_tpr(ok, ok, 1.5), PreconditionError);
}

TEST_CASE("evaluate bundles both metrics") {
  const std::vector<double> id{0.1, 0.2, 0.3, 0.4, 0.5}, ood{0.35, 0.45, 0.55, 0.65};
  const auto m = evaluate(id, ood);
  CHECK(m.fpr_at_tpr95 == 0.4);
  CHECK(m.threshold == 0.35);
  CHECK(m.n_id == 5);
  CHECK(m.n_ood == 4);
  CHECK(m.auroc == oracle::auroc_pairs({id.begin(), id.end()}, {ood.begin(), ood.end()}));
  const auto back = metric_result_from_json(to_json(m));
  CHECK(back.fpr_at_tpr95 == m.fpr_at_tpr95);
  CHECK(back.auroc == m.auroc);
  CHECK(back.n_id == m.n_id);
  CHECK(back.threshold == m.threshold);
}

TEST_CASE("fechner correlation") {
  CHECK(fechner_correlation(std::vector<double>{1, 2, 3}, std::vector<double>{4, 5, 6}) == 1.0);
  CHECK(fechner_correlation(std::vector<double>{1, 2, 4, 5}, std::vector<double>{5, 4, 2, 1}) ==
        -1.0);
  std::mt19937_64 gen(13);
  std::normal_distribution<double> nd;
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<double> a(13), b(13), neg(13);
    for (double& x : a) x = nd(gen);
    for (double& x : b) x = nd(gen);
    for (std::size_t i = 0; i < 13; ++i) neg[i] = -a[i];
    CHECK(fechner_correlation(a, b) == oracle::fechner(a, b));
    CHECK(fechner_correlation(a, a) == 1.0);
    CHECK(fechner_correlation(a, neg) == -1.0);
    const double c = fechner_correlation(a, b);
    CHECK(c >= -1.0);
    CHECK(c <= 1.0);
  }
  CHECK_THROWS_AS(fechner_correlation(std::vector<double>{1}, std::vector<double>{1}),
                  PreconditionError);
  CHECK_THROWS_AS(fechner_correlation(std::vector<double>{1, 2}, std::vector<double>{1, 2, 3}),
                  PreconditionError);
}
