// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// failure. Oracles come from oracles.hpp and never call the code under test
// for the quantity being checked.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "ihfood/detectors.hpp"
#include "ihfood/embedding.hpp"
#include "ihfood/errors.hpp"
#include "ihfood/harness.hpp"
#include "ihfood/metrics.hpp"
#include "ihfood/pca.hpp"
#include "ihfood/phantom.hpp"
#include "ihfood/preprocess.hpp"
#include "ihfood/rng.hpp"
#include "ihfood/synth.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace ihfood;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void fail(const std::string& why) {
    if (pass) detail = why;
    pass = false;
  }
};

std::string fmt(double x, int digits = 3) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*g", digits, x);
  return buf;
}

std::vector<double> score_list(std::mt19937_64& gen, std::size_t n, double shift, bool ties) {
  std::normal_distribution<double> nd(shift, 1.0);
  std::vector<double> out(n);
  for (double& x : out) x = ties ? std::round(nd(gen) * 3.0) / 3.0 : nd(gen);
  return out;
}

Outcome metric_oracles() {
  Outcome o;
  std::mt19937_64 gen(1001);
  std::uniform_int_distribution<std::size_t> size(5, 200);
  double worst_auc = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const bool ties = trial % 2 == 1;
    const auto id = score_list(gen, size(gen), 0.0, ties);
    const auto ood = score_list(gen, size(gen), 0.6, ties);
    const auto got = fpr_at_tpr(id, ood);
    const auto want = oracle::fpr_scan(id, ood, 0.95);
    if (got.fpr != want.fpr || got.threshold != want.threshold) {
      o.fail("fpr mismatch on trial " + std::to_string(trial));
    }
    worst_auc = std::max(worst_auc, std::abs(auroc(id, ood) - oracle::auroc_pairs(id, ood)));
  }
  if (worst_auc > 1e-12) o.fail("auroc deviation " + fmt(worst_auc));
  if (o.pass) o.detail = "200 pairs, fpr bit-equal, max auroc deviation " + fmt(worst_auc);
  return o;
}

Outcome mahalanobis_identities() {
  Outcome o;
  std::mt19937_64 gen(1002);
  std::normal_distribution<double> nd;
  IhfDetector eye;
  eye.mu_hat = Eigen::Vector2d::Zero();
  eye.sigma_inv = Eigen::Matrix2d::Identity();
  const double d34 = mahalanobis(eye, Eigen::Vector2d(3, 4));
  if (std::abs(d34 - 5.0) > 1e-9) o.fail("(3,4) under identity gave " + fmt(d34, 17));

  double worst = 0.0, worst_mean = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto k = static_cast<Eigen::Index>(1 + gen() % 8);
    const auto n = k + 2 + static_cast<Eigen::Index>(gen() % 40);
    Eigen::MatrixXd mix = Eigen::MatrixXd::Identity(k, k);
    for (Eigen::Index i = 0; i < k; ++i)
      for (Eigen::Index j = 0; j < k; ++j) mix(i, j) += 0.5 * nd(gen);
    Eigen::MatrixXd train(n, k);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < k; ++j) train(i, j) = nd(gen);
    train = train * mix;
    const auto d = fit_ihf_embeddings(train, PreprocessConfig::mri(), std::nullopt, 0.0);
    worst_mean = std::max(worst_mean, mahalanobis(d, d.mu_hat));
    Eigen::VectorXd x(k);
    for (Eigen::Index j = 0; j < k; ++j) x(j) = 2.0 * nd(gen);
    worst = std::max(worst, std::abs(mahalanobis(d, x) - oracle::mahalanobis(train, x)));
  }
  if (worst_mean != 0.0) o.fail("distance at the mean " + fmt(worst_mean));
  if (worst > 1e-8) o.fail("max deviation from direct evaluation " + fmt(worst));
  if (o.pass) o.detail = "(3,4)->" + fmt(d34, 17) + ", 100 fits, max deviation " + fmt(worst);
  return o;
}

Outcome pca_contract() {
  Outcome o;
  std::mt19937_64 gen(1003);
  std::normal_distribution<double> nd;
  double worst_ortho = 0.0, worst_mean = 0.0, worst_margin = 1.0;
  for (int trial = 0; trial < 50; ++trial) {
    const auto n = static_cast<Eigen::Index>(3 + gen() % 98);
    const auto m = static_cast<Eigen::Index>(2 + gen() % 199);
    const double v = std::uniform_real_distribution<double>(0.5, 0.9999)(gen);
    // Decaying spectrum so k varies between datasets.
    Eigen::MatrixXd x(n, m);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < m; ++j) x(i, j) = nd(gen) / (1.0 + 0.3 * static_cast<double>(j));
    const auto model = fit_pca(x, v);
    const Eigen::Index k = model.components.rows();
    const Eigen::MatrixXd gram = model.components * model.components.transpose();
    worst_ortho = std::max(worst_ortho, (gram - Eigen::MatrixXd::Identity(k, k)).cwiseAbs().maxCoeff());
    const Eigen::VectorXd mean = x.colwise().mean().transpose();
    worst_mean = std::max(worst_mean, pca_transform(model, mean).cwiseAbs().maxCoeff());
    // Retained variance measured directly on the projected data.
    const Eigen::MatrixXd centered = x.rowwise() - mean.transpose();
    const double total = centered.squaredNorm();
    const double kept = (centered * model.components.transpose()).squaredNorm();
    worst_margin = std::min(worst_margin, kept / total - v);
  }
  if (worst_margin < -1e-12) o.fail("retained variance below target by " + fmt(-worst_margin));
  if (worst_ortho > 1e-8) o.fail("orthonormality error " + fmt(worst_ortho));
  if (worst_mean > 1e-9) o.fail("mean transform " + fmt(worst_mean));
  if (o.pass) {
    o.detail = "50 datasets, min variance margin " + fmt(worst_margin) + ", ortho err " +
               fmt(worst_ortho) + ", mean err " + fmt(worst_mean);
  }
  return o;
}

Outcome histogram_invariants() {
  Outcome o;
  std::mt19937_64 gen(1004);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const Shape shape{2 + gen() % 15, 2 + gen() % 15, 2 + gen() % 15};
    Volume v = testutil::random_volume(gen, shape);
    if (trial % 4 == 0) {
      // Exercise exact bin edges and the closed upper end.
      for (float& x : v.data()) x = static_cast<float>(std::round(x * 8.0) / 8.0);
    }
    const std::size_t m = 1 + gen() % 300;
    const auto e = histogram(v, m);
    double sum = 0.0;
    for (double p : e.values) sum += p;
    worst = std::max(worst, std::abs(sum - 1.0));
    const auto want = oracle::histogram(v.values(), m);
    if (e.values != want) o.fail("counts differ from the oracle on trial " + std::to_string(trial));
    std::shuffle(v.data().begin(), v.data().end(), gen);
    if (histogram(v, m).values != e.values) o.fail("shuffle changed the embedding");
  }
  if (worst > 1e-9) o.fail("mass deviation " + fmt(worst));
  if (o.pass) o.detail = "100 volumes, max mass deviation " + fmt(worst);
  return o;
}

double l2(const Volume& a, const Volume& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a.values()[i]) - b.values()[i];
    s += d * d;
  }
  return std::sqrt(s);
}

Outcome corruption_monotonicity() {
  Outcome o;
  const Volume clean = preprocess(make_phantom(2024), PreprocessConfig::mri());
  std::ostringstream detail;
  for (auto kind : kAllCorruptionKinds) {
    const CorruptionSpec probe{kind, 3, 99};
    if (corrupt(clean, probe) != corrupt(clean, probe)) {
      o.fail(std::string(to_string(kind)) + " is not deterministic");
    }
    std::vector<double> means;
    for (int s = 1; s <= 5; ++s) {
      double total = 0.0;
      for (std::uint64_t seed = 0; seed < 20; ++seed) {
        total += l2(corrupt(clean, {kind, s, derive_case_seed(seed, "acceptance")}), clean);
      }
      means.push_back(total / 20.0);
    }
    for (int s = 1; s < 5; ++s) {
      if (means[s] < means[s - 1]) {
        o.fail(std::string(to_string(kind)) + " mean L2 drops from s" + std::to_string(s) + " to s" +
               std::to_string(s + 1));
      }
    }
    detail << ' ' << to_string(kind) << '[' << fmt(means.front()) << ".." << fmt(means.back()) << ']';
  }
  if (o.pass) o.detail = "64^3, 20 seeds:" + detail.str();
  return o;
}

Outcome synthetic_benchmark() {
  Outcome o;
  testutil::TempDir dir;
  const std::vector<CorruptionKind> kinds{CorruptionKind::kspace_spikes, CorruptionKind::anisotropy,
                                          CorruptionKind::ghosting};
  const auto manifest = make_phantom_benchmark(dir.path(), 40, 20, 7, kinds, {1, 2, 3, 4, 5}, 64);
  std::ostringstream detail;
  for (auto det : {DetectorKind::ihf_mah, DetectorKind::ihf_nn}) {
    DetectorSpec spec;
    spec.kind = det;
    const auto results = run_challenge(manifest, spec);
    detail << ' ' << to_string(det) << ':';
    for (auto kind : kinds) {
      std::vector<double> fpr(5, -1.0);
      for (const auto& r : results) {
        if (r.ood_set == to_string(kind) && r.severity) fpr[*r.severity - 1] = r.metric.fpr_at_tpr95;
      }
      const std::string tag = std::string(to_string(det)) + "/" + std::string(to_string(kind));
      if (fpr[4] > 0.10) o.fail(tag + " FPR at s5 = " + fmt(fpr[4]));
      for (int s = 1; s < 5; ++s) {
        if (fpr[s] > fpr[s - 1] + 0.10) {
          o.fail(tag + " FPR rises from s" + std::to_string(s) + " to s" + std::to_string(s + 1));
        }
      }
      detail << ' ' << to_string(kind) << '[';
      for (int s = 0; s < 5; ++s) detail << (s ? "," : "") << fmt(fpr[s], 2);
      detail << ']';
    }
  }
  const std::string d = detail.str();
  o.detail = o.pass ? "FPR by severity" + d : o.detail + ";" + d;
  return o;
}

Outcome null_challenge() {
  Outcome o;
  testutil::TempDir dir;
  auto manifest = make_phantom_benchmark(dir.path(), 20, 10, 11, {}, {}, 32, true);
  manifest.ood_sets = {{"null", manifest.id_test, std::nullopt}};

  // External scores: any per-case score works as long as both sets reuse it.
  ScoreTable ext;
  std::mt19937_64 gen(5);
  for (const auto& e : manifest.id_test) ext.add(e.case_id, std::normal_distribution<double>()(gen));
  write_score_table(ext, dir / "ext.csv");

  std::ostringstream detail;
  for (auto kind : {DetectorKind::ihf_mah, DetectorKind::ihf_nn, DetectorKind::volume_predictor,
                    DetectorKind::entropy, DetectorKind::uncertainty, DetectorKind::external}) {
    DetectorSpec spec;
    spec.kind = kind;
    if (kind == DetectorKind::external) spec.score_files = {dir / "ext.csv"};
    const auto r = run_challenge(manifest, spec).front();
    if (r.metric.auroc < 0.35 || r.metric.auroc > 0.65 || r.metric.fpr_at_tpr95 < 0.85) {
      o.fail(std::string(to_string(kind)) + " auroc " + fmt(r.metric.auroc) + " fpr " +
             fmt(r.metric.fpr_at_tpr95));
    }
    detail << ' ' << to_string(kind) << '(' << fmt(r.metric.auroc) << ',' << fmt(r.metric.fpr_at_tpr95)
           << ')';
  }
  if (o.pass) o.detail = "(auroc,fpr):" + detail.str();
  return o;
}

Outcome volume_rule() {
  Outcome o;
  std::mt19937_64 gen(1008);
  std::size_t checked = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 2 + gen() % 200;
    const bool ties = trial % 3 == 0;
    std::vector<double> train(n);
    std::normal_distribution<double> nd(5000, 1500);
    for (double& x : train) x = ties ? std::round(nd(gen) / 500.0) * 500.0 : nd(gen);
    const double q = std::uniform_real_distribution<double>(0.5, 50.0)(gen);
    const VolumePredictor p(train);
    for (int t = 0; t < 100; ++t) {
      double vol = ties ? std::round(nd(gen) * 1.3 / 500.0) * 500.0 : nd(gen) * 1.3;
      if (t % 10 == 0) vol = train[gen() % n];
      const double rank = oracle::percentile_rank(train, vol);
      const bool outside = rank < q / 2.0 || rank > 100.0 - q / 2.0;
      const bool flagged = volume_score(p, vol) > 50.0 - q / 2.0;
      if (outside != flagged) {
        o.fail("trial " + std::to_string(trial) + ": rank " + fmt(rank) + " q " + fmt(q));
      }
      ++checked;
    }
  }
  if (o.pass) o.detail = "50 instances, " + std::to_string(checked) + " queries agree";
  return o;
}

void write_file(const std::filesystem::path& p, const std::string& text) { std::ofstream(p) << text; }

Outcome external_ingestion() {
  Outcome o;
  testutil::TempDir dir;
  const Volume v({2, 2, 2}, {1, 1, 1}, 0.5f);
  nlohmann::json manifest = {{"name", "external"}, {"modality", "mri"}};
  auto entries = [&](std::initializer_list<const char*> ids) {
    nlohmann::json arr = nlohmann::json::array();
    for (const char* id : ids) {
      save_volume(v, dir / (std::string(id) + ".json"));
      arr.push_back({{"case_id", id}, {"path", std::string(id) + ".json"}});
    }
    return arr;
  };
  manifest["id_train"] = entries({"tr1", "tr2"});
  manifest["id_test"] = entries({"t1", "t2", "t3"});
  manifest["ood_sets"] = nlohmann::json::array({{{"name", "ood"}, {"entries", entries({"o1", "o2"})}}});
  write_file(dir / "manifest.json", manifest.dump());
  write_file(dir / "scores.csv", "case_id,score\nt1,0.1\nt2,0.3\nt3,0.2\no1,0.9\no2,0.7\n");

  auto eval = [&](const std::string& scores, std::string& err_text) {
    std::ostringstream out, err;
    const int code = cli::run({"eval", "--manifest", (dir / "manifest.json").string(), "--detector",
                               "external", "--scores", scores, "--out", (dir / "results.json").string()},
                              out, err);
    err_text = err.str();
    return code;
  };
  std::string err;
  const int code = eval((dir / "scores.csv").string(), err);
  if (code != 0) {
    o.fail("eval exited " + std::to_string(code) + ": " + err);
    return o;
  }
  const auto results = results_from_json(nlohmann::json::parse(std::ifstream(dir / "results.json")));
  if (results.size() != 1 || results[0].metric.fpr_at_tpr95 != 0.0 || results[0].metric.auroc != 1.0) {
    o.fail("perfect separation did not give fpr 0 / auroc 1");
  }

  write_file(dir / "partial.csv", "case_id,score\nt1,0.1\nt2,0.3\nt3,0.2\no1,0.9\n");
  const int missing = eval((dir / "partial.csv").string(), err);
  if (missing == 0) o.fail("missing case_id did not abort");
  if (err.find("o2") == std::string::npos) o.fail("abort message does not name o2: " + err);
  if (o.pass) o.detail = "fpr 0 / auroc 1; missing id aborts with exit " + std::to_string(missing);
  return o;
}

Outcome fechner_convention() {
  Outcome o;
  const std::vector<double> a{1, 2, 3}, b{4, 5, 6}, c{1, 2, 4, 5}, d{5, 4, 2, 1};
  if (fechner_correlation(a, b) != 1.0) o.fail("co-monotone example");
  if (fechner_correlation(c, d) != -1.0) o.fail("anti-monotone example");
  std::mt19937_64 gen(1010);
  std::normal_distribution<double> nd;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + gen() % 40;
    std::vector<double> x(n), y(n), neg(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = trial % 3 == 0 ? std::round(nd(gen)) : nd(gen);
      y[i] = trial % 3 == 0 ? std::round(nd(gen)) : nd(gen);
      neg[i] = -x[i];
    }
    if (fechner_correlation(x, y) != oracle::fechner(x, y)) o.fail("oracle mismatch");
    const bool constant = std::all_of(x.begin(), x.end(), [&](double t) { return t == x[0]; });
    if (!constant && fechner_correlation(x, x) != 1.0) o.fail("self-correlation");
    if (fechner_correlation(x, neg) != oracle::fechner(x, neg)) o.fail("negated oracle mismatch");
  }
  if (o.pass) o.detail = "examples and 100 random pairs agree";
  return o;
}

struct Criterion {
  int id;
  const char* name;
  double budget_s;  // 0 = no runtime bound
  std::function<Outcome()> run;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "metric-oracle equivalence", 10.0, metric_oracles},
      {2, "mahalanobis identities", 0.0, mahalanobis_identities},
      {3, "pca contract", 0.0, pca_contract},
      {4, "histogram conservation and permutation invariance", 0.0, histogram_invariants},
      {5, "corruption determinism and monotonicity", 120.0, corruption_monotonicity},
      {6, "end-to-end synthetic benchmark", 300.0, synthetic_benchmark},
      {7, "null-challenge sanity", 0.0, null_challenge},
      {8, "volume-predictor rule recovery", 0.0, volume_rule},
      {9, "external-score ingestion", 0.0, external_ingestion},
      {10, "fechner convention", 0.0, fechner_convention},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = c.run();
    } catch (const std::exception& e) {
      outcome.fail(std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.budget_s > 0 && secs > c.budget_s) {
      outcome.fail("runtime " + fmt(secs) + " s exceeds " + fmt(c.budget_s) + " s");
    }
    std::printf("%s [%d] %s (%.1fs): %s\n", outcome.pass ? "PASS" : "FAIL", c.id, c.name, secs,
                outcome.detail.c_str());
    std::fflush(stdout);
    failures += !outcome.pass;
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
