#include "ihfood/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "ihfood/errors.hpp"

namespace ihfood {

namespace {

void check_scores(std::span<const double> scores, const char* what) {
  if (scores.empty()) throw PreconditionError(std::string(what) + " scores are empty");
  for (double s : scores) {
    if (std::isnan(s)) throw PreconditionError(std::string(what) + " scores contain NaN");
    if (!std::isfinite(s)) throw PreconditionError(std::string(what) + " scores must be finite");
  }
}

std::vector<double> sorted(std::span<const double> xs) {
  std::vector<double> out(xs.begin(), xs.end());
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

FprAtTpr fpr_at_tpr(std::span<const double> id_scores, std::span<const double> ood_scores,
                    double tpr_target) {
  check_scores(id_scores, "ID");
  check_scores(ood_scores, "OOD");
  if (!(tpr_target > 0.0 && tpr_target <= 1.0)) {
    throw PreconditionError("tpr_target must lie in (0, 1]");
  }
  std::vector<double> ood(ood_scores.begin(), ood_scores.end());
  std::sort(ood.begin(), ood.end(), std::greater<>());
  const auto n_ood = static_cast<double>(ood.size());

  // Walk thresholds from the largest; count(ood >= ood[i]) is i+1 once past ties.
  double threshold = ood.back();
  for (std::size_t i = 0; i < ood.size(); ++i) {
    if (i + 1 < ood.size() && ood[i + 1] == ood[i]) continue;
    if (static_cast<double>(i + 1) / n_ood >= tpr_target) {
      threshold = ood[i];
      break;
    }
  }
  const auto id = sorted(id_scores);
  const auto flagged = id.end() - std::lower_bound(id.begin(), id.end(), threshold);
  return {static_cast<double>(flagged) / static_cast<double>(id.size()), threshold};
}

double auroc(std::span<const double> id_scores, std::span<const double> ood_scores) {
  check_scores(id_scores, "ID");
  check_scores(ood_scores, "OOD");
  const auto id = sorted(id_scores);
  // Twice the Mann-Whitney U statistic, exact in integers.
  std::uint64_t twice_u = 0;
  for (double s : ood_scores) {
    const auto lo = std::lower_bound(id.begin(), id.end(), s);
    const auto hi = std::upper_bound(lo, id.end(), s);
    twice_u += 2 * static_cast<std::uint64_t>(lo - id.begin()) + static_cast<std::uint64_t>(hi - lo);
  }
  const double pairs = static_cast<double>(id.size()) * static_cast<double>(ood_scores.size());
  return static_cast<double>(twice_u) / (2.0 * pairs);
}

MetricResult evaluate(std::span<const double> id_scores, std::span<const double> ood_scores,
                      double tpr_target) {
  const auto f = fpr_at_tpr(id_scores, ood_scores, tpr_target);
  return {f.fpr, auroc(id_scores, ood_scores), id_scores.size(), ood_scores.size(), f.threshold};
}

double fechner_correlation(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw PreconditionError("fechner correlation needs equal-length inputs");
  }
  if (a.size() < 2) throw PreconditionError("fechner correlation needs at least 2 values");
  double mean_a = 0.0, mean_b = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    mean_a += a[i];
    mean_b += b[i];
  }
  mean_a /= static_cast<double>(a.size());
  mean_b /= static_cast<double>(b.size());
  long long balance = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double prod = (a[i] - mean_a) * (b[i] - mean_b);
    balance += prod < 0.0 ? -1 : 1;
  }
  return static_cast<double>(balance) / static_cast<double>(a.size());
}

nlohmann::json to_json(const MetricResult& m) {
  return {{"fpr_at_tpr95", m.fpr_at_tpr95},
          {"auroc", m.auroc},
          {"n_id", m.n_id},
          {"n_ood", m.n_ood},
          {"threshold", m.threshold}};
}

MetricResult metric_result_from_json(const nlohmann::json& j) {
  try {
    return {j.at("fpr_at_tpr95").get<double>(), j.at("auroc").get<double>(),
            j.at("n_id").get<std::size_t>(), j.at("n_ood").get<std::size_t>(),
            j.at("threshold").get<double>()};
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("metric result: ") + e.what());
  }
}

}  // namespace ihfood
