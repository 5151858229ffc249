#pragma once

#include <cstddef>
#include <span>

#include <json.hpp>

namespace ihfood {

// OOD is the positive class; a higher score means more OOD-like.
struct MetricResult {
  double fpr_at_tpr95 = 0.0;
  double auroc = 0.0;
  std::size_t n_id = 0;
  std::size_t n_ood = 0;
  double threshold = 0.0;
};

struct FprAtTpr {
  double fpr = 0.0;
  double threshold = 0.0;
};

// Flags "score >= t" with the largest observed OOD score t whose detection
// rate reaches tpr_target, then reports the fraction of ID scores flagged.
// tpr_target must lie in (0, 1].
FprAtTpr fpr_at_tpr(std::span<const double> id_scores, std::span<const double> ood_scores,
                    double tpr_target = 0.95);

// P(ood > id) + 0.5 * P(ood == id), computed exactly from pair counts.
double auroc(std::span<const double> id_scores, std::span<const double> ood_scores);

MetricResult evaluate(std::span<const double> id_scores, std::span<const double> ood_scores,
                      double tpr_target = 0.95);

// (concordant - discordant) / n over deviations from the mean; a pair with a
// zero deviation product counts as concordant.
double fechner_correlation(std::span<const double> a, std::span<const double> b);

nlohmann::json to_json(const MetricResult& m);
MetricResult metric_result_from_json(const nlohmann::json& j);

}  // namespace ihfood
