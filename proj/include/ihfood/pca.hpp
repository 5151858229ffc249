#pragma once

#include <cstddef>

#include <Eigen/Dense>
#include <json.hpp>

namespace ihfood {

// Principal directions of the training embeddings, frozen after fit.
// Rows of `components` are orthonormal; no whitening is applied.
struct PcaModel {
  Eigen::VectorXd mean;                      // m
  Eigen::MatrixXd components;                // k x m
  Eigen::VectorXd explained_variance_ratio;  // k, non-increasing
  double v_target = 0.9999;

  std::size_t input_dim() const noexcept { return static_cast<std::size_t>(mean.size()); }
  std::size_t output_dim() const noexcept {
    return static_cast<std::size_t>(components.rows());
  }
};

// Fits on an n x m matrix (one embedding per row). Keeps the smallest k whose
// cumulative explained-variance ratio reaches v, capped at the numerical rank.
// Each component is signed so its largest-magnitude entry is positive.
// Throws FitError for n < 2 or zero total variance, PreconditionError for v
// outside (0, 1].
PcaModel fit_pca(const Eigen::MatrixXd& train, double v);

// components * (e - mean). Throws FitError on a dimension mismatch.
Eigen::VectorXd pca_transform(const PcaModel& model, const Eigen::VectorXd& e);
Eigen::MatrixXd pca_transform_rows(const PcaModel& model, const Eigen::MatrixXd& rows);

nlohmann::json to_json(const PcaModel& model);
PcaModel pca_from_json(const nlohmann::json& j);

}  // namespace ihfood
