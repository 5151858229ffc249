#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "ihfood/embedding.hpp"
#include "ihfood/pca.hpp"
#include "ihfood/preprocess.hpp"
#include "ihfood/volume.hpp"

namespace ihfood {

inline constexpr std::size_t kDefaultBins = 150;
inline constexpr double kDefaultVariance = 0.9999;
inline constexpr double kDefaultRidge = 1e-9;

// Intensity Histogram Features detector. Holds everything needed to map a raw
// volume to its (optionally PCA-reduced) histogram vector and to score it
// against the training set by Mahalanobis or nearest-neighbor distance.
struct IhfDetector {
  PreprocessConfig preprocess_cfg;
  std::size_t m = kDefaultBins;
  std::optional<PcaModel> pca;
  Eigen::MatrixXd train_vectors;  // n x k
  Eigen::VectorXd mu_hat;         // k
  Eigen::MatrixXd sigma_inv;      // k x k
  double ridge = kDefaultRidge;

  std::size_t dim() const noexcept { return static_cast<std::size_t>(mu_hat.size()); }
};

// Stacks histogram values into an n x m matrix.
Eigen::MatrixXd embedding_matrix(std::span<const Embedding> embeddings);

// Full pipeline: preprocess -> histogram -> optional PCA (v) -> mean and
// 1/n covariance -> inverse of (cov + ridge * trace(cov)/k * I).
IhfDetector fit_ihf(std::span<const Volume> train_volumes, const PreprocessConfig& cfg,
                    std::size_t m, std::optional<double> v, double ridge = kDefaultRidge);

// Same, starting from histogram rows (n x m) that were already computed.
IhfDetector fit_ihf_embeddings(const Eigen::MatrixXd& embeddings, const PreprocessConfig& cfg,
                               std::optional<double> v, double ridge = kDefaultRidge);

// Mean/covariance estimation on vectors that are already in detector space.
// Throws FitError when the regularized covariance is singular.
void fit_gaussian(IhfDetector& d, const Eigen::MatrixXd& vectors);

// Maps a raw volume to detector space: preprocess, histogram, PCA.
Eigen::VectorXd ihf_vector(const IhfDetector& d, const Volume& x);
// Maps a histogram to detector space (applies PCA when present).
Eigen::VectorXd ihf_vector(const IhfDetector& d, const Embedding& e);

double mahalanobis(const IhfDetector& d, const Eigen::VectorXd& vec);
double nearest_neighbor_distance(const IhfDetector& d, const Eigen::VectorXd& vec);

double score_mahalanobis(const IhfDetector& d, const Volume& x);
double score_nn(const IhfDetector& d, const Volume& x);

nlohmann::json to_json(const IhfDetector& d);
IhfDetector ihf_from_json(const nlohmann::json& j);
nlohmann::json to_json(const PreprocessConfig& cfg);
PreprocessConfig preprocess_config_from_json(const nlohmann::json& j);

// Two-sided volume outlier rule turned into a score: |P(vol) - 50| where P is
// the mid-rank empirical percentile among the training volumes. Flagging
// score > 50 - q/2 recovers "outside the [q/2, 100 - q/2] percentile band".
class VolumePredictor {
 public:
  explicit VolumePredictor(std::vector<double> train_volumes);

  double percentile_rank(double vol) const;
  double score(double vol) const;
  std::span<const double> train_volumes() const noexcept { return train_; }

 private:
  std::vector<double> train_;
};

inline double volume_score(const VolumePredictor& p, double vol) { return p.score(vol); }

nlohmann::json to_json(const VolumePredictor& p);
VolumePredictor volume_predictor_from_json(const nlohmann::json& j);

inline constexpr double kPredictedAreaThreshold = 0.5;

// Voxels with p > 0.5 form the predicted area.
std::size_t predicted_voxels(const Volume& prob_map);
// Predicted area in mm^3.
double predicted_volume_mm3(const Volume& prob_map);

// Mean binary entropy (natural log) over the predicted area; 0 if empty.
double entropy_score(const Volume& prob_map);

// Mean over voxels of the population standard deviation across K >= 2 maps.
double uncertainty_score(std::span<const Volume> prob_maps);

}  // namespace ihfood
