#include "ihfood/detectors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "ihfood/errors.hpp"
#include "json_eigen.hpp"

namespace ihfood {

using nlohmann::json;

Eigen::MatrixXd embedding_matrix(std::span<const Embedding> embeddings) {
  if (embeddings.empty()) return {};
  const auto m = static_cast<Eigen::Index>(embeddings.front().bins());
  Eigen::MatrixXd out(static_cast<Eigen::Index>(embeddings.size()), m);
  for (std::size_t r = 0; r < embeddings.size(); ++r) {
    if (static_cast<Eigen::Index>(embeddings[r].bins()) != m) {
      throw PreconditionError("embeddings have inconsistent bin counts");
    }
    for (Eigen::Index c = 0; c < m; ++c) {
      out(static_cast<Eigen::Index>(r), c) = embeddings[r].values[static_cast<std::size_t>(c)];
    }
  }
  return out;
}

void fit_gaussian(IhfDetector& d, const Eigen::MatrixXd& vectors) {
  const Eigen::Index n = vectors.rows();
  const Eigen::Index k = vectors.cols();
  if (n < 2) throw FitError("need at least 2 training vectors");
  if (k == 0) throw FitError("detector space has zero dimensions");
  if (!(d.ridge >= 0.0) || !std::isfinite(d.ridge)) {
    throw PreconditionError("ridge must be a finite non-negative number");
  }

  d.train_vectors = vectors;
  d.mu_hat = vectors.colwise().mean().transpose();
  const Eigen::MatrixXd centered = vectors.rowwise() - d.mu_hat.transpose();
  Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(n);

  const double mean_diag = cov.trace() / static_cast<double>(k);
  if (!(mean_diag > 0.0)) {
    throw FitError("training vectors have zero variance; the covariance cannot be inverted");
  }
  cov.diagonal().array() += d.ridge * mean_diag;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success) throw FitError("covariance eigendecomposition failed");
  const Eigen::VectorXd& lambda = eig.eigenvalues();
  const double floor =
      static_cast<double>(k) * std::numeric_limits<double>::epsilon() * lambda.maxCoeff();
  if (!(lambda.minCoeff() > floor)) {
    throw FitError("covariance is singular (n=" + std::to_string(n) + ", k=" +
                   std::to_string(k) + "); enable PCA or raise the ridge");
  }
  const Eigen::MatrixXd& basis = eig.eigenvectors();
  Eigen::MatrixXd inv = basis * lambda.cwiseInverse().asDiagonal() * basis.transpose();
  d.sigma_inv = 0.5 * (inv + inv.transpose());
}

IhfDetector fit_ihf_embeddings(const Eigen::MatrixXd& embeddings, const PreprocessConfig& cfg,
                               std::optional<double> v, double ridge) {
  if (embeddings.rows() < 2) {
    throw FitError("IHF needs at least 2 training volumes, got " +
                   std::to_string(embeddings.rows()));
  }
  IhfDetector d;
  d.preprocess_cfg = cfg;
  d.m = static_cast<std::size_t>(embeddings.cols());
  d.ridge = ridge;
  if (v) {
    d.pca = fit_pca(embeddings, *v);
    if (d.pca->output_dim() == 0) throw FitError("PCA retained no components");
    Eigen::MatrixXd vectors(embeddings.rows(), static_cast<Eigen::Index>(d.pca->output_dim()));
    for (Eigen::Index r = 0; r < embeddings.rows(); ++r) {
      vectors.row(r) = pca_transform(*d.pca, embeddings.row(r).transpose()).transpose();
    }
    fit_gaussian(d, vectors);
  } else {
    fit_gaussian(d, embeddings);
  }
  return d;
}

IhfDetector fit_ihf(std::span<const Volume> train_volumes, const PreprocessConfig& cfg,
                    std::size_t m, std::optional<double> v, double ridge) {
  if (train_volumes.size() < 2) {
    throw FitError("IHF needs at least 2 training volumes, got " +
                   std::to_string(train_volumes.size()));
  }
  std::vector<Embedding> embeddings;
  embeddings.reserve(train_volumes.size());
  for (const auto& x : train_volumes) embeddings.push_back(histogram(preprocess(x, cfg), m));
  return fit_ihf_embeddings(embedding_matrix(embeddings), cfg, v, ridge);
}

Eigen::VectorXd ihf_vector(const IhfDetector& d, const Embedding& e) {
  if (e.bins() != d.m) {
    throw FitError("histogram has " + std::to_string(e.bins()) + " bins but the detector uses m=" +
                   std::to_string(d.m));
  }
  const Eigen::VectorXd raw =
      Eigen::Map<const Eigen::VectorXd>(e.values.data(), static_cast<Eigen::Index>(e.bins()));
  return d.pca ? pca_transform(*d.pca, raw) : raw;
}

Eigen::VectorXd ihf_vector(const IhfDetector& d, const Volume& x) {
  return ihf_vector(d, histogram(preprocess(x, d.preprocess_cfg), d.m));
}

double mahalanobis(const IhfDetector& d, const Eigen::VectorXd& vec) {
  if (vec.size() != d.mu_hat.size()) {
    throw FitError("vector dimension " + std::to_string(vec.size()) +
                   " does not match detector dimension " + std::to_string(d.mu_hat.size()));
  }
  const Eigen::VectorXd diff = vec - d.mu_hat;
  const double q = diff.dot(d.sigma_inv * diff);
  return std::sqrt(std::max(0.0, q));
}

double nearest_neighbor_distance(const IhfDetector& d, const Eigen::VectorXd& vec) {
  if (vec.size() != d.train_vectors.cols()) {
    throw FitError("vector dimension " + std::to_string(vec.size()) +
                   " does not match detector dimension " +
                   std::to_string(d.train_vectors.cols()));
  }
  if (d.train_vectors.rows() == 0) throw FitError("detector has no stored training vectors");
  double best = std::numeric_limits<double>::infinity();
  for (Eigen::Index r = 0; r < d.train_vectors.rows(); ++r) {
    best = std::min(best, (d.train_vectors.row(r).transpose() - vec).squaredNorm());
  }
  return std::sqrt(best);
}

double score_mahalanobis(const IhfDetector& d, const Volume& x) {
  return mahalanobis(d, ihf_vector(d, x));
}

double score_nn(const IhfDetector& d, const Volume& x) {
  return nearest_neighbor_distance(d, ihf_vector(d, x));
}

json to_json(const PreprocessConfig& cfg) {
  json clip;
  if (const auto* w = std::get_if<FixedWindow>(&cfg.clip)) {
    clip = {{"mode", "fixed"}, {"lo", w->lo}, {"hi", w->hi}};
  } else {
    const auto& p = std::get<PercentileWindow>(cfg.clip);
    clip = {{"mode", "percentile"}, {"lo", p.p_lo}, {"hi", p.p_hi}};
  }
  return {{"target_spacing", cfg.target_spacing}, {"clip", clip}};
}

PreprocessConfig preprocess_config_from_json(const json& j) {
  PreprocessConfig cfg;
  if (j.is_string()) {
    const auto preset = j.get<std::string>();
    if (preset == "ct") return PreprocessConfig::ct();
    if (preset == "mri") return PreprocessConfig::mri();
    throw FormatError("unknown modality preset '" + preset + "' (expected ct or mri)");
  }
  if (!j.is_object()) throw FormatError("modality must be an object or a preset name");
  if (j.contains("preset")) cfg = preprocess_config_from_json(j.at("preset"));
  if (j.contains("target_spacing")) {
    const auto& t = j.at("target_spacing");
    if (!t.is_array() || t.size() != 3) {
      throw FormatError("modality.target_spacing must be an array of 3 numbers");
    }
    for (std::size_t i = 0; i < 3; ++i) {
      if (!t[i].is_number()) throw FormatError("modality.target_spacing entries must be numbers");
      cfg.target_spacing[i] = t[i].get<double>();
    }
  }
  if (j.contains("clip")) {
    const auto& c = j.at("clip");
    if (!c.is_object() || !c.contains("mode") || !c.at("mode").is_string()) {
      throw FormatError("modality.clip.mode must be \"fixed\" or \"percentile\"");
    }
    const auto mode = c.at("mode").get<std::string>();
    auto number = [&](const char* key, double fallback) {
      if (!c.contains(key)) return fallback;
      if (!c.at(key).is_number()) {
        throw FormatError(std::string("modality.clip.") + key + " must be a number");
      }
      return c.at(key).get<double>();
    };
    if (mode == "fixed") {
      cfg.clip = FixedWindow{number("lo", -1350.0), number("hi", 300.0)};
    } else if (mode == "percentile") {
      cfg.clip = PercentileWindow{number("lo", 1.0), number("hi", 99.0)};
    } else {
      throw FormatError("modality.clip.mode must be \"fixed\" or \"percentile\", got '" + mode +
                        "'");
    }
  }
  try {
    cfg.validate();
  } catch (const PreconditionError& e) {
    throw FormatError(std::string("modality: ") + e.what());
  }
  return cfg;
}

json to_json(const IhfDetector& d) {
  json j = {
      {"type", "ihf"},
      {"m", d.m},
      {"ridge", d.ridge},
      {"preprocess", to_json(d.preprocess_cfg)},
      {"pca", d.pca ? to_json(*d.pca) : json(nullptr)},
      {"train_vectors", detail::matrix_to_json(d.train_vectors)},
      {"mu_hat", detail::vector_to_json(d.mu_hat)},
      {"sigma_inv", detail::matrix_to_json(d.sigma_inv)},
  };
  return j;
}

IhfDetector ihf_from_json(const json& j) {
  if (j.value("type", std::string()) != "ihf") throw FormatError("not an IHF detector bundle");
  IhfDetector d;
  d.m = detail::require(j, "m").get<std::size_t>();
  d.ridge = detail::require(j, "ridge").get<double>();
  d.preprocess_cfg = preprocess_config_from_json(detail::require(j, "preprocess"));
  if (const auto& p = detail::require(j, "pca"); !p.is_null()) d.pca = pca_from_json(p);
  d.mu_hat = detail::vector_from_json(j, "mu_hat");
  d.train_vectors = detail::matrix_from_json(j, "train_vectors", d.mu_hat.size());
  d.sigma_inv = detail::matrix_from_json(j, "sigma_inv", d.mu_hat.size());

  const auto k = d.mu_hat.size();
  const auto expected_k =
      d.pca ? static_cast<Eigen::Index>(d.pca->output_dim()) : static_cast<Eigen::Index>(d.m);
  if (d.pca && d.pca->input_dim() != d.m) {
    throw FitError("detector dimension mismatch: m=" + std::to_string(d.m) +
                   " but the PCA model expects m=" + std::to_string(d.pca->input_dim()));
  }
  if (k != expected_k || d.train_vectors.cols() != k || d.sigma_inv.rows() != k ||
      d.sigma_inv.cols() != k) {
    throw FitError("detector dimension mismatch: expected k=" + std::to_string(expected_k) +
                   " for m=" + std::to_string(d.m));
  }
  return d;
}

VolumePredictor::VolumePredictor(std::vector<double> train_volumes)
    : train_(std::move(train_volumes)) {
  if (train_.size() < 2) throw FitError("volume predictor needs at least 2 training volumes");
  for (double x : train_) {
    if (!std::isfinite(x)) throw PreconditionError("training volumes must be finite");
  }
  std::sort(train_.begin(), train_.end());
}

double VolumePredictor::percentile_rank(double vol) const {
  const auto less = std::lower_bound(train_.begin(), train_.end(), vol) - train_.begin();
  const auto less_eq = std::upper_bound(train_.begin(), train_.end(), vol) - train_.begin();
  return static_cast<double>(less + less_eq) * 50.0 / static_cast<double>(train_.size());
}

double VolumePredictor::score(double vol) const { return std::abs(percentile_rank(vol) - 50.0); }

json to_json(const VolumePredictor& p) {
  return {{"type", "volume"},
          {"train_volumes", std::vector<double>(p.train_volumes().begin(),
                                                p.train_volumes().end())}};
}

VolumePredictor volume_predictor_from_json(const json& j) {
  if (j.value("type", std::string()) != "volume") {
    throw FormatError("not a volume predictor bundle");
  }
  return VolumePredictor(detail::require(j, "train_volumes").get<std::vector<double>>());
}

namespace {

void require_probabilities(const Volume& v) {
  for (float p : v.data()) {
    if (!(p >= 0.0f && p <= 1.0f)) {
      throw PreconditionError("probability map values must lie in [0, 1]");
    }
  }
}

double binary_entropy(double p) {
  double h = 0.0;
  if (p > 0.0) h -= p * std::log(p);
  if (p < 1.0) h -= (1.0 - p) * std::log1p(-p);
  return h;
}

}  // namespace

std::size_t predicted_voxels(const Volume& prob_map) {
  std::size_t n = 0;
  for (float p : prob_map.data()) n += p > kPredictedAreaThreshold;
  return n;
}

double predicted_volume_mm3(const Volume& prob_map) {
  const auto& s = prob_map.spacing();
  return static_cast<double>(predicted_voxels(prob_map)) * s[0] * s[1] * s[2];
}

double entropy_score(const Volume& prob_map) {
  require_probabilities(prob_map);
  double sum = 0.0;
  std::size_t count = 0;
  for (float p : prob_map.data()) {
    if (p > kPredictedAreaThreshold) {
      sum += binary_entropy(p);
      ++count;
    }
  }
  return count == 0 ? 0.0 : sum / static_cast<double>(count);
}

double uncertainty_score(std::span<const Volume> prob_maps) {
  if (prob_maps.size() < 2) throw PreconditionError("uncertainty needs at least 2 maps");
  const auto& shape = prob_maps.front().shape();
  for (const auto& map : prob_maps) {
    if (map.shape() != shape) throw PreconditionError("probability maps differ in shape");
    require_probabilities(map);
  }
  const std::size_t n = prob_maps.front().size();
  const double k = static_cast<double>(prob_maps.size());
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double mean = 0.0;
    for (const auto& map : prob_maps) mean += map.data()[i];
    mean /= k;
    double var = 0.0;
    for (const auto& map : prob_maps) {
      const double dlt = map.data()[i] - mean;
      var += dlt * dlt;
    }
    total += std::sqrt(var / k);
  }
  return total / static_cast<double>(n);
}

}  // namespace ihfood
