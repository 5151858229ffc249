#include "ihfood/pca.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "ihfood/errors.hpp"
#include "json_eigen.hpp"

namespace ihfood {

PcaModel fit_pca(const Eigen::MatrixXd& train, double v) {
  if (train.rows() < 2) {
    throw FitError("PCA needs at least 2 training rows, got " + std::to_string(train.rows()));
  }
  if (!(v > 0.0 && v <= 1.0)) throw PreconditionError("PCA variance target must lie in (0, 1]");

  PcaModel model;
  model.v_target = v;
  model.mean = train.colwise().mean().transpose();
  const Eigen::MatrixXd centered = train.rowwise() - model.mean.transpose();

  Eigen::BDCSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinV);
  const Eigen::VectorXd& s = svd.singularValues();
  const Eigen::VectorXd power = s.array().square();
  const double total = power.sum();
  if (s.size() == 0 || !(total > 0.0) || !(s(0) > 0.0)) {
    throw FitError("PCA on zero-variance data: all training embeddings are identical");
  }

  const double tol = static_cast<double>(std::max(train.rows(), train.cols())) *
                     std::numeric_limits<double>::epsilon() * s(0);
  Eigen::Index rank = 0;
  while (rank < s.size() && s(rank) > tol) ++rank;

  Eigen::Index k = 0;
  double cumulative = 0.0;
  while (k < rank) {
    cumulative += power(k) / total;
    ++k;
    if (cumulative >= v) break;
  }

  model.components = svd.matrixV().leftCols(k).transpose();
  model.explained_variance_ratio = power.head(k) / total;
  for (Eigen::Index r = 0; r < k; ++r) {
    Eigen::Index argmax = 0;
    model.components.row(r).cwiseAbs().maxCoeff(&argmax);
    if (model.components(r, argmax) < 0.0) model.components.row(r) *= -1.0;
  }
  return model;
}

Eigen::VectorXd pca_transform(const PcaModel& model, const Eigen::VectorXd& e) {
  if (e.size() != model.mean.size()) {
    throw FitError("PCA input dimension mismatch: model expects m=" +
                   std::to_string(model.mean.size()) + ", got " + std::to_string(e.size()));
  }
  return model.components * (e - model.mean);
}

Eigen::MatrixXd pca_transform_rows(const PcaModel& model, const Eigen::MatrixXd& rows) {
  if (rows.cols() != model.mean.size()) {
    throw FitError("PCA input dimension mismatch: model expects m=" +
                   std::to_string(model.mean.size()) + ", got " + std::to_string(rows.cols()));
  }
  return (rows.rowwise() - model.mean.transpose()) * model.components.transpose();
}

nlohmann::json to_json(const PcaModel& model) {
  return {
      {"m", model.mean.size()},
      {"k", model.components.rows()},
      {"v_target", model.v_target},
      {"mean", detail::vector_to_json(model.mean)},
      {"components", detail::matrix_to_json(model.components)},
      {"explained_variance_ratio", detail::vector_to_json(model.explained_variance_ratio)},
  };
}

PcaModel pca_from_json(const nlohmann::json& j) {
  PcaModel model;
  model.v_target = detail::require(j, "v_target").get<double>();
  model.mean = detail::vector_from_json(j, "mean");
  model.components = detail::matrix_from_json(j, "components", model.mean.size());
  model.explained_variance_ratio = detail::vector_from_json(j, "explained_variance_ratio");
  const auto m = detail::require(j, "m").get<std::int64_t>();
  const auto k = detail::require(j, "k").get<std::int64_t>();
  if (m != model.mean.size() || model.components.cols() != model.mean.size()) {
    throw FitError("PCA model dimension mismatch: m=" + std::to_string(m) + " but mean has " +
                   std::to_string(model.mean.size()) + " entries and components have " +
                   std::to_string(model.components.cols()) + " columns");
  }
  if (k != model.components.rows() || model.explained_variance_ratio.size() != k) {
    throw FitError("PCA model dimension mismatch: k=" + std::to_string(k));
  }
  return model;
}

}  // namespace ihfood
