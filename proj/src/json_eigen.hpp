#pragma once

#include <string>

#include <Eigen/Dense>
#include <json.hpp>

#include "ihfood/errors.hpp"

namespace ihfood::detail {

inline nlohmann::json vector_to_json(const Eigen::VectorXd& v) {
  return nlohmann::json(std::vector<double>(v.data(), v.data() + v.size()));
}

// Row-major nested arrays.
inline nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  auto out = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    std::vector<double> row(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index c = 0; c < m.cols(); ++c) row[static_cast<std::size_t>(c)] = m(r, c);
    out.push_back(row);
  }
  return out;
}

inline const nlohmann::json& require(const nlohmann::json& j, const char* field) {
  if (!j.is_object() || !j.contains(field)) {
    throw FormatError(std::string("missing field '") + field + "'");
  }
  return j.at(field);
}

inline Eigen::VectorXd vector_from_json(const nlohmann::json& j, const char* field) {
  const auto& a = require(j, field);
  if (!a.is_array()) throw FormatError(std::string("'") + field + "' must be an array");
  Eigen::VectorXd v(static_cast<Eigen::Index>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!a[i].is_number()) throw FormatError(std::string("'") + field + "' must hold numbers");
    v(static_cast<Eigen::Index>(i)) = a[i].get<double>();
  }
  return v;
}

inline Eigen::MatrixXd matrix_from_json(const nlohmann::json& j, const char* field,
                                        Eigen::Index cols_if_empty = 0) {
  const auto& a = require(j, field);
  if (!a.is_array()) throw FormatError(std::string("'") + field + "' must be an array");
  const auto rows = static_cast<Eigen::Index>(a.size());
  const Eigen::Index cols = rows == 0 ? cols_if_empty : static_cast<Eigen::Index>(a[0].size());
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = a[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw FormatError(std::string("'") + field + "' must be a rectangular matrix");
    }
    for (Eigen::Index c = 0; c < cols; ++c) {
      const auto& x = row[static_cast<std::size_t>(c)];
      if (!x.is_number()) throw FormatError(std::string("'") + field + "' must hold numbers");
      m(r, c) = x.get<double>();
    }
  }
  return m;
}

}  // namespace ihfood::detail
