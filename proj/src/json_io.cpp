#include "acsmc/json_io.hpp"

#include "acsmc/error.hpp"

namespace acsmc::json_io {

json matrix_to_json(const ConstMatrixRef& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

json matrix_to_shaped_json(const ConstMatrixRef& m) {
  json data = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) data.push_back(m(i, j));
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

json vector_to_json(const ConstVectorRef& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

namespace {

double number(const json& j, const std::string& what) {
  if (!j.is_number()) throw ConfigError(what + ": expected a number");
  return j.get<double>();
}

}  // namespace

Matrix matrix_from_json(const json& j, const std::string& what) {
  if (j.is_number()) return Matrix::Constant(1, 1, j.get<double>());
  if (j.is_object()) {
    if (!j.contains("rows") || !j.contains("cols") || !j.contains("data"))
      throw ConfigError(what + ": shaped matrix needs rows, cols and data");
    const auto r = j.at("rows").get<Eigen::Index>();
    const auto c = j.at("cols").get<Eigen::Index>();
    const auto& data = j.at("data");
    if (r < 0 || c < 0 || !data.is_array() || static_cast<Eigen::Index>(data.size()) != r * c)
      throw ConfigError(what + ": data length does not match shape");
    Matrix m(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
      for (Eigen::Index k = 0; k < c; ++k) m(i, k) = number(data[i * c + k], what);
    return m;
  }
  if (!j.is_array()) throw ConfigError(what + ": expected a matrix");
  if (j.empty()) return Matrix(0, 0);
  if (!j.front().is_array()) {
    Matrix m(static_cast<Eigen::Index>(j.size()), 1);
    for (std::size_t i = 0; i < j.size(); ++i) m(static_cast<Eigen::Index>(i), 0) = number(j[i], what);
    return m;
  }
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j.front().size());
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
      throw ConfigError(what + ": ragged matrix rows");
    for (Eigen::Index k = 0; k < cols; ++k) m(i, k) = number(row[static_cast<std::size_t>(k)], what);
  }
  return m;
}

Vector vector_from_json(const json& j, const std::string& what) {
  if (j.is_number()) return Vector::Constant(1, j.get<double>());
  if (!j.is_array()) throw ConfigError(what + ": expected an array");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = number(j[i], what);
  return v;
}

std::string dump_exact(const json& j, int indent) {
  // nlohmann serializes doubles with max_digits10, which round-trips.
  return j.dump(indent);
}

}  // namespace acsmc::json_io
