#pragma once

#include <string>

#include "json.hpp"

#include "acsmc/linalg.hpp"

namespace acsmc::json_io {

using nlohmann::json;

/// Row-major nested arrays, e.g. [[1, 2], [3, 4]].
json matrix_to_json(const ConstMatrixRef& m);
/// {"rows": r, "cols": c, "data": [row-major]}; keeps empty shapes such as 3 × 0.
json matrix_to_shaped_json(const ConstMatrixRef& m);
json vector_to_json(const ConstVectorRef& v);

/// Accepts nested arrays, a flat array (read as a column), a scalar (1 × 1)
/// or the shaped form. `what` names the field in error messages.
Matrix matrix_from_json(const json& j, const std::string& what);
Vector vector_from_json(const json& j, const std::string& what);

/// Doubles survive a dump/parse round trip bit-exactly.
std::string dump_exact(const json& j, int indent = -1);

}  // namespace acsmc::json_io
