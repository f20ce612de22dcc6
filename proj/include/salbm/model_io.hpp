#pragma once

#include "salbm/model.hpp"

#include <json.hpp>

#include <string>

namespace salbm {

// Model file schema:
//   { n_v, n_h, structure, V (row-major n_v*n_v), W (row-major n_v*n_h), b, c }
// Loader re-validates every structural invariant.
nlohmann::json model_to_json(const ModelParams& u);
ModelParams model_from_json(const nlohmann::json& j);

void write_model(const std::string& path, const ModelParams& u);
ModelParams read_model(const std::string& path);

nlohmann::json matrix_to_json_rowmajor(const Eigen::MatrixXd& m);
Eigen::MatrixXd matrix_from_json_rowmajor(const nlohmann::json& j, int rows, int cols);
nlohmann::json vector_to_json(const Eigen::VectorXd& v);
Eigen::VectorXd vector_from_json(const nlohmann::json& j, int size);

nlohmann::json read_json_file(const std::string& path);
void write_json_file(const std::string& path, const nlohmann::json& j);

}  // namespace salbm
