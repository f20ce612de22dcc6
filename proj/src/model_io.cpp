#include "salbm/model_io.hpp"

#include <fstream>
#include <stdexcept>

namespace salbm {

nlohmann::json matrix_to_json_rowmajor(const Eigen::MatrixXd& m) {
  nlohmann::json out = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) out.push_back(m(i, j));
  return out;
}

Eigen::MatrixXd matrix_from_json_rowmajor(const nlohmann::json& j, int rows, int cols) {
  if (!j.is_array() || static_cast<int>(j.size()) != rows * cols)
    throw std::invalid_argument("matrix field has wrong length");
  Eigen::MatrixXd m(rows, cols);
  int k = 0;
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = j[k++].get<double>();
  return m;
}

nlohmann::json vector_to_json(const Eigen::VectorXd& v) {
  nlohmann::json out = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

Eigen::VectorXd vector_from_json(const nlohmann::json& j, int size) {
  if (!j.is_array() || static_cast<int>(j.size()) != size)
    throw std::invalid_argument("vector field has wrong length");
  Eigen::VectorXd v(size);
  for (int i = 0; i < size; ++i) v[i] = j[i].get<double>();
  return v;
}

nlohmann::json model_to_json(const ModelParams& u) {
  u.validate();
  nlohmann::json j;
  j["n_v"] = u.n_v;
  j["n_h"] = u.n_h;
  j["structure"] = to_string(u.structure);
  j["V"] = matrix_to_json_rowmajor(u.V);
  j["W"] = matrix_to_json_rowmajor(u.W);
  j["b"] = vector_to_json(u.b);
  j["c"] = vector_to_json(u.c);
  return j;
}

ModelParams model_from_json(const nlohmann::json& j) {
  for (const char* key : {"n_v", "n_h", "structure", "V", "W", "b", "c"})
    if (!j.contains(key)) throw std::invalid_argument(std::string("model file missing field: ") + key);
  ModelParams u;
  u.n_v = j["n_v"].get<int>();
  u.n_h = j["n_h"].get<int>();
  u.structure = structure_from_string(j["structure"].get<std::string>());
  u.V = matrix_from_json_rowmajor(j["V"], u.n_v, u.n_v);
  u.W = matrix_from_json_rowmajor(j["W"], u.n_v, u.n_h);
  u.b = vector_from_json(j["b"], u.n_v);
  u.c = vector_from_json(j["c"], u.n_h);
  u.validate();
  return u;
}

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  nlohmann::json j;
  in >> j;
  return j;
}

void write_json_file(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << "\n";
}

void write_model(const std::string& path, const ModelParams& u) {
  write_json_file(path, model_to_json(u));
}

ModelParams read_model(const std::string& path) {
  return model_from_json(read_json_file(path));
}

}  // namespace salbm
