#pragma once

#include "salbm/model.hpp"
#include "salbm/rng.hpp"

#include <json.hpp>

#include <string>
#include <utility>
#include <vector>

namespace salbm {

struct Dataset {
  Eigen::MatrixXi vectors;  // n_v x D, entries in {-1,+1}
  std::vector<int> labels;  // empty, or one class id per column
  std::string generator;
  std::uint64_t seed = 0;
  double zeta = 0.0;

  int dim() const { return static_cast<int>(vectors.rows()); }
  int count() const { return static_cast<int>(vectors.cols()); }
  bool labeled() const { return !labels.empty(); }
  void validate() const;
};

// Random three-body couplings on strictly increasing triples i<j<k.
struct ThreeSpinInstance {
  int n_v = 0;
  double zeta = 0.0;
  std::uint64_t seed = 0;
  struct Triple {
    int i, j, k;
    double t;
  };
  std::vector<Triple> triples;

  double energy(const SpinVector& v) const;  // -sum T_ijk v_i v_j v_k
  Eigen::VectorXd enumerate_energies() const;
};

// T_ijk ~ N(0, sqrt(3)*zeta/n_v); dataset drawn from the exact Boltzmann
// weights of the three-body energy at unit inverse temperature.
std::pair<ThreeSpinInstance, Dataset> gen_3spin(int n_v, double zeta, int count, std::uint64_t seed);

// Sherrington-Kirkpatrick couplings J_ij ~ N(0, zeta/sqrt(n)) for i<j,
// symmetrized, zero bias, visible-only.
ModelParams gen_sk(int n, double zeta, std::uint64_t seed);

// Random benchmark instance: V and W entries ~ N(0, weight_std), zero biases.
ModelParams gen_random_srbm(int n_v, int n_h, double weight_std, std::uint64_t seed);

// All bar patterns (each row uniformly colored: 2^rows) followed by all
// stripe patterns (each column: 2^cols). The two uniform images belong to
// both families and are kept twice unless dedup is set; the doubled count is
// the convention the benchmark sizes rely on. Pixels are row-major.
Dataset gen_bas(int rows, int cols, bool dedup = false);
std::pair<Dataset, Dataset> split_bas(int rows, int cols, std::uint64_t seed, bool dedup = false);

// Upstream digit format: 64 comma-separated pixel values in 0..16 plus a
// class digit. Pixels binarize at the four-bit midpoint (>= 8 maps to +1);
// the class becomes a 10-component one-hot tail, so vectors have length 74.
Dataset read_optdigits_file(const std::string& path);
std::pair<Dataset, Dataset> ingest_optdigits(const std::string& train_path,
                                             const std::string& test_path);

// Inverse-CDF sampling from an explicit distribution over 2^{n_spins} states.
Eigen::MatrixXi sample_exact(const Eigen::VectorXd& probs, int n_spins, int count, RngStream& rng);

// Empirical distribution over all 2^n states of the columns of `vectors`.
Eigen::VectorXd empirical_distribution(const Eigen::MatrixXi& vectors);

void write_dataset(const std::string& path, const Dataset& data,
                   const std::string& extra_header = "");
Dataset read_dataset(const std::string& path);

nlohmann::json three_spin_to_json(const ThreeSpinInstance& inst);
ThreeSpinInstance three_spin_from_json(const nlohmann::json& j);

nlohmann::json sk_to_json(const ModelParams& u, double zeta, std::uint64_t seed);
ModelParams sk_from_json(const nlohmann::json& j);

}  // namespace salbm
