#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace salbm {

// Ising state: every entry is -1 or +1.
using SpinVector = Eigen::VectorXi;

bool is_spin_vector(const SpinVector& s);

// FBM: visible-only, fully coupled. RBM: bipartite visible-hidden.
// SRBM: RBM plus visible-visible couplings. No structure has hidden-hidden
// couplings.
enum class Structure { FBM, RBM, SRBM };

const char* to_string(Structure s);
Structure structure_from_string(const std::string& s);

// Pairwise Boltzmann machine parameters, stored blockwise.
// The flat view is J = [[V, W], [W^T, 0]], f = (b, c) over s = (v, h).
struct ModelParams {
  int n_v = 0;
  int n_h = 0;
  Structure structure = Structure::SRBM;
  Eigen::MatrixXd V;  // n_v x n_v, symmetric, zero diagonal; all-zero for RBM
  Eigen::MatrixXd W;  // n_v x n_h
  Eigen::VectorXd b;  // n_v
  Eigen::VectorXd c;  // n_h

  int size() const { return n_v + n_h; }
  Eigen::MatrixXd coupling_matrix() const;
  Eigen::VectorXd bias_vector() const;
  void validate() const;  // throws std::invalid_argument on any broken invariant

  static ModelParams zeros(int n_v, int n_h, Structure structure);
  static ModelParams from_coupling(const Eigen::MatrixXd& J, const Eigen::VectorXd& f,
                                   int n_v, int n_h, Structure structure);
};

// State indexing: bit i of the index encodes spin i via spin = 2*bit - 1.
// Used consistently by every enumeration in this project.
SpinVector spin_state(std::uint32_t index, int n);
std::uint32_t state_index(const SpinVector& s);

// 2^N tables cap. 2^25 doubles is ~256 MB.
inline constexpr int kMaxEnumerationSpins = 25;
void check_enumerable(int n);

double energy(const SpinVector& s, const Eigen::MatrixXd& J, const Eigen::VectorXd& f);
double energy(const SpinVector& s, const ModelParams& u);

// Energies of all 2^N states, indexed by the bit convention above.
Eigen::VectorXd enumerate_energies(const Eigen::MatrixXd& J, const Eigen::VectorXd& f);
Eigen::VectorXd enumerate_energies(const ModelParams& u);

double log_sum_exp(const Eigen::VectorXd& v);

// exp(-beta*E_x)/Z over an energy table, normalized through log-sum-exp so
// that large beta*|E| cannot overflow.
Eigen::VectorXd boltzmann_distribution(const Eigen::VectorXd& energies, double beta);

Eigen::VectorXd exact_boltzmann(const ModelParams& u, double beta);

// Visible marginal over 2^{n_v} states: each entry sums the joint Boltzmann
// weight over all hidden configurations.
Eigen::VectorXd marginal_visible(const ModelParams& u, double beta);

// sum_x p(x) log(p(x)/q(x)); 0*log0 := 0; +infinity where p>0 and q=0.
double kl_divergence(const Eigen::VectorXd& p, const Eigen::VectorXd& q);

// Result of fixing a subset of visible spins. The reduced model ranges over
// (free visibles, hiddens) in original relative order; fixed couplings are
// folded into the reduced bias. Full and reduced energies differ by a
// constant: energy(embed(s'), u) = energy(s', model) + energy_offset.
struct ConditionedModel {
  ModelParams model;
  std::vector<int> free_indices;   // original index of each reduced variable
  std::vector<int> fixed_indices;  // original visible indices that were fixed
  SpinVector fixed_values;
  double energy_offset = 0.0;

  SpinVector embed(const SpinVector& reduced) const;
};

// `fixed` maps visible index -> spin value (+1/-1). Duplicate indices and
// out-of-range indices are rejected.
ConditionedModel condition(const ModelParams& u, const std::vector<std::pair<int, int>>& fixed);

}  // namespace salbm
