#pragma once

#include "salbm/model.hpp"
#include "salbm/samplers.hpp"

#include <functional>
#include <utility>
#include <vector>

namespace salbm {

enum class BetaMethod { KL, CEM, CEMn, MLPL, None };
const char* to_string(BetaMethod m);
BetaMethod beta_method_from_string(const std::string& s);

struct BetaEstimate {
  double beta = 1.0;
  BetaMethod method = BetaMethod::KL;
  double objective = 0.0;
  bool converged = false;
};

struct ScalarMinimum {
  double x = 0.0;
  double value = 0.0;
  int evaluations = 0;
  bool converged = false;
};

// Bounded 1-D minimization: coarse bracket scan, then Brent refinement inside
// the best bracket. Never exceeds max_evals objective calls.
ScalarMinimum minimize_scalar(const std::function<double(double)>& fn, double lo, double hi,
                              double tol = 1e-6, int max_evals = 200);

inline constexpr double kBetaMax = 50.0;

// (state index, multiplicity) pairs sorted by index.
std::vector<std::pair<std::uint32_t, int>> state_counts(const SampleSet& set);

// argmin over [0, beta_max] of KL(P_S || B_beta), the reference estimator.
// Needs the full 2^N energy table, so it is enumeration-bound.
BetaEstimate estimate_beta_kl(const SampleSet& samples, const ModelParams& u,
                              double beta_max = kBetaMax);
BetaEstimate estimate_beta_kl(const SampleSet& samples, const Eigen::VectorXd& energies,
                              double beta_max = kBetaMax);

// Conditional expectation matching: minimizes
//   sum_j (cond_means_j - tanh(beta*(c_j + sum_i r_i W_ij)))^2.
// Flagged non-converged when every effective field is zero (flat objective).
BetaEstimate cem_estimate(const Eigen::VectorXd& cond_means, const SpinVector& r,
                          const Eigen::MatrixXd& W, const Eigen::VectorXd& c,
                          double beta_max = kBetaMax);

// Multi-condition variant: minimizes the sum of the per-condition objectives.
// n = 1 coincides with cem_estimate.
BetaEstimate cem_n_estimate(const std::vector<std::pair<Eigen::VectorXd, SpinVector>>& conditions,
                            const Eigen::MatrixXd& W, const Eigen::VectorXd& c,
                            double beta_max = kBetaMax);

// Maximum log-pseudo-likelihood over the samples' single-site logistic
// conditionals. Flagged when the objective is flat or saturates at beta_max.
BetaEstimate mlpl_estimate(const SampleSet& samples, const ModelParams& u,
                           double beta_max = kBetaMax);

// tanh(beta*(c + W^T r)) elementwise: the exact conditional hidden means of a
// model without hidden-hidden couplings.
Eigen::VectorXd conditional_hidden_mean_analytic(const SpinVector& r, const Eigen::MatrixXd& W,
                                                 const Eigen::VectorXd& c, double beta);

// Fixes v := r, samples the resulting hidden-only model with the same LSB
// hyperparameters, and returns the per-component hidden sample means.
Eigen::VectorXd cem_conditional_means(const ModelParams& u, const SpinVector& r,
                                      const LsbConfig& cfg);

}  // namespace salbm
