#pragma once

#include "salbm/beta_estimation.hpp"
#include "salbm/datasets.hpp"
#include "salbm/model.hpp"
#include "salbm/samplers.hpp"

#include <string>
#include <vector>

namespace salbm {

// Per-parameter gradient (data-side moments minus model-side moments).
// Positive entries push the corresponding coupling up.
struct GradientSet {
  Eigen::MatrixXd dV, dW;
  Eigen::VectorXd db, dc;

  static GradientSet zeros(const ModelParams& u);
  double norm() const;
};

// First and second moments over full states s = (v, h).
struct Moments {
  Eigen::MatrixXd second;  // N x N
  Eigen::VectorXd mean;    // N
};

Moments sample_moments(const SampleSet& set);
Moments moments_from_pairs(const Eigen::MatrixXd& vs, const Eigen::MatrixXd& hs);
Moments exact_moments(const ModelParams& u, double beta);  // enumeration-based

// Data-side phase uses batch moments, with the hidden terms evaluated
// analytically as tanh(beta_eff*(c_j + sum_i v_i W_ij)) per batch vector;
// model-side phase is the supplied negative moments. dV comes out
// symmetrized with a zero diagonal.
GradientSet sal_gradient(const Eigen::MatrixXd& batch, const Moments& negative, double beta_eff,
                         const ModelParams& u);
GradientSet sal_gradient(const Eigen::MatrixXd& batch, const SampleSet& neg_samples,
                         double beta_eff, const ModelParams& u);

struct UpdateRule {
  double eta = 0.05;
  double momentum = 0.5;
  double l2 = 0.0;  // applied to V and W only, never to biases
};

// velocity <- momentum*velocity + eta*(gradient - l2*coupling);
// parameters += velocity. RBM runs keep V pinned at zero.
void apply_update(ModelParams& u, GradientSet& velocity, const GradientSet& gradient,
                  const UpdateRule& rule);

struct TrainConfig {
  double eta = 0.05;
  double momentum = 0.5;
  double l2 = 1e-5;
  int epochs = 500;
  int batch_size = 0;  // 0 = full batch
  LsbConfig lsb;       // negative-phase sampler; chains = L
  BetaMethod estimator = BetaMethod::CEM;
  int cem_conditions = 1;  // CEM-n condition count
  std::uint64_t seed = 0;
  int eval_every = 0;       // exact-cost cadence (requires N <= 25); 0 = never
  int checkpoint_every = 0; // 0 = never
  std::string checkpoint_dir;
  bool beta_per_batch = true;  // re-estimate beta for every mini-batch
  int threads = 0;
};

struct EpochRecord {
  int epoch = 0;
  double beta_eff = std::numeric_limits<double>::quiet_NaN();
  std::string estimator = "none";
  double kl_exact = std::numeric_limits<double>::quiet_NaN();
  double grad_norm = 0.0;
  double seconds = 0.0;
};

// Optimizer state for exact resumption.
struct Checkpoint {
  ModelParams model;
  GradientSet velocity;
  int next_epoch = 0;
  double beta_prev = 1.0;
};

struct TrainResult {
  ModelParams model;
  std::vector<EpochRecord> history;
  Checkpoint final_state;  // continue training from here reproducibly
};

// Negative phase sampled by LSB on the current parameters; beta_eff estimated
// per the configured estimator (skipped for FBM, where the update needs no
// temperature) with non-converged estimates falling back to the previous
// value.
TrainResult sal_train(const ModelParams& u0, const Dataset& data, const TrainConfig& cfg);
TrainResult sal_train(const Checkpoint& resume, const Dataset& data, const TrainConfig& cfg);

// Contrastive divergence for RBMs at unit inverse temperature: one blocked
// Gibbs chain per batch vector, started at that vector, k alternations.
TrainResult cd_train_rbm(const ModelParams& u0, const Dataset& data, int k, const TrainConfig& cfg);
TrainResult cd_train_rbm(const Checkpoint& resume, const Dataset& data, int k,
                         const TrainConfig& cfg);

// CD with the visible reconstruction replaced by damped mean-field
// relaxation; hiddens are still sampled exactly.
TrainResult dmfi_cd_train_srbm(const ModelParams& u0, const Dataset& data, int k, int dmfi_iters,
                               double damping, const TrainConfig& cfg);
TrainResult dmfi_cd_train_srbm(const Checkpoint& resume, const Dataset& data, int k,
                               int dmfi_iters, double damping, const TrainConfig& cfg);

// Couplings allowed by the structure drawn from N(0, 1e-4), biases zero.
ModelParams init_model(int n_v, int n_h, Structure structure, std::uint64_t seed);

void write_history(const std::string& path, const std::vector<EpochRecord>& history,
                   const std::string& extra_header = "");
std::vector<EpochRecord> read_history(const std::string& path);

void write_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint read_checkpoint(const std::string& path);

// Fixed batch partition: plain contiguous chunks after one seeded shuffle;
// stratified round-robin by class when labels are present.
std::vector<std::vector<int>> make_batches(const Dataset& data, int batch_size, std::uint64_t seed);

}  // namespace salbm
