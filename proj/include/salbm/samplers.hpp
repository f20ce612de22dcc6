#pragma once

#include "salbm/model.hpp"
#include "salbm/rng.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace salbm {

// Hyperparameters of the Langevin-style bifurcation sampler. delta and sigma
// are the only dynamical knobs; everything else is run shape.
struct LsbConfig {
  double delta = 1.0;       // symplectic time step
  double sigma = 1.0;       // momentum reinitialization noise std
  int iterations = 100;     // M
  int chains = 1;           // L
  std::uint64_t seed = 0;
  int threads = 0;          // 0 = global default
  void validate() const;
};

enum class SbVariant { aSB, bSB, dSB, cLSB };

const char* to_string(SbVariant v);
SbVariant sb_variant_from_string(const std::string& s);

// Bifurcation-machine baselines. dt/a0 follow the usual SB notation; the pump
// is held constant (schedules are out of scope). Per step, c0 is 1 for aSB,
// sqrt(sum_j x_j^2 / sum_i (sum_j J_ij x_j)^2) for bSB and
// sqrt(N / sum_i (sum_j J_ij sgn x_j)^2) for dSB, recomputed per chain.
// cLSB runs the LSB update with the position discretization replaced by
// clipping to [-1, 1]; sigma applies to cLSB only.
struct SbConfig {
  SbVariant variant = SbVariant::cLSB;
  double dt = 1.0;
  double a0 = 1.0;
  double pump = 0.0;        // constant a(t)
  double sigma = 1.0;       // cLSB momentum noise
  int iterations = 100;
  int chains = 1;
  std::uint64_t seed = 0;
  int threads = 0;
  void validate() const;
};

struct SampleSet {
  Eigen::MatrixXi samples;  // N x L, one chain per column, entries in {-1,+1}
  int n_v = 0;
  int n_h = 0;
  std::string sampler;
  std::uint64_t seed = 0;
  double wall_seconds = 0.0;

  int chain_count() const { return static_cast<int>(samples.cols()); }
  int spin_count() const { return static_cast<int>(samples.rows()); }
};

// One chain per (cfg.seed, chain index) stream:
//   x_i ~ uniform{-1,+1},  y_i ~ N(0, sigma)
//   repeat M times: y += (J*sgn(x) + f)*delta; x += y*delta;
//                   x <- sgn(x); y <- fresh N(0, sigma)
// sgn(0) := +1. The discretize/reinit pair runs at the end of every
// iteration including the last, so the output is the current x.
SampleSet lsb_sample(const ModelParams& u, const LsbConfig& cfg);

// SB-family baselines (and cLSB) with the same chain/stream layout as
// lsb_sample. aSB/bSB/dSB initialize x ~ U(-1,1), y ~ U(-0.1,0.1); outputs
// are sgn(x) after M steps. bSB/dSB bounce at the walls: |x|>1 sets
// x = sgn(x), y = 0.
SampleSet sb_sample(const ModelParams& u, const SbConfig& cfg);

// Sequential single-site Gibbs sampling. Each chain starts from a uniform
// random state; a sweep updates sites 0..N-1 in order, drawing s_i = +1 with
// probability logistic(2*beta*(sum_j J_ij s_j + f_i)). The state after the
// last sweep is the sample.
SampleSet gibbs_sample(const ModelParams& u, double beta, int sweeps, int chains,
                       std::uint64_t seed, int threads = 0);

// RBM alternating block updates: h ~ p(h|init_v), then k rounds of
// v ~ p(v|h), h ~ p(h|v). k = 0 returns (init_v, first h).
std::pair<SpinVector, SpinVector> blocked_gibbs_chain(const ModelParams& u, double beta, int k,
                                                      const SpinVector& init_v, std::uint64_t seed);

// Batched variant used by contrastive-divergence training: one chain per
// column of init_v, chain l drawing from stream (seed, l). Returns the final
// visible and hidden sample matrices (entries ±1, stored as double).
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> blocked_gibbs_chains(const ModelParams& u, double beta, int k,
                                                                 const Eigen::MatrixXd& init_v,
                                                                 std::uint64_t seed, int threads = 0);

// Damped mean-field relaxation of the visible units with hiddens held fixed:
// v <- (1-damping)*v + damping*tanh(V v + W h + b), `iters` times from v0.
Eigen::VectorXd dmfi_visible(const ModelParams& u, const SpinVector& h, const Eigen::VectorXd& v0,
                             int iters, double damping);

double logistic(double x);

// CSV layout: '#' metadata header, then one sample per row.
void write_samples(const std::string& path, const SampleSet& set,
                   const std::string& extra_header = "");
SampleSet read_samples(const std::string& path);

}  // namespace salbm
