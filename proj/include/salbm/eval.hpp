#pragma once

#include "salbm/beta_estimation.hpp"
#include "salbm/datasets.hpp"
#include "salbm/model.hpp"
#include "salbm/samplers.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace salbm {

struct OverlapHistogram {
  Eigen::VectorXd edges;   // bins + 1 edges spanning [-1, 1]
  Eigen::VectorXi counts;  // one per bin
  std::int64_t pair_count = 0;
  bool subsampled = false;
};

struct TaskReport {
  std::string task;
  std::map<std::string, double> metrics;
  std::vector<std::string> detail_columns;
  std::vector<std::vector<double>> details;  // one row per evaluated sample
};

// KL(P_S || B_beta) over full states: the sampling-accuracy metric.
double sampling_accuracy(const SampleSet& samples, const ModelParams& u, double beta);

// Pairwise-overlap histogram q = (1/n_v) v.v' over unordered sample pairs.
// Above pair_cap pairs, a seeded random subset of pair_cap pairs is used.
OverlapHistogram overlap_histogram(const Dataset& data, int bins,
                                   std::int64_t pair_cap = 1000000, std::uint64_t seed = 0);

// Conditions on the pixels outside `mask`, samples the masked pixels (and
// hiddens) with conditional LSB, and fills each masked pixel by majority
// vote across chains (ties resolve to +1).
SpinVector reconstruct(const ModelParams& u, const SpinVector& image, const std::vector<int>& mask,
                       const LsbConfig& cfg);

// Conditional LSB generation; returns complete visible vectors, with the
// fixed entries held at their assigned values in every chain.
SampleSet conditional_generate(const ModelParams& u, const std::vector<std::pair<int, int>>& fixed,
                               const LsbConfig& cfg);

// Conditions on the leading image pixels, samples the trailing n_classes
// label spins, averages them across chains, and returns the argmax component
// (ties resolve to the lowest class index).
int classify(const ModelParams& u, const SpinVector& image, int n_classes, const LsbConfig& cfg);

// Exact cost: KL between the empirical distribution of `data` and the
// visible marginal of u at inverse temperature beta.
double model_kl(const ModelParams& u, double beta, const Dataset& data);

void write_report_json(const std::string& path, const TaskReport& report,
                       const std::string& config_hash = "");
void write_report_csv(const std::string& path, const TaskReport& report,
                      const std::string& extra_header = "");
void write_overlap_csv(const std::string& path, const OverlapHistogram& hist,
                       const std::string& extra_header = "");

}  // namespace salbm
