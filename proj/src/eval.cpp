#include "salbm/eval.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace salbm {

double sampling_accuracy(const SampleSet& samples, const ModelParams& u, double beta) {
  if (samples.spin_count() != u.size()) throw std::invalid_argument("sampling_accuracy: size mismatch");
  const Eigen::VectorXd energies = enumerate_energies(u);
  const Eigen::ArrayXd logw = -beta * energies.array();
  const double m = logw.maxCoeff();
  const double log_z = m + std::log((logw - m).exp().sum());

  const auto counts = state_counts(samples);
  const double total = samples.chain_count();
  double kl = 0.0;
  for (const auto& [idx, cnt] : counts) {
    const double p = cnt / total;
    const double log_b = -beta * energies[static_cast<Eigen::Index>(idx)] - log_z;
    kl += p * (std::log(p) - log_b);
  }
  return kl;
}

OverlapHistogram overlap_histogram(const Dataset& data, int bins, std::int64_t pair_cap,
                                   std::uint64_t seed) {
  data.validate();
  if (data.count() < 2) throw std::invalid_argument("overlap: need at least two vectors");
  if (bins < 1) throw std::invalid_argument("overlap: need at least one bin");

  OverlapHistogram hist;
  hist.edges = Eigen::VectorXd::LinSpaced(bins + 1, -1.0, 1.0);
  hist.counts = Eigen::VectorXi::Zero(bins);

  const Eigen::MatrixXd v = data.vectors.cast<double>();
  const double inv_nv = 1.0 / data.dim();
  const auto record = [&](int a, int b) {
    const double q = inv_nv * v.col(a).dot(v.col(b));
    const int bin = std::clamp(static_cast<int>((q + 1.0) * 0.5 * bins), 0, bins - 1);
    hist.counts[bin] += 1;
    hist.pair_count += 1;
  };

  const std::int64_t count = data.count();
  const std::int64_t all_pairs = count * (count - 1) / 2;
  if (all_pairs <= pair_cap) {
    for (int a = 0; a < count; ++a)
      for (int b = a + 1; b < count; ++b) record(a, b);
  } else {
    hist.subsampled = true;
    RngStream rng(seed, 0);
    std::int64_t drawn = 0;
    while (drawn < pair_cap) {
      const int a = static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(count));
      const int b = static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(count));
      if (a == b) continue;
      record(a, b);
      ++drawn;
    }
  }
  return hist;
}

SpinVector reconstruct(const ModelParams& u, const SpinVector& image, const std::vector<int>& mask,
                       const LsbConfig& cfg) {
  u.validate();
  if (image.size() != u.n_v || !is_spin_vector(image))
    throw std::invalid_argument("reconstruct: image must be a length-n_v spin vector");
  std::vector<char> masked(u.n_v, 0);
  for (int idx : mask) {
    if (idx < 0 || idx >= u.n_v) throw std::invalid_argument("reconstruct: mask index out of range");
    if (masked[idx]) throw std::invalid_argument("reconstruct: duplicate mask index");
    masked[idx] = 1;
  }
  if (mask.empty()) return image;
  if (static_cast<int>(mask.size()) == u.n_v && u.n_h == 0)
    throw std::invalid_argument("reconstruct: mask covers every pixel of a visible-only model");

  std::vector<std::pair<int, int>> fixed;
  for (int i = 0; i < u.n_v; ++i)
    if (!masked[i]) fixed.emplace_back(i, image[i]);
  const ConditionedModel cond = condition(u, fixed);
  const SampleSet set = lsb_sample(cond.model, cfg);

  SpinVector out = image;
  // free visibles occupy the leading reduced rows, in increasing pixel order
  const Eigen::VectorXi vote = set.samples.topRows(cond.model.n_v).rowwise().sum();
  for (int k = 0; k < cond.model.n_v; ++k) out[cond.free_indices[k]] = vote[k] >= 0 ? 1 : -1;
  return out;
}

SampleSet conditional_generate(const ModelParams& u, const std::vector<std::pair<int, int>>& fixed,
                               const LsbConfig& cfg) {
  u.validate();
  const ConditionedModel cond = condition(u, fixed);
  const SampleSet reduced = lsb_sample(cond.model, cfg);

  SampleSet out;
  out.samples.resize(u.n_v, reduced.chain_count());
  out.n_v = u.n_v;
  out.n_h = 0;
  out.sampler = "lsb-conditional";
  out.seed = cfg.seed;
  out.wall_seconds = reduced.wall_seconds;
  for (int l = 0; l < reduced.chain_count(); ++l) {
    for (std::size_t k = 0; k < cond.fixed_indices.size(); ++k)
      out.samples(cond.fixed_indices[k], l) = cond.fixed_values[static_cast<Eigen::Index>(k)];
    for (int k = 0; k < cond.model.n_v; ++k)
      out.samples(cond.free_indices[k], l) = reduced.samples(k, l);
  }
  return out;
}

int classify(const ModelParams& u, const SpinVector& image, int n_classes, const LsbConfig& cfg) {
  u.validate();
  if (n_classes < 1 || n_classes > u.n_v) throw std::invalid_argument("classify: bad class count");
  const int n_pixels = u.n_v - n_classes;
  if (image.size() != n_pixels || !is_spin_vector(image))
    throw std::invalid_argument("classify: image must cover exactly the non-label visibles");

  std::vector<std::pair<int, int>> fixed;
  fixed.reserve(n_pixels);
  for (int i = 0; i < n_pixels; ++i) fixed.emplace_back(i, image[i]);
  const ConditionedModel cond = condition(u, fixed);
  const SampleSet set = lsb_sample(cond.model, cfg);

  // label spins are the free visibles of the conditioned model
  const Eigen::VectorXd means =
      set.samples.topRows(n_classes).cast<double>().rowwise().mean();
  int best = 0;
  for (int j = 1; j < n_classes; ++j)
    if (means[j] > means[best]) best = j;
  return best;
}

double model_kl(const ModelParams& u, double beta, const Dataset& data) {
  data.validate();
  if (data.dim() != u.n_v) throw std::invalid_argument("model_kl: data dimension != n_v");
  const Eigen::VectorXd p_data = empirical_distribution(data.vectors);
  return kl_divergence(p_data, marginal_visible(u, beta));
}

void write_report_json(const std::string& path, const TaskReport& report,
                       const std::string& config_hash) {
  nlohmann::json j;
  j["task"] = report.task;
  if (!config_hash.empty()) j["config"] = config_hash;
  j["metrics"] = report.metrics;
  if (!report.details.empty()) {
    j["detail_columns"] = report.detail_columns;
    j["details"] = report.details;
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << "\n";
}

void write_report_csv(const std::string& path, const TaskReport& report,
                      const std::string& extra_header) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "# task=" << report.task << "\n";
  if (!extra_header.empty()) out << "# " << extra_header << "\n";
  for (const auto& [key, value] : report.metrics) out << "# " << key << "=" << value << "\n";
  out.precision(12);
  for (std::size_t i = 0; i < report.detail_columns.size(); ++i)
    out << (i ? "," : "") << report.detail_columns[i];
  out << "\n";
  for (const auto& row : report.details) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
    out << "\n";
  }
}

void write_overlap_csv(const std::string& path, const OverlapHistogram& hist,
                       const std::string& extra_header) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "# pairs=" << hist.pair_count << " subsampled=" << (hist.subsampled ? 1 : 0) << "\n";
  if (!extra_header.empty()) out << "# " << extra_header << "\n";
  out << "bin_lo,bin_hi,count\n";
  out.precision(12);
  for (int i = 0; i < hist.counts.size(); ++i)
    out << hist.edges[i] << "," << hist.edges[i + 1] << "," << hist.counts[i] << "\n";
}

}  // namespace salbm
