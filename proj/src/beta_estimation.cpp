#include "salbm/beta_estimation.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace salbm {

const char* to_string(BetaMethod m) {
  switch (m) {
    case BetaMethod::KL: return "kl";
    case BetaMethod::CEM: return "cem";
    case BetaMethod::CEMn: return "cemn";
    case BetaMethod::MLPL: return "mlpl";
    case BetaMethod::None: return "none";
  }
  return "?";
}

BetaMethod beta_method_from_string(const std::string& s) {
  if (s == "kl") return BetaMethod::KL;
  if (s == "cem") return BetaMethod::CEM;
  if (s == "cemn") return BetaMethod::CEMn;
  if (s == "mlpl") return BetaMethod::MLPL;
  if (s == "none") return BetaMethod::None;
  throw std::invalid_argument("unknown beta estimator: " + s);
}

namespace {

// Brent minimization on a bracketing interval [a, b]. `x0`/`f0` seed the best
// point. Adapted from the classic bounded formulation (golden section with
// parabolic steps).
ScalarMinimum brent(const std::function<double(double)>& fn, double a, double b, double x0,
                    double f0, double tol, int eval_budget) {
  constexpr double kGolden = 0.3819660112501051;
  double x = x0, w = x0, v = x0;
  double fx = f0, fw = f0, fv = f0;
  double d = 0.0, e = 0.0;
  int evals = 0;
  bool converged = false;

  while (true) {
    const double m = 0.5 * (a + b);
    const double tol1 = tol;
    const double tol2 = 2.0 * tol1;
    if (std::abs(x - m) <= tol2 - 0.5 * (b - a)) {
      converged = true;
      break;
    }
    if (evals >= eval_budget) break;

    bool use_golden = true;
    if (std::abs(e) > tol1) {
      // parabola through (x, fx), (w, fw), (v, fv)
      const double r = (x - w) * (fx - fv);
      double q = (x - v) * (fx - fw);
      double p = (x - v) * q - (x - w) * r;
      q = 2.0 * (q - r);
      if (q > 0.0) p = -p;
      q = std::abs(q);
      const double e_prev = e;
      e = d;
      if (std::abs(p) < std::abs(0.5 * q * e_prev) && p > q * (a - x) && p < q * (b - x)) {
        d = p / q;
        const double u = x + d;
        if (u - a < tol2 || b - u < tol2) d = (m > x) ? tol1 : -tol1;
        use_golden = false;
      }
    }
    if (use_golden) {
      e = (x >= m) ? a - x : b - x;
      d = kGolden * e;
    }
    const double u = (std::abs(d) >= tol1) ? x + d : x + ((d > 0.0) ? tol1 : -tol1);
    const double fu = fn(u);
    ++evals;
    if (fu <= fx) {
      if (u >= x) a = x; else b = x;
      v = w; fv = fw;
      w = x; fw = fx;
      x = u; fx = fu;
    } else {
      if (u < x) a = u; else b = u;
      if (fu <= fw || w == x) {
        v = w; fv = fw;
        w = u; fw = fu;
      } else if (fu <= fv || v == x || v == w) {
        v = u; fv = fu;
      }
    }
  }
  return {x, fx, evals, converged};
}

}  // namespace

ScalarMinimum minimize_scalar(const std::function<double(double)>& fn, double lo, double hi,
                              double tol, int max_evals) {
  if (!(hi > lo)) throw std::invalid_argument("minimize_scalar: empty interval");
  constexpr int kGridPoints = 51;
  const int grid_n = std::min(kGridPoints, std::max(3, max_evals / 2));
  const double step = (hi - lo) / (grid_n - 1);

  int best = 0;
  double best_f = 0.0;
  double fmin = 0.0, fmax = 0.0;
  for (int i = 0; i < grid_n; ++i) {
    const double f = fn(lo + i * step);
    if (i == 0 || f < best_f) {
      best = i;
      best_f = f;
    }
    fmin = (i == 0) ? f : std::min(fmin, f);
    fmax = (i == 0) ? f : std::max(fmax, f);
  }
  // flat objective: nothing to minimize
  if (!(fmax - fmin > 1e-14 * (1.0 + std::abs(fmax)))) {
    return {lo + best * step, best_f, grid_n, false};
  }
  const double a = lo + std::max(0, best - 1) * step;
  const double b = lo + std::min(grid_n - 1, best + 1) * step;
  ScalarMinimum r = brent(fn, a, b, lo + best * step, best_f, tol, max_evals - grid_n);
  r.evaluations += grid_n;
  return r;
}

std::vector<std::pair<std::uint32_t, int>> state_counts(const SampleSet& set) {
  const int n = set.spin_count();
  check_enumerable(n);
  std::vector<std::uint32_t> idx(set.chain_count());
  for (int l = 0; l < set.chain_count(); ++l) {
    std::uint32_t v = 0;
    for (int i = 0; i < n; ++i)
      if (set.samples(i, l) > 0) v |= (1u << i);
    idx[l] = v;
  }
  std::sort(idx.begin(), idx.end());
  std::vector<std::pair<std::uint32_t, int>> counts;
  for (std::size_t k = 0; k < idx.size();) {
    std::size_t j = k;
    while (j < idx.size() && idx[j] == idx[k]) ++j;
    counts.emplace_back(idx[k], static_cast<int>(j - k));
    k = j;
  }
  return counts;
}

BetaEstimate estimate_beta_kl(const SampleSet& samples, const ModelParams& u, double beta_max) {
  return estimate_beta_kl(samples, enumerate_energies(u), beta_max);
}

BetaEstimate estimate_beta_kl(const SampleSet& samples, const Eigen::VectorXd& energies,
                              double beta_max) {
  const auto counts = state_counts(samples);
  const double total = samples.chain_count();

  // KL(P_S||B_beta) = -H(P_S) + beta*<E>_{P_S} + log Z(beta); only the last
  // term depends on beta, through the full energy table.
  double entropy = 0.0, mean_energy = 0.0;
  for (const auto& [idx, cnt] : counts) {
    const double p = cnt / total;
    entropy -= p * std::log(p);
    mean_energy += p * energies[static_cast<Eigen::Index>(idx)];
  }
  const Eigen::ArrayXd neg_e = -energies.array();
  const auto objective = [&](double beta) {
    const Eigen::ArrayXd logw = beta * neg_e;
    const double m = logw.maxCoeff();
    const double log_z = m + std::log((logw - m).exp().sum());
    return -entropy + beta * mean_energy + log_z;
  };
  const ScalarMinimum r = minimize_scalar(objective, 0.0, beta_max);
  return {r.x, BetaMethod::KL, r.value, r.converged};
}

BetaEstimate cem_estimate(const Eigen::VectorXd& cond_means, const SpinVector& r,
                          const Eigen::MatrixXd& W, const Eigen::VectorXd& c, double beta_max) {
  return cem_n_estimate({{cond_means, r}}, W, c, beta_max);
}

BetaEstimate cem_n_estimate(const std::vector<std::pair<Eigen::VectorXd, SpinVector>>& conditions,
                            const Eigen::MatrixXd& W, const Eigen::VectorXd& c, double beta_max) {
  if (conditions.empty()) throw std::invalid_argument("cem: need at least one condition");
  const Eigen::Index n_h = c.size();
  std::vector<Eigen::ArrayXd> fields;
  std::vector<Eigen::ArrayXd> means;
  for (const auto& [m, r] : conditions) {
    if (m.size() != n_h) throw std::invalid_argument("cem: conditional means have wrong length");
    if ((m.array().abs() > 1.0).any())
      throw std::invalid_argument("cem: conditional means must lie in [-1, 1]");
    if (r.size() != W.rows() || !is_spin_vector(r))
      throw std::invalid_argument("cem: bad condition vector");
    fields.push_back((c + W.transpose() * r.cast<double>()).array());
    means.push_back(m.array());
  }
  double field_scale = 0.0;
  for (const auto& e : fields) field_scale = std::max(field_scale, e.abs().maxCoeff());
  const auto objective = [&](double beta) {
    double total = 0.0;
    for (std::size_t k = 0; k < fields.size(); ++k)
      total += (means[k] - (beta * fields[k]).tanh()).square().sum();
    return total;
  };
  if (field_scale == 0.0) {
    // every effective field vanishes: objective constant in beta
    return {1.0, conditions.size() > 1 ? BetaMethod::CEMn : BetaMethod::CEM, objective(1.0), false};
  }
  const ScalarMinimum r = minimize_scalar(objective, 0.0, beta_max);
  return {r.x, conditions.size() > 1 ? BetaMethod::CEMn : BetaMethod::CEM, r.value, r.converged};
}

BetaEstimate mlpl_estimate(const SampleSet& samples, const ModelParams& u, double beta_max) {
  u.validate();
  if (samples.chain_count() < 1) throw std::invalid_argument("mlpl: need at least one sample");
  if (samples.spin_count() != u.size()) throw std::invalid_argument("mlpl: sample size mismatch");
  const Eigen::MatrixXd s = samples.samples.cast<double>();
  const Eigen::MatrixXd J = u.coupling_matrix();
  const Eigen::VectorXd f = u.bias_vector();
  // a(i,l) = s_i * (local field at i); pseudo-likelihood depends on beta only
  // through logistic(2*beta*a)
  Eigen::MatrixXd fields = J * s;
  fields.colwise() += f;
  const Eigen::ArrayXXd a = s.array() * fields.array();
  const double scale = 1.0 / samples.chain_count();

  const auto objective = [&](double beta) {
    // -(1/L) sum log logistic(2*beta*a), stable for large |beta*a|; log1p
    // keeps the tail strictly monotone so saturation stays detectable
    const Eigen::ArrayXXd z = -2.0 * beta * a;
    const double total = (z.cwiseMax(0.0) + (-z.abs()).exp().log1p()).sum();
    return scale * total;
  };
  if (a.abs().maxCoeff() == 0.0) {
    return {1.0, BetaMethod::MLPL, objective(1.0), false};
  }
  ScalarMinimum r = minimize_scalar(objective, 0.0, beta_max);
  const bool saturated = r.x > beta_max - 1e-3;
  return {r.x, BetaMethod::MLPL, r.value, r.converged && !saturated};
}

Eigen::VectorXd conditional_hidden_mean_analytic(const SpinVector& r, const Eigen::MatrixXd& W,
                                                 const Eigen::VectorXd& c, double beta) {
  if (r.size() != W.rows() || c.size() != W.cols())
    throw std::invalid_argument("conditional mean: dimension mismatch");
  return (beta * (c + W.transpose() * r.cast<double>()).array()).tanh().matrix();
}

Eigen::VectorXd cem_conditional_means(const ModelParams& u, const SpinVector& r,
                                      const LsbConfig& cfg) {
  u.validate();
  if (u.structure == Structure::FBM) throw std::invalid_argument("cem: model has no hidden units");
  if (r.size() != u.n_v || !is_spin_vector(r)) throw std::invalid_argument("cem: bad condition vector");

  std::vector<std::pair<int, int>> fixed;
  fixed.reserve(u.n_v);
  for (int i = 0; i < u.n_v; ++i) fixed.emplace_back(i, r[i]);
  const ConditionedModel cond = condition(u, fixed);  // hidden-only: J' = 0
  const SampleSet set = lsb_sample(cond.model, cfg);
  return set.samples.cast<double>().rowwise().mean();
}

}  // namespace salbm
