#include "salbm/model.hpp"

#include <cctype>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace salbm {

bool is_spin_vector(const SpinVector& s) {
  return s.size() > 0 && ((s.array() == 1) || (s.array() == -1)).all();
}

const char* to_string(Structure s) {
  switch (s) {
    case Structure::FBM: return "FBM";
    case Structure::RBM: return "RBM";
    case Structure::SRBM: return "SRBM";
  }
  return "?";
}

Structure structure_from_string(const std::string& s) {
  std::string upper = s;
  for (char& c : upper) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  if (upper == "FBM") return Structure::FBM;
  if (upper == "RBM") return Structure::RBM;
  if (upper == "SRBM") return Structure::SRBM;
  throw std::invalid_argument("unknown structure tag: " + s);
}

Eigen::MatrixXd ModelParams::coupling_matrix() const {
  const int n = size();
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
  J.topLeftCorner(n_v, n_v) = V;
  if (n_h > 0) {
    J.topRightCorner(n_v, n_h) = W;
    J.bottomLeftCorner(n_h, n_v) = W.transpose();
  }
  return J;
}

Eigen::VectorXd ModelParams::bias_vector() const {
  Eigen::VectorXd f(size());
  f.head(n_v) = b;
  f.tail(n_h) = c;
  return f;
}

void ModelParams::validate() const {
  if (n_v < 0 || n_h < 0 || size() == 0)
    throw std::invalid_argument("model must have at least one unit");
  if (V.rows() != n_v || V.cols() != n_v)
    throw std::invalid_argument("V must be n_v x n_v");
  if (W.rows() != n_v || W.cols() != n_h)
    throw std::invalid_argument("W must be n_v x n_h");
  if (b.size() != n_v || c.size() != n_h)
    throw std::invalid_argument("bias lengths must match unit counts");
  if (!V.allFinite() || !W.allFinite() || !b.allFinite() || !c.allFinite())
    throw std::invalid_argument("model parameters must be finite");
  if (n_v > 0) {
    if (V.diagonal().cwiseAbs().maxCoeff() != 0.0)
      throw std::invalid_argument("V must have zero diagonal");
    if ((V - V.transpose()).cwiseAbs().maxCoeff() != 0.0)
      throw std::invalid_argument("V must be symmetric");
  }
  if (structure == Structure::FBM && n_h != 0)
    throw std::invalid_argument("FBM structure forbids hidden units");
  if (structure == Structure::RBM && n_v > 0 && V.cwiseAbs().maxCoeff() != 0.0)
    throw std::invalid_argument("RBM structure forbids visible-visible couplings");
}

ModelParams ModelParams::zeros(int n_v, int n_h, Structure structure) {
  ModelParams u;
  u.n_v = n_v;
  u.n_h = n_h;
  u.structure = structure;
  u.V = Eigen::MatrixXd::Zero(n_v, n_v);
  u.W = Eigen::MatrixXd::Zero(n_v, n_h);
  u.b = Eigen::VectorXd::Zero(n_v);
  u.c = Eigen::VectorXd::Zero(n_h);
  u.validate();
  return u;
}

ModelParams ModelParams::from_coupling(const Eigen::MatrixXd& J, const Eigen::VectorXd& f,
                                       int n_v, int n_h, Structure structure) {
  const int n = n_v + n_h;
  if (J.rows() != n || J.cols() != n || f.size() != n)
    throw std::invalid_argument("coupling/bias dimensions do not match n_v + n_h");
  if (n_h > 0 && J.bottomRightCorner(n_h, n_h).cwiseAbs().maxCoeff() != 0.0)
    throw std::invalid_argument("hidden-hidden couplings are not representable");
  if ((J.topRightCorner(n_v, n_h) - J.bottomLeftCorner(n_h, n_v).transpose()).cwiseAbs().maxCoeff() != 0.0)
    throw std::invalid_argument("J must be symmetric");
  ModelParams u;
  u.n_v = n_v;
  u.n_h = n_h;
  u.structure = structure;
  u.V = J.topLeftCorner(n_v, n_v);
  u.W = J.topRightCorner(n_v, n_h);
  u.b = f.head(n_v);
  u.c = f.tail(n_h);
  u.validate();
  return u;
}

SpinVector spin_state(std::uint32_t index, int n) {
  SpinVector s(n);
  for (int i = 0; i < n; ++i) s[i] = (index >> i) & 1u ? 1 : -1;
  return s;
}

std::uint32_t state_index(const SpinVector& s) {
  std::uint32_t idx = 0;
  for (int i = 0; i < s.size(); ++i)
    if (s[i] > 0) idx |= (1u << i);
  return idx;
}

void check_enumerable(int n) {
  if (n < 1) throw std::invalid_argument("enumeration needs at least one spin");
  if (n > kMaxEnumerationSpins)
    throw std::invalid_argument("state space too large to enumerate (N > 25)");
}

double energy(const SpinVector& s, const Eigen::MatrixXd& J, const Eigen::VectorXd& f) {
  if (s.size() != J.rows() || J.rows() != J.cols() || f.size() != s.size())
    throw std::invalid_argument("energy: dimension mismatch");
  const Eigen::VectorXd sd = s.cast<double>();
  return -0.5 * sd.dot(J * sd) - f.dot(sd);
}

double energy(const SpinVector& s, const ModelParams& u) {
  return energy(s, u.coupling_matrix(), u.bias_vector());
}

Eigen::VectorXd enumerate_energies(const Eigen::MatrixXd& J, const Eigen::VectorXd& f) {
  const int n = static_cast<int>(J.rows());
  check_enumerable(n);
  const std::size_t count = std::size_t{1} << n;
  Eigen::VectorXd energies(static_cast<Eigen::Index>(count));

  // Gray-code walk: consecutive visited states differ in one spin, so each
  // step costs O(N). energies[] is still filled under the bit convention.
  Eigen::VectorXd s = -Eigen::VectorXd::Ones(n);  // state of index 0
  double e = -0.5 * s.dot(J * s) - f.dot(s);
  energies[0] = e;
  std::uint32_t gray = 0;
  for (std::size_t i = 1; i < count; ++i) {
    const int k = __builtin_ctzll(i);   // spin flipped between gray(i-1) and gray(i)
    e += 2.0 * s[k] * (J.row(k).dot(s) + f[k]);
    s[k] = -s[k];
    gray ^= (1u << k);
    energies[gray] = e;
  }
  return energies;
}

Eigen::VectorXd enumerate_energies(const ModelParams& u) {
  return enumerate_energies(u.coupling_matrix(), u.bias_vector());
}

double log_sum_exp(const Eigen::VectorXd& v) {
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((v.array() - m).exp().sum());
}

Eigen::VectorXd boltzmann_distribution(const Eigen::VectorXd& energies, double beta) {
  if (!energies.allFinite()) throw std::invalid_argument("non-finite energies");
  if (!(beta >= 0.0) || !std::isfinite(beta)) throw std::invalid_argument("beta must be finite and >= 0");
  const Eigen::ArrayXd logw = -beta * energies.array();
  const double m = logw.maxCoeff();
  Eigen::VectorXd p = (logw - m).exp().matrix();
  p /= p.sum();
  return p;
}

Eigen::VectorXd exact_boltzmann(const ModelParams& u, double beta) {
  u.validate();
  return boltzmann_distribution(enumerate_energies(u), beta);
}

Eigen::VectorXd marginal_visible(const ModelParams& u, double beta) {
  u.validate();
  check_enumerable(u.size());
  const Eigen::VectorXd energies = enumerate_energies(u);
  const std::size_t nv_states = std::size_t{1} << u.n_v;
  const std::size_t nh_states = std::size_t{1} << u.n_h;

  Eigen::VectorXd log_weight(static_cast<Eigen::Index>(nv_states));
  Eigen::VectorXd scratch(static_cast<Eigen::Index>(nh_states));
  for (std::size_t v = 0; v < nv_states; ++v) {
    for (std::size_t h = 0; h < nh_states; ++h)
      scratch[static_cast<Eigen::Index>(h)] = -beta * energies[static_cast<Eigen::Index>(v | (h << u.n_v))];
    log_weight[static_cast<Eigen::Index>(v)] = log_sum_exp(scratch);
  }
  const double log_z = log_sum_exp(log_weight);
  return (log_weight.array() - log_z).exp().matrix();
}

double kl_divergence(const Eigen::VectorXd& p, const Eigen::VectorXd& q) {
  if (p.size() != q.size()) throw std::invalid_argument("kl_divergence: size mismatch");
  if ((p.array() < 0).any() || (q.array() < 0).any())
    throw std::invalid_argument("kl_divergence: negative entries");
  double kl = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (p[i] == 0.0) continue;
    if (q[i] == 0.0) return std::numeric_limits<double>::infinity();
    kl += p[i] * std::log(p[i] / q[i]);
  }
  return kl;
}

SpinVector ConditionedModel::embed(const SpinVector& reduced) const {
  if (reduced.size() != static_cast<Eigen::Index>(free_indices.size()))
    throw std::invalid_argument("embed: reduced vector has wrong length");
  const int n = static_cast<int>(free_indices.size() + fixed_indices.size());
  SpinVector s(n);
  for (std::size_t k = 0; k < fixed_indices.size(); ++k) s[fixed_indices[k]] = fixed_values[static_cast<Eigen::Index>(k)];
  for (std::size_t k = 0; k < free_indices.size(); ++k) s[free_indices[k]] = reduced[static_cast<Eigen::Index>(k)];
  return s;
}

ConditionedModel condition(const ModelParams& u, const std::vector<std::pair<int, int>>& fixed) {
  u.validate();
  std::vector<char> is_fixed(u.n_v, 0);
  for (const auto& [idx, val] : fixed) {
    if (idx < 0 || idx >= u.n_v) throw std::invalid_argument("condition: index outside visible range");
    if (val != 1 && val != -1) throw std::invalid_argument("condition: spin value must be +1 or -1");
    if (is_fixed[idx]) throw std::invalid_argument("condition: conflicting assignment for index " + std::to_string(idx));
    is_fixed[idx] = 1;
  }

  ConditionedModel out;
  out.fixed_values.resize(static_cast<Eigen::Index>(fixed.size()));
  for (std::size_t k = 0; k < fixed.size(); ++k) {
    out.fixed_indices.push_back(fixed[k].first);
    out.fixed_values[static_cast<Eigen::Index>(k)] = fixed[k].second;
  }
  std::vector<int> free_v;
  for (int i = 0; i < u.n_v; ++i)
    if (!is_fixed[i]) free_v.push_back(i);
  out.free_indices = free_v;
  for (int j = 0; j < u.n_h; ++j) out.free_indices.push_back(u.n_v + j);

  const int m = static_cast<int>(free_v.size());
  ModelParams r;
  r.n_v = m;
  r.n_h = u.n_h;
  r.structure = u.structure;
  r.V.resize(m, m);
  r.W.resize(m, u.n_h);
  r.b.resize(m);
  for (int a = 0; a < m; ++a) {
    for (int bb = 0; bb < m; ++bb) r.V(a, bb) = u.V(free_v[a], free_v[bb]);
    if (u.n_h > 0) r.W.row(a) = u.W.row(free_v[a]);
    double bias = u.b[free_v[a]];
    for (std::size_t k = 0; k < fixed.size(); ++k)
      bias += u.V(free_v[a], fixed[k].first) * fixed[k].second;
    r.b[a] = bias;
  }
  r.c = u.c;
  for (std::size_t k = 0; k < fixed.size(); ++k)
    r.c += u.W.row(fixed[k].first).transpose() * static_cast<double>(fixed[k].second);

  // constant term from the fixed block: -1/2 r^T V_ff r - b_f . r
  double offset = 0.0;
  for (std::size_t k = 0; k < fixed.size(); ++k) {
    offset -= u.b[fixed[k].first] * fixed[k].second;
    for (std::size_t l = 0; l < fixed.size(); ++l)
      offset -= 0.5 * u.V(fixed[k].first, fixed[l].first) * fixed[k].second * fixed[l].second;
  }
  out.energy_offset = offset;
  r.validate();
  out.model = std::move(r);
  return out;
}

}  // namespace salbm
