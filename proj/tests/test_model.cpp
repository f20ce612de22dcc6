#include "salbm/model.hpp"

#include <doctest.h>

#include "salbm/rng.hpp"

#include <cmath>

using namespace salbm;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

ModelParams random_srbm(int n_v, int n_h, std::uint64_t seed, double scale = 0.7) {
  RngStream st(seed, 0);
  ModelParams u = ModelParams::zeros(n_v, n_h, Structure::SRBM);
  for (int i = 0; i < n_v; ++i)
    for (int j = i + 1; j < n_v; ++j) u.V(i, j) = u.V(j, i) = scale * st.normal();
  for (int i = 0; i < n_v; ++i)
    for (int j = 0; j < n_h; ++j) u.W(i, j) = scale * st.normal();
  for (int i = 0; i < n_v; ++i) u.b[i] = 0.3 * st.normal();
  for (int j = 0; j < n_h; ++j) u.c[j] = 0.3 * st.normal();
  return u;
}

}  // namespace

TEST_CASE("state indexing round-trips") {
  for (std::uint32_t idx = 0; idx < 64; ++idx) {
    const SpinVector s = spin_state(idx, 6);
    CHECK(is_spin_vector(s));
    CHECK(state_index(s) == idx);
  }
  CHECK(spin_state(0, 3) == SpinVector::Constant(3, -1));
  CHECK(spin_state(7, 3) == SpinVector::Constant(3, 1));
}

TEST_CASE("energy basics") {
  ModelParams zero = ModelParams::zeros(2, 0, Structure::FBM);
  CHECK(energy(spin_state(0, 2), zero) == 0.0);
  CHECK(energy(spin_state(3, 2), zero) == 0.0);

  ModelParams u = ModelParams::zeros(2, 0, Structure::FBM);
  u.V(0, 1) = u.V(1, 0) = 1.0;
  SpinVector s(2);
  s << 1, 1;
  CHECK(energy(s, u) == doctest::Approx(-1.0));

  SpinVector bad(3);
  bad << 1, 1, 1;
  CHECK_THROWS_AS(energy(bad, u), std::invalid_argument);
}

TEST_CASE("blockwise energy matches the flat quadratic form on all states") {
  const ModelParams u = random_srbm(3, 3, 17);
  for (std::uint32_t idx = 0; idx < 64; ++idx) {
    const SpinVector s = spin_state(idx, 6);
    const VectorXd v = s.head(3).cast<double>();
    const VectorXd h = s.tail(3).cast<double>();
    const double blockwise =
        -0.5 * v.dot(u.V * v) - v.dot(u.W * h) - u.b.dot(v) - u.c.dot(h);
    CHECK(energy(s, u) == doctest::Approx(blockwise).epsilon(1e-12));
  }
}

TEST_CASE("gray-code enumeration agrees with direct evaluation") {
  const ModelParams u = random_srbm(6, 4, 3);
  const VectorXd energies = enumerate_energies(u);
  RngStream st(5, 0);
  for (int t = 0; t < 200; ++t) {
    const auto idx = static_cast<std::uint32_t>(st.next_u32() % 1024);
    CHECK(energies[idx] == doctest::Approx(energy(spin_state(idx, 10), u)).epsilon(1e-10));
  }
}

TEST_CASE("exact_boltzmann closed forms") {
  ModelParams sym = ModelParams::zeros(1, 0, Structure::FBM);
  const VectorXd p0 = exact_boltzmann(sym, 1.0);
  CHECK(p0[0] == doctest::Approx(0.5));
  CHECK(p0[1] == doctest::Approx(0.5));

  ModelParams biased = ModelParams::zeros(1, 0, Structure::FBM);
  biased.b[0] = 1.0;
  const VectorXd p1 = exact_boltzmann(biased, 1.0);
  // two-state ratio: p(+1) = e / (e + 1/e)
  CHECK(p1[1] == doctest::Approx(0.8807970779778823).epsilon(1e-10));

  const ModelParams u = random_srbm(4, 2, 23);
  const VectorXd flat = exact_boltzmann(u, 0.0);
  for (int i = 0; i < flat.size(); ++i) CHECK(flat[i] == doctest::Approx(1.0 / 64).epsilon(1e-12));
}

TEST_CASE("exact_boltzmann survives large beta via log-sum-exp") {
  ModelParams u = random_srbm(5, 3, 7, 1.5);
  const VectorXd p = exact_boltzmann(u, 50.0);
  CHECK(p.allFinite());
  CHECK(p.sum() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("scale invariance: (kappa*u, beta/kappa) leaves the distribution unchanged") {
  const ModelParams u = random_srbm(4, 3, 11);
  const double kappa = 3.7;
  ModelParams scaled = u;
  scaled.V *= kappa;
  scaled.W *= kappa;
  scaled.b *= kappa;
  scaled.c *= kappa;
  const VectorXd p = exact_boltzmann(u, 1.3);
  const VectorXd q = exact_boltzmann(scaled, 1.3 / kappa);
  CHECK((p - q).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("global flip symmetry at zero bias") {
  ModelParams u = random_srbm(4, 2, 31);
  u.b.setZero();
  u.c.setZero();
  const int n = u.size();
  for (std::uint32_t idx = 0; idx < 16; ++idx) {
    const SpinVector s = spin_state(idx, n);
    const SpinVector neg = -s;
    CHECK(energy(s, u) == doctest::Approx(energy(neg, u)).epsilon(1e-12));
  }
}

TEST_CASE("marginal_visible") {
  SUBCASE("no hidden units: identical to the joint distribution") {
    const ModelParams u = random_srbm(5, 0, 2);
    CHECK((marginal_visible(u, 1.1) - exact_boltzmann(u, 1.1)).cwiseAbs().maxCoeff() < 1e-14);
  }
  SUBCASE("RBM with zero W factorizes away the hidden sum") {
    ModelParams u = ModelParams::zeros(4, 3, Structure::RBM);
    RngStream st(4, 0);
    for (int i = 0; i < 4; ++i) u.b[i] = st.normal();
    for (int j = 0; j < 3; ++j) u.c[j] = st.normal();
    ModelParams vis = ModelParams::zeros(4, 0, Structure::FBM);
    vis.b = u.b;
    CHECK((marginal_visible(u, 1.0) - exact_boltzmann(vis, 1.0)).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("random SRBM against brute-force joint summation") {
    const ModelParams u = random_srbm(4, 3, 41);
    const double beta = 0.9;
    const VectorXd joint = exact_boltzmann(u, beta);
    VectorXd brute = VectorXd::Zero(16);
    for (std::uint32_t idx = 0; idx < 128; ++idx) brute[idx & 15u] += joint[idx];
    CHECK((marginal_visible(u, beta) - brute).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("marginal sums to one") {
    const ModelParams u = random_srbm(6, 4, 12);
    CHECK(marginal_visible(u, 2.0).sum() == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("kl_divergence") {
  VectorXd p(2), q(2);
  p << 0.3, 0.7;
  CHECK(kl_divergence(p, p) == doctest::Approx(0.0));
  p << 1.0, 0.0;
  q << 0.5, 0.5;
  CHECK(kl_divergence(p, q) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  p << 0.5, 0.5;
  q << 1.0, 0.0;
  CHECK(std::isinf(kl_divergence(p, q)));

  VectorXd r(3);
  r << 0.2, 0.3, 0.5;
  CHECK_THROWS_AS(kl_divergence(p, r), std::invalid_argument);
  q << -0.1, 1.1;
  CHECK_THROWS_AS(kl_divergence(p, q), std::invalid_argument);
}

TEST_CASE("enumeration guard") {
  CHECK_THROWS_AS(check_enumerable(26), std::invalid_argument);
  CHECK_NOTHROW(check_enumerable(25));
  CHECK_THROWS_AS(check_enumerable(0), std::invalid_argument);
}

TEST_CASE("model validation") {
  ModelParams u = ModelParams::zeros(3, 2, Structure::SRBM);
  u.V(0, 1) = 0.5;  // asymmetric on purpose
  CHECK_THROWS_AS(u.validate(), std::invalid_argument);
  u.V(1, 0) = 0.5;
  CHECK_NOTHROW(u.validate());
  u.V(2, 2) = 0.1;
  CHECK_THROWS_AS(u.validate(), std::invalid_argument);

  ModelParams rbm = ModelParams::zeros(3, 2, Structure::RBM);
  rbm.V(0, 1) = rbm.V(1, 0) = 0.2;
  CHECK_THROWS_AS(rbm.validate(), std::invalid_argument);

  ModelParams fbm = ModelParams::zeros(3, 0, Structure::FBM);
  CHECK_NOTHROW(fbm.validate());
}

TEST_CASE("from_coupling rejects hidden-hidden couplings") {
  MatrixXd j = MatrixXd::Zero(4, 4);
  j(2, 3) = j(3, 2) = 0.5;  // hidden block for n_v=2, n_h=2
  CHECK_THROWS_AS(ModelParams::from_coupling(j, VectorXd::Zero(4), 2, 2, Structure::SRBM),
                  std::invalid_argument);
}

TEST_CASE("coupling matrix round-trip") {
  const ModelParams u = random_srbm(4, 3, 8);
  const ModelParams back =
      ModelParams::from_coupling(u.coupling_matrix(), u.bias_vector(), u.n_v, u.n_h, u.structure);
  CHECK((back.V - u.V).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.W - u.W).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("condition: empty assignment is the identity") {
  const ModelParams u = random_srbm(4, 2, 9);
  const ConditionedModel cm = condition(u, {});
  CHECK(cm.model.n_v == 4);
  CHECK((cm.model.V - u.V).cwiseAbs().maxCoeff() == 0.0);
  CHECK((cm.model.W - u.W).cwiseAbs().maxCoeff() == 0.0);
  CHECK((cm.model.b - u.b).cwiseAbs().maxCoeff() == 0.0);
  CHECK((cm.model.c - u.c).cwiseAbs().maxCoeff() == 0.0);
  CHECK(cm.energy_offset == 0.0);
  SpinVector s = spin_state(37, 6);
  CHECK(cm.embed(s) == s);
}

TEST_CASE("condition: fixing every visible leaves a zero-coupling hidden model") {
  const ModelParams u = random_srbm(3, 2, 14);
  const SpinVector r = spin_state(5, 3);
  std::vector<std::pair<int, int>> fixed;
  for (int i = 0; i < 3; ++i) fixed.emplace_back(i, r[i]);
  const ConditionedModel cm = condition(u, fixed);
  CHECK(cm.model.n_v == 0);
  CHECK(cm.model.n_h == 2);
  CHECK(cm.model.coupling_matrix().cwiseAbs().maxCoeff() == 0.0);
  const VectorXd expected = u.c + u.W.transpose() * r.cast<double>();
  CHECK((cm.model.c - expected).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("condition: energies shift by a state-independent constant") {
  const ModelParams u = random_srbm(4, 2, 77);
  const std::vector<std::pair<int, int>> fixed = {{1, -1}, {3, 1}};
  const ConditionedModel cm = condition(u, fixed);
  for (std::uint32_t idx = 0; idx < 16; ++idx) {
    const SpinVector sp = spin_state(idx, 4);  // 2 free visibles + 2 hiddens
    const double full = energy(cm.embed(sp), u);
    const double reduced = energy(sp, cm.model);
    CHECK(full == doctest::Approx(reduced + cm.energy_offset).epsilon(1e-12));
  }
}

TEST_CASE("condition followed by exact_boltzmann matches the renormalized conditional") {
  const ModelParams u = random_srbm(4, 2, 99);
  const double beta = 1.4;
  const std::vector<std::pair<int, int>> fixed = {{0, 1}, {2, -1}};
  const ConditionedModel cm = condition(u, fixed);
  const VectorXd reduced = exact_boltzmann(cm.model, beta);

  const VectorXd joint = exact_boltzmann(u, beta);
  VectorXd renorm = VectorXd::Zero(reduced.size());
  for (std::uint32_t idx = 0; idx < (1u << cm.free_indices.size()); ++idx) {
    const SpinVector s = cm.embed(spin_state(idx, static_cast<int>(cm.free_indices.size())));
    renorm[idx] = joint[state_index(s)];
  }
  renorm /= renorm.sum();
  CHECK((reduced - renorm).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("condition rejects bad input") {
  const ModelParams u = random_srbm(3, 1, 1);
  CHECK_THROWS_AS(condition(u, {{5, 1}}), std::invalid_argument);
  CHECK_THROWS_AS(condition(u, {{0, 2}}), std::invalid_argument);
  CHECK_THROWS_AS(condition(u, {{0, 1}, {0, -1}}), std::invalid_argument);
}
