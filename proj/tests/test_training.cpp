#include "salbm/training.hpp"

#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

using namespace salbm;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

ModelParams random_srbm(int n_v, int n_h, std::uint64_t seed, double scale) {
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

MatrixXd random_batch(int n_v, int count, std::uint64_t seed) {
  MatrixXd batch(n_v, count);
  RngStream st(seed, 0);
  for (int d = 0; d < count; ++d)
    for (int i = 0; i < n_v; ++i) batch(i, d) = st.spin();
  return batch;
}

Dataset dataset_from(const MatrixXd& batch) {
  Dataset data;
  data.vectors = batch.cast<int>();
  return data;
}

double kl_cost(const ModelParams& u, const VectorXd& p_data, double beta) {
  return kl_divergence(p_data, marginal_visible(u, beta));
}

}  // namespace

TEST_CASE("sal_gradient equals -(1/beta) * finite-difference KL gradient (exact negative phase)") {
  const int n_v = 4, n_h = 2;
  const ModelParams u = random_srbm(n_v, n_h, 5, 0.5);
  const MatrixXd batch = random_batch(n_v, 30, 7);
  const VectorXd p_data = empirical_distribution(batch.cast<int>());
  const double beta = 0.8;
  const double eps = 1e-4;

  const GradientSet g = sal_gradient(batch, exact_moments(u, beta), beta, u);

  const auto check_entry = [&](double got, double fd) {
    const double expected = -fd / beta;
    CHECK(std::abs(got - expected) < 1e-3 * std::max(std::abs(expected), 1e-6));
  };

  // V: symmetric pairs perturbed together
  for (int i = 0; i < n_v; ++i)
    for (int j = i + 1; j < n_v; ++j) {
      ModelParams up = u, dn = u;
      up.V(i, j) += eps;
      up.V(j, i) += eps;
      dn.V(i, j) -= eps;
      dn.V(j, i) -= eps;
      const double fd = (kl_cost(up, p_data, beta) - kl_cost(dn, p_data, beta)) / (2 * eps);
      check_entry(g.dV(i, j), fd);
    }
  for (int i = 0; i < n_v; ++i)
    for (int j = 0; j < n_h; ++j) {
      ModelParams up = u, dn = u;
      up.W(i, j) += eps;
      dn.W(i, j) -= eps;
      const double fd = (kl_cost(up, p_data, beta) - kl_cost(dn, p_data, beta)) / (2 * eps);
      check_entry(g.dW(i, j), fd);
    }
  for (int i = 0; i < n_v; ++i) {
    ModelParams up = u, dn = u;
    up.b[i] += eps;
    dn.b[i] -= eps;
    const double fd = (kl_cost(up, p_data, beta) - kl_cost(dn, p_data, beta)) / (2 * eps);
    check_entry(g.db[i], fd);
  }
  for (int j = 0; j < n_h; ++j) {
    ModelParams up = u, dn = u;
    up.c[j] += eps;
    dn.c[j] -= eps;
    const double fd = (kl_cost(up, p_data, beta) - kl_cost(dn, p_data, beta)) / (2 * eps);
    check_entry(g.dc[j], fd);
  }
}

TEST_CASE("gradient vanishes when data moments equal model moments") {
  const ModelParams u = random_srbm(4, 2, 11, 0.4);
  const double beta = 1.0;
  const int count = 200000;
  RngStream rng(13, 0);
  const Eigen::MatrixXi draws = sample_exact(marginal_visible(u, beta), u.n_v, count, rng);
  const GradientSet g = sal_gradient(draws.cast<double>(), exact_moments(u, beta), beta, u);

  const double band = 3.0 / std::sqrt(static_cast<double>(count));
  CHECK(g.dV.cwiseAbs().maxCoeff() < band);
  CHECK(g.dW.cwiseAbs().maxCoeff() < band);
  CHECK(g.db.cwiseAbs().maxCoeff() < band);
  CHECK(g.dc.cwiseAbs().maxCoeff() < band);
}

TEST_CASE("fbm gradient is the plain moment mismatch") {
  ModelParams u = ModelParams::zeros(3, 0, Structure::FBM);
  const MatrixXd batch = random_batch(3, 50, 17);
  Moments neg;
  neg.second = MatrixXd::Identity(3, 3);
  neg.mean = VectorXd::Zero(3);
  neg.mean[0] = 0.25;
  const GradientSet g = sal_gradient(batch, neg, 1.0, u);
  CHECK(g.dW.size() == 0);
  CHECK(g.dc.size() == 0);
  MatrixXd expected = batch * batch.transpose() / 50.0;
  expected.diagonal().setZero();
  CHECK((g.dV - expected).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(std::abs(g.db[0] - (batch.row(0).mean() - 0.25)) < 1e-12);
}

TEST_CASE("full-batch gradient is independent of data ordering") {
  const ModelParams u = random_srbm(4, 2, 301, 0.4);
  const MatrixXd batch = random_batch(4, 64, 303);
  MatrixXd reversed(4, 64);
  for (int d = 0; d < 64; ++d) reversed.col(d) = batch.col(63 - d);
  const Moments neg = exact_moments(u, 1.0);
  const GradientSet a = sal_gradient(batch, neg, 1.0, u);
  const GradientSet b = sal_gradient(reversed, neg, 1.0, u);
  CHECK((a.dV - b.dV).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((a.dW - b.dW).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((a.db - b.db).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((a.dc - b.dc).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("sal_gradient validates inputs") {
  const ModelParams u = random_srbm(3, 2, 19, 0.4);
  const Moments neg = exact_moments(u, 1.0);
  CHECK_THROWS_AS(sal_gradient(MatrixXd(3, 0), neg, 1.0, u), std::invalid_argument);
  CHECK_THROWS_AS(sal_gradient(MatrixXd::Ones(4, 5), neg, 1.0, u), std::invalid_argument);
  CHECK_THROWS_AS(sal_gradient(MatrixXd::Ones(3, 5), neg, 0.0, u), std::invalid_argument);
}

TEST_CASE("update rule: l2 decays couplings only, biases untouched") {
  ModelParams u = random_srbm(4, 2, 23, 0.5);
  const ModelParams before = u;
  GradientSet velocity = GradientSet::zeros(u);
  const GradientSet zero = GradientSet::zeros(u);
  const double eta = 0.1, lambda = 0.01;
  apply_update(u, velocity, zero, {eta, 0.0, lambda});
  CHECK((u.V - (1.0 - eta * lambda) * before.V).cwiseAbs().maxCoeff() < 1e-15);
  CHECK((u.W - (1.0 - eta * lambda) * before.W).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(u.b == before.b);
  CHECK(u.c == before.c);
}

TEST_CASE("structure is preserved through training updates") {
  Dataset data = dataset_from(random_batch(5, 60, 29));
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.eta = 0.05;
  cfg.lsb.chains = 200;
  cfg.lsb.iterations = 20;
  cfg.seed = 31;

  SUBCASE("srbm") {
    const TrainResult r = sal_train(init_model(5, 2, Structure::SRBM, 1), data, cfg);
    CHECK_NOTHROW(r.model.validate());
    CHECK((r.model.V - r.model.V.transpose()).cwiseAbs().maxCoeff() == 0.0);
    CHECK(r.model.V.diagonal().cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("rbm keeps V pinned at zero") {
    const TrainResult r = sal_train(init_model(5, 2, Structure::RBM, 2), data, cfg);
    CHECK(r.model.V.cwiseAbs().maxCoeff() == 0.0);
    const TrainResult c = cd_train_rbm(init_model(5, 2, Structure::RBM, 3), data, 5, cfg);
    CHECK(c.model.V.cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("fbm") {
    cfg.estimator = BetaMethod::None;
    const TrainResult r = sal_train(init_model(5, 0, Structure::FBM, 4), data, cfg);
    CHECK_NOTHROW(r.model.validate());
    CHECK(r.model.n_h == 0);
  }
}

TEST_CASE("training is bit-reproducible") {
  Dataset data = dataset_from(random_batch(4, 40, 37));
  TrainConfig cfg;
  cfg.epochs = 4;
  cfg.lsb.chains = 150;
  cfg.lsb.iterations = 15;
  cfg.seed = 41;
  const ModelParams u0 = init_model(4, 2, Structure::SRBM, 5);
  const TrainResult a = sal_train(u0, data, cfg);
  const TrainResult b = sal_train(u0, data, cfg);
  CHECK(a.model.V == b.model.V);
  CHECK(a.model.W == b.model.W);
  CHECK(a.model.b == b.model.b);
  CHECK(a.model.c == b.model.c);
  REQUIRE(a.history.size() == b.history.size());
  for (std::size_t e = 0; e < a.history.size(); ++e) {
    CHECK(a.history[e].beta_eff == doctest::Approx(b.history[e].beta_eff));
    CHECK(a.history[e].grad_norm == b.history[e].grad_norm);
  }
}

TEST_CASE("resume from checkpoint continues the uninterrupted trajectory exactly") {
  const std::string dir = (std::filesystem::temp_directory_path() / "salbm_ck_test").string();
  std::filesystem::create_directories(dir);
  Dataset data = dataset_from(random_batch(4, 40, 43));
  const ModelParams u0 = init_model(4, 2, Structure::SRBM, 6);

  TrainConfig cfg;
  cfg.epochs = 8;
  cfg.lsb.chains = 150;
  cfg.lsb.iterations = 15;
  cfg.seed = 47;
  const TrainResult full = sal_train(u0, data, cfg);

  TrainConfig half = cfg;
  half.epochs = 4;
  half.checkpoint_every = 4;
  half.checkpoint_dir = dir;
  sal_train(u0, data, half);
  const Checkpoint ck = read_checkpoint(dir + "/checkpoint_000004.json");
  CHECK(ck.next_epoch == 4);
  const TrainResult resumed = sal_train(ck, data, cfg);

  CHECK(full.model.V == resumed.model.V);
  CHECK(full.model.W == resumed.model.W);
  CHECK(full.model.b == resumed.model.b);
  CHECK(full.model.c == resumed.model.c);
  std::filesystem::remove_all(dir);
}

TEST_CASE("cd first step from zero parameters: couplings barely move, bias tracks the data mean") {
  ModelParams u = ModelParams::zeros(4, 2, Structure::RBM);
  const int count = 2000;
  MatrixXd batch = random_batch(4, count, 53);
  // bias the data so the target mean is visibly nonzero
  batch.row(0).setOnes();

  const auto [vs, hs] = blocked_gibbs_chains(u, 1.0, 1, batch, 59);
  const GradientSet g = sal_gradient(batch, moments_from_pairs(vs, hs), 1.0, u);

  const double band = 3.0 / std::sqrt(static_cast<double>(count));
  // positive phase of dW is exactly tanh(0) = 0; what remains is chain noise
  CHECK(g.dW.cwiseAbs().maxCoeff() < band);
  CHECK(g.dc.cwiseAbs().maxCoeff() < band);
  const VectorXd data_mean = batch.rowwise().mean();
  CHECK((g.db - data_mean).cwiseAbs().maxCoeff() < band);
}

TEST_CASE("cd requires rbm, dmfi-cd requires srbm") {
  Dataset data = dataset_from(random_batch(3, 20, 61));
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.lsb.chains = 50;
  cfg.lsb.iterations = 10;
  CHECK_THROWS_AS(cd_train_rbm(init_model(3, 2, Structure::SRBM, 7), data, 1, cfg),
                  std::invalid_argument);
  CHECK_THROWS_AS(dmfi_cd_train_srbm(init_model(3, 2, Structure::RBM, 8), data, 1, 5, 0.5, cfg),
                  std::invalid_argument);
}

TEST_CASE("one undamped mean-field step is the conditional mean of the gibbs visible draw") {
  ModelParams u = ModelParams::zeros(3, 2, Structure::SRBM);
  RngStream st(71, 0);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 2; ++j) u.W(i, j) = 0.6 * st.normal();
  for (int i = 0; i < 3; ++i) u.b[i] = 0.2 * st.normal();

  const SpinVector h = spin_state(1, 2);
  const VectorXd mf = dmfi_visible(u, h, VectorXd::Zero(3), 1, 1.0);
  const VectorXd expected = (u.W * h.cast<double>() + u.b).array().tanh();
  CHECK((mf - expected).cwiseAbs().maxCoeff() < 1e-14);

  const int count = 20000;
  VectorXd mean_sampled = VectorXd::Zero(3);
  for (int t = 0; t < count; ++t) {
    RngStream chain(73, t);
    for (int i = 0; i < 3; ++i) {
      const double field = u.b[i] + u.W.row(i).dot(h.cast<double>());
      mean_sampled[i] += chain.uniform() < logistic(2.0 * field) ? 1.0 : -1.0;
    }
  }
  mean_sampled /= count;
  CHECK((mean_sampled - expected).cwiseAbs().maxCoeff() < 3.0 / std::sqrt(count));
}

TEST_CASE("training reduces the exact cost on a structured target") {
  const auto [inst, data] = gen_3spin(6, 2.0, 3000, 79);
  (void)inst;
  TrainConfig cfg;
  cfg.epochs = 40;
  cfg.eta = 0.05;
  cfg.momentum = 0.5;
  cfg.l2 = 1e-5;
  cfg.lsb.chains = 1500;
  cfg.lsb.iterations = 60;
  cfg.lsb.sigma = 1.0;
  cfg.seed = 83;
  cfg.eval_every = 39;
  const TrainResult r = sal_train(init_model(6, 3, Structure::SRBM, 9), data, cfg);

  double first = std::numeric_limits<double>::quiet_NaN();
  double last = std::numeric_limits<double>::quiet_NaN();
  for (const auto& rec : r.history) {
    if (!std::isnan(rec.kl_exact)) {
      if (std::isnan(first)) first = rec.kl_exact;
      last = rec.kl_exact;
    }
  }
  REQUIRE_FALSE(std::isnan(first));
  REQUIRE_FALSE(std::isnan(last));
  CHECK(last < first);
  CHECK(last < 0.5 * first);
}

TEST_CASE("batch partitions") {
  SUBCASE("full batch is a single identity chunk") {
    Dataset data = dataset_from(random_batch(3, 17, 89));
    const auto batches = make_batches(data, 0, 1);
    REQUIRE(batches.size() == 1);
    CHECK(batches[0].size() == 17);
  }
  SUBCASE("mini-batches cover every index exactly once") {
    Dataset data = dataset_from(random_batch(3, 103, 97));
    const auto batches = make_batches(data, 25, 2);
    CHECK(batches.size() == 4);
    std::vector<int> seen(103, 0);
    for (const auto& b : batches)
      for (int idx : b) seen[idx] += 1;
    for (int s : seen) CHECK(s == 1);
  }
  SUBCASE("labeled data deals classes evenly") {
    Dataset data = dataset_from(random_batch(3, 100, 101));
    data.labels.resize(100);
    for (int d = 0; d < 100; ++d) data.labels[d] = d % 4;
    const auto batches = make_batches(data, 25, 3);
    REQUIRE(batches.size() == 4);
    for (const auto& b : batches) {
      std::array<int, 4> per_class{};
      for (int idx : b) per_class[data.labels[idx]] += 1;
      for (int c = 0; c < 4; ++c) CHECK(per_class[c] >= 5);
    }
  }
}

TEST_CASE("init_model respects structure and uses small couplings") {
  const ModelParams rbm = init_model(6, 3, Structure::RBM, 11);
  CHECK(rbm.V.cwiseAbs().maxCoeff() == 0.0);
  CHECK(rbm.W.cwiseAbs().maxCoeff() > 0.0);
  CHECK(rbm.W.cwiseAbs().maxCoeff() < 1e-3);
  CHECK(rbm.b.cwiseAbs().maxCoeff() == 0.0);

  const ModelParams again = init_model(6, 3, Structure::RBM, 11);
  CHECK(again.W == rbm.W);

  const ModelParams srbm = init_model(6, 3, Structure::SRBM, 12);
  CHECK_NOTHROW(srbm.validate());
  CHECK(srbm.V.cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("history csv round trip") {
  std::vector<EpochRecord> history;
  EpochRecord r;
  r.epoch = 1;
  r.beta_eff = 1.25;
  r.estimator = "cem";
  r.kl_exact = 0.5;
  r.grad_norm = 0.125;
  r.seconds = 0.03125;
  history.push_back(r);
  r.epoch = 2;
  r.kl_exact = std::numeric_limits<double>::quiet_NaN();
  history.push_back(r);

  const std::string path =
      (std::filesystem::temp_directory_path() / "salbm_history_test.csv").string();
  write_history(path, history, "config=cafe");
  const auto back = read_history(path);
  REQUIRE(back.size() == 2);
  CHECK(back[0].epoch == 1);
  CHECK(back[0].beta_eff == 1.25);
  CHECK(back[0].estimator == "cem");
  CHECK(back[0].kl_exact == 0.5);
  CHECK(std::isnan(back[1].kl_exact));
  std::remove(path.c_str());
}
