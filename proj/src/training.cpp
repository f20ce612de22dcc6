#include "salbm/training.hpp"

#include "salbm/model_io.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace salbm {

namespace {

// Seed-derivation contexts; every stochastic decision in a run is keyed by
// (master seed, epoch/batch, context), so resumption is exact.
constexpr std::uint64_t kCtxNegative = 1;
constexpr std::uint64_t kCtxCondChoice = 2;
constexpr std::uint64_t kCtxConditional = 3;
constexpr std::uint64_t kCtxEval = 4;
constexpr std::uint64_t kCtxShuffle = 5;
constexpr std::uint64_t kCtxChains = 6;

std::uint64_t batch_key(int epoch, std::size_t batch) {
  return (static_cast<std::uint64_t>(epoch) << 20) | static_cast<std::uint64_t>(batch);
}

Eigen::MatrixXd gather_columns(const Eigen::MatrixXd& all, const std::vector<int>& idx) {
  Eigen::MatrixXd out(all.rows(), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) out.col(static_cast<Eigen::Index>(k)) = all.col(idx[k]);
  return out;
}

void fisher_yates(std::vector<int>& v, RngStream& rng) {
  for (int i = static_cast<int>(v.size()) - 1; i > 0; --i) {
    const int j = static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(i + 1));
    std::swap(v[i], v[j]);
  }
}

struct EvalContext {
  Eigen::VectorXd data_marginal;  // empirical visible distribution
  bool available = false;
};

EvalContext make_eval_context(const Dataset& data, const ModelParams& u, const TrainConfig& cfg) {
  EvalContext ctx;
  if (cfg.eval_every > 0 && u.size() <= kMaxEnumerationSpins) {
    ctx.data_marginal = empirical_distribution(data.vectors);
    ctx.available = true;
  }
  return ctx;
}

bool eval_now(const TrainConfig& cfg, int epoch_1based) {
  if (cfg.eval_every <= 0) return false;
  return epoch_1based == 1 || epoch_1based % cfg.eval_every == 0 || epoch_1based == cfg.epochs;
}

// Cost of the model as actually sampled: a fresh LSB run fixes the effective
// inverse temperature by KL minimization, then the exact visible marginal at
// that temperature is compared against the data distribution.
double exact_cost_sampled(const ModelParams& u, const TrainConfig& cfg, int epoch,
                          const EvalContext& ctx) {
  LsbConfig ecfg = cfg.lsb;
  ecfg.seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(epoch), kCtxEval);
  ecfg.threads = cfg.threads;
  const SampleSet s = lsb_sample(u, ecfg);
  const double beta_hat = estimate_beta_kl(s, u).beta;
  return kl_divergence(ctx.data_marginal, marginal_visible(u, beta_hat));
}

double exact_cost_fixed_beta(const ModelParams& u, double beta, const EvalContext& ctx) {
  return kl_divergence(ctx.data_marginal, marginal_visible(u, beta));
}

void maybe_checkpoint(const TrainConfig& cfg, const ModelParams& u, const GradientSet& velocity,
                      int next_epoch, double beta_prev) {
  if (cfg.checkpoint_every <= 0 || cfg.checkpoint_dir.empty()) return;
  if (next_epoch % cfg.checkpoint_every != 0 && next_epoch != cfg.epochs) return;
  char name[64];
  std::snprintf(name, sizeof(name), "/checkpoint_%06d.json", next_epoch);
  write_checkpoint(cfg.checkpoint_dir + name, {u, velocity, next_epoch, beta_prev});
}

void check_train_inputs(const ModelParams& u, const Dataset& data, const TrainConfig& cfg) {
  u.validate();
  data.validate();
  if (data.dim() != u.n_v) throw std::invalid_argument("training data dimension != n_v");
  if (!(cfg.eta > 0.0)) throw std::invalid_argument("eta must be positive");
  if (cfg.momentum < 0.0 || cfg.momentum >= 1.0) throw std::invalid_argument("momentum must be in [0,1)");
  if (cfg.l2 < 0.0) throw std::invalid_argument("l2 must be >= 0");
  if (cfg.batch_size > data.count()) throw std::invalid_argument("batch size exceeds dataset size");
  if (cfg.epochs < 0) throw std::invalid_argument("epochs must be >= 0");
}

}  // namespace

GradientSet GradientSet::zeros(const ModelParams& u) {
  GradientSet g;
  g.dV = Eigen::MatrixXd::Zero(u.n_v, u.n_v);
  g.dW = Eigen::MatrixXd::Zero(u.n_v, u.n_h);
  g.db = Eigen::VectorXd::Zero(u.n_v);
  g.dc = Eigen::VectorXd::Zero(u.n_h);
  return g;
}

double GradientSet::norm() const {
  return std::sqrt(dV.squaredNorm() + dW.squaredNorm() + db.squaredNorm() + dc.squaredNorm());
}

Moments sample_moments(const SampleSet& set) {
  if (set.chain_count() < 1) throw std::invalid_argument("moments: empty sample set");
  const Eigen::MatrixXd s = set.samples.cast<double>();
  Moments m;
  m.second.noalias() = s * s.transpose();
  m.second /= static_cast<double>(s.cols());
  m.mean = s.rowwise().mean();
  return m;
}

Moments moments_from_pairs(const Eigen::MatrixXd& vs, const Eigen::MatrixXd& hs) {
  if (vs.cols() != hs.cols() || vs.cols() == 0) throw std::invalid_argument("moments: bad pair matrices");
  Eigen::MatrixXd s(vs.rows() + hs.rows(), vs.cols());
  s.topRows(vs.rows()) = vs;
  s.bottomRows(hs.rows()) = hs;
  Moments m;
  m.second.noalias() = s * s.transpose();
  m.second /= static_cast<double>(s.cols());
  m.mean = s.rowwise().mean();
  return m;
}

Moments exact_moments(const ModelParams& u, double beta) {
  const Eigen::VectorXd p = exact_boltzmann(u, beta);
  const int n = u.size();
  Moments m;
  m.second = Eigen::MatrixXd::Zero(n, n);
  m.mean = Eigen::VectorXd::Zero(n);
  for (Eigen::Index idx = 0; idx < p.size(); ++idx) {
    const Eigen::VectorXd s = spin_state(static_cast<std::uint32_t>(idx), n).cast<double>();
    m.second.noalias() += p[idx] * (s * s.transpose());
    m.mean.noalias() += p[idx] * s;
  }
  return m;
}

GradientSet sal_gradient(const Eigen::MatrixXd& batch, const Moments& negative, double beta_eff,
                         const ModelParams& u) {
  const Eigen::Index count = batch.cols();
  if (count == 0) throw std::invalid_argument("sal_gradient: empty batch");
  if (batch.rows() != u.n_v) throw std::invalid_argument("sal_gradient: batch dimension != n_v");
  if (negative.second.rows() != u.size() || negative.mean.size() != u.size())
    throw std::invalid_argument("sal_gradient: negative moments have wrong size");
  if (u.n_h > 0 && !(beta_eff > 0.0))
    throw std::invalid_argument("sal_gradient: beta_eff must be positive for models with hidden units");

  GradientSet g;
  const double scale = 1.0 / static_cast<double>(count);

  g.dV.noalias() = batch * batch.transpose() * scale;
  g.dV -= negative.second.topLeftCorner(u.n_v, u.n_v);
  g.dV = 0.5 * (g.dV + g.dV.transpose()).eval();
  g.dV.diagonal().setZero();

  g.db = batch.rowwise().mean() - negative.mean.head(u.n_v);

  if (u.n_h > 0) {
    Eigen::MatrixXd fields = u.W.transpose() * batch;
    fields.colwise() += u.c;
    const Eigen::MatrixXd t = (beta_eff * fields.array()).tanh().matrix();
    g.dW.noalias() = batch * t.transpose() * scale;
    g.dW -= negative.second.topRightCorner(u.n_v, u.n_h);
    g.dc = t.rowwise().mean() - negative.mean.tail(u.n_h);
  } else {
    g.dW.resize(u.n_v, 0);
    g.dc.resize(0);
  }
  return g;
}

GradientSet sal_gradient(const Eigen::MatrixXd& batch, const SampleSet& neg_samples,
                         double beta_eff, const ModelParams& u) {
  return sal_gradient(batch, sample_moments(neg_samples), beta_eff, u);
}

void apply_update(ModelParams& u, GradientSet& velocity, const GradientSet& gradient,
                  const UpdateRule& rule) {
  const bool update_v = u.structure != Structure::RBM && u.n_v > 0;
  if (update_v) {
    velocity.dV = rule.momentum * velocity.dV + rule.eta * (gradient.dV - rule.l2 * u.V);
    u.V += velocity.dV;
  }
  velocity.db = rule.momentum * velocity.db + rule.eta * gradient.db;
  u.b += velocity.db;
  if (u.n_h > 0) {
    velocity.dW = rule.momentum * velocity.dW + rule.eta * (gradient.dW - rule.l2 * u.W);
    u.W += velocity.dW;
    velocity.dc = rule.momentum * velocity.dc + rule.eta * gradient.dc;
    u.c += velocity.dc;
  }
}

ModelParams init_model(int n_v, int n_h, Structure structure, std::uint64_t seed) {
  ModelParams u = ModelParams::zeros(n_v, n_h, structure);
  RngStream rng(seed, 0);
  constexpr double kInitStd = 1e-4;
  if (structure != Structure::RBM) {
    for (int i = 0; i < n_v; ++i)
      for (int j = i + 1; j < n_v; ++j) u.V(i, j) = u.V(j, i) = kInitStd * rng.normal();
  }
  for (int i = 0; i < n_v; ++i)
    for (int j = 0; j < n_h; ++j) u.W(i, j) = kInitStd * rng.normal();
  return u;
}

std::vector<std::vector<int>> make_batches(const Dataset& data, int batch_size, std::uint64_t seed) {
  const int count = data.count();
  if (batch_size <= 0 || batch_size >= count) {
    std::vector<int> all(count);
    std::iota(all.begin(), all.end(), 0);
    return {all};
  }
  const int n_batches = std::max(1, count / batch_size);
  RngStream rng(derive_seed(seed, 0, kCtxShuffle), 0);

  std::vector<int> order;
  order.reserve(count);
  if (data.labeled()) {
    // class-grouped deal so every batch sees roughly the class mix of the set
    std::map<int, std::vector<int>> groups;
    for (int d = 0; d < count; ++d) groups[data.labels[d]].push_back(d);
    for (auto& [cls, members] : groups) {
      (void)cls;
      fisher_yates(members, rng);
      order.insert(order.end(), members.begin(), members.end());
    }
  } else {
    order.resize(count);
    std::iota(order.begin(), order.end(), 0);
    fisher_yates(order, rng);
  }
  std::vector<std::vector<int>> batches(n_batches);
  for (int pos = 0; pos < count; ++pos) batches[pos % n_batches].push_back(order[pos]);
  return batches;
}

namespace {

enum class LoopKind { Sal, Cd, DmfiCd };

struct LoopSpec {
  LoopKind kind = LoopKind::Sal;
  int cd_k = 100;
  int dmfi_iters = 5;
  double dmfi_damping = 0.5;
};

// Negative chains for DMFI-CD: hiddens sampled exactly, visibles relaxed by
// damped mean-field iterations; chain l draws from stream (seed, l).
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> dmfi_chains(const ModelParams& u,
                                                        const Eigen::MatrixXd& init_v, int k,
                                                        int iters, double damping,
                                                        std::uint64_t seed, int threads) {
  const int count = static_cast<int>(init_v.cols());
  Eigen::MatrixXd vs = init_v;
  Eigen::MatrixXd hs(u.n_h, count);
  constexpr int kBlock = 64;
  const std::size_t blocks = (static_cast<std::size_t>(count) + kBlock - 1) / kBlock;
  parallel_for(blocks, effective_threads(threads), [&](std::size_t lo, std::size_t hi) {
    for (std::size_t bidx = lo; bidx < hi; ++bidx) {
      const int base = static_cast<int>(bidx) * kBlock;
      const int width = std::min(kBlock, count - base);
      std::vector<RngStream> streams;
      streams.reserve(width);
      for (int w = 0; w < width; ++w) streams.emplace_back(seed, base + w);
      auto vblock = vs.middleCols(base, width);
      auto hblock = hs.middleCols(base, width);
      Eigen::MatrixXd fields(u.n_h, width);
      auto draw_h = [&] {
        fields.noalias() = u.W.transpose() * vblock;
        fields.colwise() += u.c;
        for (int col = 0; col < width; ++col)
          for (int j = 0; j < u.n_h; ++j)
            hblock(j, col) = streams[col].uniform() < logistic(2.0 * fields(j, col)) ? 1.0 : -1.0;
      };
      draw_h();
      Eigen::MatrixXd drive(u.n_v, width);
      for (int t = 0; t < k; ++t) {
        drive.noalias() = u.W * hblock;
        drive.colwise() += u.b;
        for (int it = 0; it < iters; ++it)
          vblock = (1.0 - damping) * vblock +
                   damping * ((u.V * vblock + drive).array().tanh()).matrix();
        draw_h();
      }
    }
  });
  return {vs, hs};
}

TrainResult train_loop(Checkpoint state, const Dataset& data, const TrainConfig& cfg,
                       const LoopSpec& spec) {
  ModelParams u = std::move(state.model);
  check_train_inputs(u, data, cfg);
  if (spec.kind == LoopKind::Cd && u.structure != Structure::RBM)
    throw std::invalid_argument("contrastive divergence training requires RBM structure");
  if (spec.kind == LoopKind::DmfiCd && u.structure != Structure::SRBM)
    throw std::invalid_argument("mean-field CD training requires SRBM structure");

  GradientSet velocity = state.velocity;
  double beta_prev = state.beta_prev;
  const UpdateRule rule{cfg.eta, cfg.momentum, cfg.l2};
  const Eigen::MatrixXd data_d = data.vectors.cast<double>();
  const auto batches = make_batches(data, cfg.batch_size, cfg.seed);
  const EvalContext eval_ctx = make_eval_context(data, u, cfg);

  TrainResult result;
  for (int epoch = state.next_epoch; epoch < cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    EpochRecord rec;
    rec.epoch = epoch + 1;

    for (std::size_t bi = 0; bi < batches.size(); ++bi) {
      const std::uint64_t key = batch_key(epoch, bi);
      const Eigen::MatrixXd batch = gather_columns(data_d, batches[bi]);

      Moments negative;
      double beta_used = 1.0;
      if (spec.kind == LoopKind::Sal) {
        LsbConfig ncfg = cfg.lsb;
        ncfg.seed = derive_seed(cfg.seed, key, kCtxNegative);
        ncfg.threads = cfg.threads;
        const SampleSet neg = lsb_sample(u, ncfg);
        negative = sample_moments(neg);

        if (u.structure != Structure::FBM && cfg.estimator != BetaMethod::None) {
          if (cfg.beta_per_batch || bi == 0) {
            BetaEstimate est;
            switch (cfg.estimator) {
              case BetaMethod::CEM:
              case BetaMethod::CEMn: {
                RngStream pick(derive_seed(cfg.seed, key, kCtxCondChoice), 0);
                std::vector<std::pair<Eigen::VectorXd, SpinVector>> conds;
                for (int m = 0; m < std::max(1, cfg.cem_conditions); ++m) {
                  const int col = static_cast<int>(pick.next_u64() % static_cast<std::uint64_t>(data.count()));
                  const SpinVector r = data.vectors.col(col);
                  LsbConfig ccfg = cfg.lsb;
                  ccfg.seed = derive_seed(cfg.seed, key,
                                          kCtxConditional | (static_cast<std::uint64_t>(m) << 8));
                  ccfg.threads = cfg.threads;
                  conds.emplace_back(cem_conditional_means(u, r, ccfg), r);
                }
                est = cem_n_estimate(conds, u.W, u.c);
                break;
              }
              case BetaMethod::KL: {
                est = estimate_beta_kl(neg, u);
                break;
              }
              case BetaMethod::MLPL: {
                est = mlpl_estimate(neg, u);
                break;
              }
              case BetaMethod::None:
                break;
            }
            // estimates pinned at either search boundary mean the objective
            // carried no temperature information (weak fields right after
            // init, or a saturated fit); carry the previous value instead
            const bool usable = est.converged && est.beta > 1e-3 && est.beta < kBetaMax - 1e-3;
            beta_used = usable ? est.beta : beta_prev;
            beta_prev = beta_used;
            rec.estimator = to_string(cfg.estimator);
          } else {
            beta_used = beta_prev;
            rec.estimator = to_string(cfg.estimator);
          }
          rec.beta_eff = beta_used;
        } else {
          rec.estimator = "none";
        }
      } else {
        // CD-style negative phase at unit temperature
        beta_used = 1.0;
        rec.beta_eff = 1.0;
        rec.estimator = "none";
        const std::uint64_t chain_seed = derive_seed(cfg.seed, key, kCtxChains);
        if (spec.kind == LoopKind::Cd) {
          const auto [vs, hs] = blocked_gibbs_chains(u, 1.0, spec.cd_k, batch, chain_seed, cfg.threads);
          negative = moments_from_pairs(vs, hs);
        } else {
          const auto [vs, hs] = dmfi_chains(u, batch, spec.cd_k, spec.dmfi_iters,
                                            spec.dmfi_damping, chain_seed, cfg.threads);
          negative = moments_from_pairs(vs, hs);
        }
      }

      const GradientSet grad = sal_gradient(batch, negative, beta_used, u);
      apply_update(u, velocity, grad, rule);
      rec.grad_norm = grad.norm();
    }

    if (eval_ctx.available && eval_now(cfg, epoch + 1)) {
      rec.kl_exact = spec.kind == LoopKind::Sal ? exact_cost_sampled(u, cfg, epoch + 1, eval_ctx)
                                                : exact_cost_fixed_beta(u, 1.0, eval_ctx);
    }
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.history.push_back(std::move(rec));
    maybe_checkpoint(cfg, u, velocity, epoch + 1, beta_prev);
  }
  result.final_state = {u, std::move(velocity), cfg.epochs, beta_prev};
  result.model = std::move(u);
  return result;
}

Checkpoint fresh_state(const ModelParams& u0) {
  return {u0, GradientSet::zeros(u0), 0, 1.0};
}

}  // namespace

TrainResult sal_train(const ModelParams& u0, const Dataset& data, const TrainConfig& cfg) {
  return train_loop(fresh_state(u0), data, cfg, {LoopKind::Sal, 0, 0, 0.0});
}

TrainResult sal_train(const Checkpoint& resume, const Dataset& data, const TrainConfig& cfg) {
  return train_loop(resume, data, cfg, {LoopKind::Sal, 0, 0, 0.0});
}

TrainResult cd_train_rbm(const ModelParams& u0, const Dataset& data, int k, const TrainConfig& cfg) {
  if (k < 0) throw std::invalid_argument("cd: k must be >= 0");
  return train_loop(fresh_state(u0), data, cfg, {LoopKind::Cd, k, 0, 0.0});
}

TrainResult cd_train_rbm(const Checkpoint& resume, const Dataset& data, int k,
                         const TrainConfig& cfg) {
  return train_loop(resume, data, cfg, {LoopKind::Cd, k, 0, 0.0});
}

TrainResult dmfi_cd_train_srbm(const ModelParams& u0, const Dataset& data, int k, int dmfi_iters,
                               double damping, const TrainConfig& cfg) {
  if (k < 0) throw std::invalid_argument("dmfi-cd: k must be >= 0");
  if (dmfi_iters < 1) throw std::invalid_argument("dmfi-cd: iters must be >= 1");
  if (!(damping > 0.0) || damping > 1.0) throw std::invalid_argument("dmfi-cd: damping must be in (0,1]");
  return train_loop(fresh_state(u0), data, cfg, {LoopKind::DmfiCd, k, dmfi_iters, damping});
}

TrainResult dmfi_cd_train_srbm(const Checkpoint& resume, const Dataset& data, int k,
                               int dmfi_iters, double damping, const TrainConfig& cfg) {
  return train_loop(resume, data, cfg, {LoopKind::DmfiCd, k, dmfi_iters, damping});
}

void write_history(const std::string& path, const std::vector<EpochRecord>& history,
                   const std::string& extra_header) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  if (!extra_header.empty()) out << "# " << extra_header << "\n";
  out << "epoch,beta_eff,estimator,kl_exact,grad_norm,seconds\n";
  out.precision(12);
  for (const auto& r : history)
    out << r.epoch << "," << r.beta_eff << "," << r.estimator << "," << r.kl_exact << ","
        << r.grad_norm << "," << r.seconds << "\n";
}

std::vector<EpochRecord> read_history(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<EpochRecord> history;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#' || line.rfind("epoch,", 0) == 0) continue;
    std::istringstream ss(line);
    std::string cell;
    EpochRecord r;
    std::getline(ss, cell, ',');
    r.epoch = std::stoi(cell);
    std::getline(ss, cell, ',');
    r.beta_eff = std::stod(cell);
    std::getline(ss, r.estimator, ',');
    std::getline(ss, cell, ',');
    r.kl_exact = std::stod(cell);
    std::getline(ss, cell, ',');
    r.grad_norm = std::stod(cell);
    std::getline(ss, cell, ',');
    r.seconds = std::stod(cell);
    history.push_back(std::move(r));
  }
  return history;
}

void write_checkpoint(const std::string& path, const Checkpoint& ck) {
  nlohmann::json j = model_to_json(ck.model);
  nlohmann::json state;
  state["next_epoch"] = ck.next_epoch;
  state["beta_prev"] = ck.beta_prev;
  state["velocity_V"] = matrix_to_json_rowmajor(ck.velocity.dV);
  state["velocity_W"] = matrix_to_json_rowmajor(ck.velocity.dW);
  state["velocity_b"] = vector_to_json(ck.velocity.db);
  state["velocity_c"] = vector_to_json(ck.velocity.dc);
  j["train_state"] = state;
  write_json_file(path, j);
}

Checkpoint read_checkpoint(const std::string& path) {
  const nlohmann::json j = read_json_file(path);
  Checkpoint ck;
  ck.model = model_from_json(j);
  if (!j.contains("train_state")) throw std::invalid_argument(path + ": not a checkpoint file");
  const auto& state = j["train_state"];
  ck.next_epoch = state.at("next_epoch").get<int>();
  ck.beta_prev = state.at("beta_prev").get<double>();
  ck.velocity.dV = matrix_from_json_rowmajor(state.at("velocity_V"), ck.model.n_v, ck.model.n_v);
  ck.velocity.dW = matrix_from_json_rowmajor(state.at("velocity_W"), ck.model.n_v, ck.model.n_h);
  ck.velocity.db = vector_from_json(state.at("velocity_b"), ck.model.n_v);
  ck.velocity.dc = vector_from_json(state.at("velocity_c"), ck.model.n_h);
  return ck;
}

}  // namespace salbm
