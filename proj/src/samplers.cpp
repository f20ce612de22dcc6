#include "salbm/samplers.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace salbm {

namespace {

// Chains run in fixed 64-wide blocks (short blocks are padded with throwaway
// chains) so a chain's arithmetic never depends on how many chains were
// requested or how blocks are assigned to threads.
constexpr int kChainBlock = 64;

inline void sincos_compat(double a, double* s, double* c) {
#if defined(__GLIBC__)
  ::sincos(a, s, c);
#else
  *s = std::sin(a);
  *c = std::cos(a);
#endif
}

std::vector<RngStream> make_streams(std::uint64_t seed, std::uint64_t first, int count) {
  std::vector<RngStream> streams;
  streams.reserve(count);
  for (int i = 0; i < count; ++i) streams.emplace_back(seed, first + i);
  return streams;
}

// Per-chain batch of n normals: ceil(n/2) Box-Muller pairs, two uint64 draws
// per pair, no spare carried between batches. log/sqrt run vectorized over
// the whole block.
class BlockNormals {
 public:
  BlockNormals(int n, int width)
      : n_(n), pairs_((n + 1) / 2), u1_(pairs_, width), u2_(pairs_, width), r_(pairs_, width) {}

  void fill(std::vector<RngStream>& streams, Eigen::MatrixXd& out, double scale) {
    const int width = static_cast<int>(streams.size());
    for (int col = 0; col < width; ++col) {
      RngStream& st = streams[col];
      for (int p = 0; p < pairs_; ++p) {
        u1_(p, col) = st.uniform_open0();
        u2_(p, col) = st.uniform();
      }
    }
    r_ = (-2.0 * u1_.log()).sqrt();
    for (int p = 0; p < pairs_; ++p) {
      for (int col = 0; col < width; ++col) {
        double s, c;
        sincos_compat(2.0 * M_PI * u2_(p, col), &s, &c);
        out(2 * p, col) = scale * r_(p, col) * c;
        if (2 * p + 1 < n_) out(2 * p + 1, col) = scale * r_(p, col) * s;
      }
    }
  }

 private:
  int n_, pairs_;
  Eigen::ArrayXXd u1_, u2_, r_;
};

inline void discretize_block(Eigen::MatrixXd& x) {
  x = (x.array() >= 0.0).select(1.0, Eigen::MatrixXd::Constant(x.rows(), x.cols(), -1.0));
}

void write_block_output(const Eigen::MatrixXd& x, Eigen::Ref<Eigen::MatrixXi> out) {
  for (Eigen::Index col = 0; col < out.cols(); ++col)
    for (Eigen::Index i = 0; i < out.rows(); ++i) out(i, col) = x(i, col) >= 0.0 ? 1 : -1;
}

void run_lsb_block(const Eigen::MatrixXd& J, const Eigen::VectorXd& f, double delta, double sigma,
                   int iters, bool clip, std::uint64_t seed, std::uint64_t chain_base,
                   Eigen::Ref<Eigen::MatrixXi> out) {
  const int n = static_cast<int>(J.rows());
  std::vector<RngStream> streams = make_streams(seed, chain_base, kChainBlock);
  Eigen::MatrixXd x(n, kChainBlock), y(n, kChainBlock), force(n, kChainBlock);
  Eigen::MatrixXd sx(n, kChainBlock), noise(n, kChainBlock);
  BlockNormals normals(n, kChainBlock);

  for (int col = 0; col < kChainBlock; ++col)
    for (int i = 0; i < n; ++i) x(i, col) = streams[col].spin();
  normals.fill(streams, y, sigma);

  for (int k = 0; k < iters; ++k) {
    sx = (x.array() >= 0.0).select(1.0, Eigen::MatrixXd::Constant(n, kChainBlock, -1.0));
    force.noalias() = J * sx;
    force.colwise() += f;
    y += delta * force;
    x += delta * y;
    if (clip)
      x = x.cwiseMax(-1.0).cwiseMin(1.0);
    else
      discretize_block(x);
    normals.fill(streams, noise, sigma);
    y.swap(noise);
  }
  write_block_output(x, out);
}

void run_sb_block(const Eigen::MatrixXd& J, const Eigen::VectorXd& f, const SbConfig& cfg,
                  std::uint64_t chain_base, Eigen::Ref<Eigen::MatrixXi> out) {
  const int n = static_cast<int>(J.rows());
  std::vector<RngStream> streams = make_streams(cfg.seed, chain_base, kChainBlock);
  Eigen::MatrixXd x(n, kChainBlock), y(n, kChainBlock), jx(n, kChainBlock), sx(n, kChainBlock);

  for (int col = 0; col < kChainBlock; ++col) {
    for (int i = 0; i < n; ++i) x(i, col) = 2.0 * streams[col].uniform() - 1.0;
    for (int i = 0; i < n; ++i) y(i, col) = 0.2 * streams[col].uniform() - 0.1;
  }

  const double restoring = cfg.a0 - cfg.pump;
  for (int k = 0; k < cfg.iterations; ++k) {
    switch (cfg.variant) {
      case SbVariant::aSB:
        jx.noalias() = J * x;
        jx.colwise() += f;
        y.array() += cfg.dt * (-x.array().cube() - restoring * x.array() + jx.array());
        break;
      case SbVariant::bSB:
        jx.noalias() = J * x;
        for (int col = 0; col < kChainBlock; ++col) {
          const double den = jx.col(col).squaredNorm();
          const double c0 = den > 0.0 ? std::sqrt(x.col(col).squaredNorm() / den) : 0.0;
          y.col(col).array() +=
              cfg.dt * (-restoring * x.col(col).array() + c0 * (jx.col(col) + f).array());
        }
        break;
      case SbVariant::dSB:
        sx = (x.array() >= 0.0).select(1.0, Eigen::MatrixXd::Constant(n, kChainBlock, -1.0));
        jx.noalias() = J * sx;
        for (int col = 0; col < kChainBlock; ++col) {
          const double den = jx.col(col).squaredNorm();
          const double c0 = den > 0.0 ? std::sqrt(static_cast<double>(n) / den) : 0.0;
          y.col(col).array() +=
              cfg.dt * (-restoring * x.col(col).array() + c0 * (jx.col(col) + f).array());
        }
        break;
      case SbVariant::cLSB:
        throw std::logic_error("cLSB is routed through the LSB kernel");
    }
    x += (cfg.dt * cfg.a0) * y;
    // perfectly inelastic walls; aSB is confined by its cubic term instead
    if (cfg.variant != SbVariant::aSB) {
      for (int col = 0; col < kChainBlock; ++col)
        for (int i = 0; i < n; ++i)
          if (x(i, col) > 1.0 || x(i, col) < -1.0) {
            x(i, col) = x(i, col) > 0.0 ? 1.0 : -1.0;
            y(i, col) = 0.0;
          }
    }
  }
  write_block_output(x, out);
}

void run_gibbs_block(const Eigen::MatrixXd& J, const Eigen::VectorXd& f, double beta, int sweeps,
                     std::uint64_t seed, std::uint64_t chain_base, Eigen::Ref<Eigen::MatrixXi> out) {
  const int n = static_cast<int>(J.rows());
  std::vector<RngStream> streams = make_streams(seed, chain_base, kChainBlock);
  Eigen::MatrixXd s(n, kChainBlock);
  for (int col = 0; col < kChainBlock; ++col)
    for (int i = 0; i < n; ++i) s(i, col) = streams[col].spin();

  Eigen::RowVectorXd field(kChainBlock);
  for (int sweep = 0; sweep < sweeps; ++sweep) {
    for (int i = 0; i < n; ++i) {
      field.noalias() = J.row(i) * s;
      for (int col = 0; col < kChainBlock; ++col) {
        const double p = logistic(2.0 * beta * (field(col) + f(i)));
        s(i, col) = streams[col].uniform() < p ? 1.0 : -1.0;
      }
    }
  }
  write_block_output(s, out);
}

template <typename BlockFn>
SampleSet collect_chains(const ModelParams& u, int chains, int threads, const std::string& name,
                         std::uint64_t seed, BlockFn&& block_fn) {
  const auto start = std::chrono::steady_clock::now();
  const int n = u.size();
  SampleSet set;
  set.samples.resize(n, chains);
  set.n_v = u.n_v;
  set.n_h = u.n_h;
  set.sampler = name;
  set.seed = seed;

  const std::size_t blocks = (static_cast<std::size_t>(chains) + kChainBlock - 1) / kChainBlock;
  parallel_for(blocks, effective_threads(threads), [&](std::size_t lo, std::size_t hi) {
    for (std::size_t bidx = lo; bidx < hi; ++bidx) {
      const std::uint64_t base = bidx * kChainBlock;
      const int actual = static_cast<int>(std::min<std::size_t>(kChainBlock, chains - base));
      if (actual == kChainBlock) {
        block_fn(base, set.samples.block(0, static_cast<Eigen::Index>(base), n, kChainBlock));
      } else {
        Eigen::MatrixXi tail(n, kChainBlock);
        block_fn(base, Eigen::Ref<Eigen::MatrixXi>(tail));
        set.samples.block(0, static_cast<Eigen::Index>(base), n, actual) = tail.leftCols(actual);
      }
    }
  });
  set.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return set;
}

}  // namespace

void LsbConfig::validate() const {
  if (!(delta > 0.0) || !std::isfinite(delta)) throw std::invalid_argument("lsb: delta must be finite and > 0");
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw std::invalid_argument("lsb: sigma must be finite and > 0");
  if (iterations < 1) throw std::invalid_argument("lsb: iterations must be >= 1");
  if (chains < 1) throw std::invalid_argument("lsb: chains must be >= 1");
}

void SbConfig::validate() const {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("sb: dt must be finite and > 0");
  if (!std::isfinite(a0) || !std::isfinite(pump)) throw std::invalid_argument("sb: a0/pump must be finite");
  if (variant == SbVariant::cLSB && (!(sigma > 0.0) || !std::isfinite(sigma)))
    throw std::invalid_argument("sb: cLSB needs finite sigma > 0");
  if (iterations < 1) throw std::invalid_argument("sb: iterations must be >= 1");
  if (chains < 1) throw std::invalid_argument("sb: chains must be >= 1");
}

const char* to_string(SbVariant v) {
  switch (v) {
    case SbVariant::aSB: return "asb";
    case SbVariant::bSB: return "bsb";
    case SbVariant::dSB: return "dsb";
    case SbVariant::cLSB: return "clsb";
  }
  return "?";
}

SbVariant sb_variant_from_string(const std::string& s) {
  if (s == "asb") return SbVariant::aSB;
  if (s == "bsb") return SbVariant::bSB;
  if (s == "dsb") return SbVariant::dSB;
  if (s == "clsb") return SbVariant::cLSB;
  throw std::invalid_argument("unknown SB variant: " + s);
}

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

SampleSet lsb_sample(const ModelParams& u, const LsbConfig& cfg) {
  u.validate();
  cfg.validate();
  const Eigen::MatrixXd J = u.coupling_matrix();
  const Eigen::VectorXd f = u.bias_vector();
  return collect_chains(u, cfg.chains, cfg.threads, "lsb", cfg.seed,
                        [&](std::uint64_t base, Eigen::Ref<Eigen::MatrixXi> out) {
                          run_lsb_block(J, f, cfg.delta, cfg.sigma, cfg.iterations, false, cfg.seed, base, out);
                        });
}

SampleSet sb_sample(const ModelParams& u, const SbConfig& cfg) {
  u.validate();
  cfg.validate();
  const Eigen::MatrixXd J = u.coupling_matrix();
  const Eigen::VectorXd f = u.bias_vector();
  if (cfg.variant == SbVariant::cLSB) {
    return collect_chains(u, cfg.chains, cfg.threads, "clsb", cfg.seed,
                          [&](std::uint64_t base, Eigen::Ref<Eigen::MatrixXi> out) {
                            run_lsb_block(J, f, cfg.dt, cfg.sigma, cfg.iterations, true, cfg.seed, base, out);
                          });
  }
  return collect_chains(u, cfg.chains, cfg.threads, to_string(cfg.variant), cfg.seed,
                        [&](std::uint64_t base, Eigen::Ref<Eigen::MatrixXi> out) {
                          run_sb_block(J, f, cfg, base, out);
                        });
}

SampleSet gibbs_sample(const ModelParams& u, double beta, int sweeps, int chains,
                       std::uint64_t seed, int threads) {
  u.validate();
  if (!(beta >= 0.0) || !std::isfinite(beta)) throw std::invalid_argument("gibbs: beta must be finite and >= 0");
  if (sweeps < 1) throw std::invalid_argument("gibbs: sweeps must be >= 1");
  if (chains < 1) throw std::invalid_argument("gibbs: chains must be >= 1");
  const Eigen::MatrixXd J = u.coupling_matrix();
  const Eigen::VectorXd f = u.bias_vector();
  return collect_chains(u, chains, threads, "gibbs", seed,
                        [&](std::uint64_t base, Eigen::Ref<Eigen::MatrixXi> out) {
                          run_gibbs_block(J, f, beta, sweeps, seed, base, out);
                        });
}

std::pair<SpinVector, SpinVector> blocked_gibbs_chain(const ModelParams& u, double beta, int k,
                                                      const SpinVector& init_v, std::uint64_t seed) {
  u.validate();
  if (u.structure != Structure::RBM) throw std::invalid_argument("blocked Gibbs requires RBM structure");
  if (init_v.size() != u.n_v || !is_spin_vector(init_v))
    throw std::invalid_argument("blocked Gibbs: bad initial visible vector");
  if (k < 0) throw std::invalid_argument("blocked Gibbs: k must be >= 0");

  RngStream st(seed, 0);
  Eigen::VectorXd v = init_v.cast<double>();
  Eigen::VectorXd h(u.n_h);
  auto draw_h = [&] {
    for (int j = 0; j < u.n_h; ++j) {
      const double field = u.c[j] + u.W.col(j).dot(v);
      h[j] = st.uniform() < logistic(2.0 * beta * field) ? 1.0 : -1.0;
    }
  };
  draw_h();
  for (int t = 0; t < k; ++t) {
    for (int i = 0; i < u.n_v; ++i) {
      const double field = u.b[i] + u.W.row(i).dot(h);
      v[i] = st.uniform() < logistic(2.0 * beta * field) ? 1.0 : -1.0;
    }
    draw_h();
  }
  return {v.cast<int>(), h.cast<int>()};
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> blocked_gibbs_chains(const ModelParams& u, double beta, int k,
                                                                 const Eigen::MatrixXd& init_v,
                                                                 std::uint64_t seed, int threads) {
  u.validate();
  if (u.structure != Structure::RBM) throw std::invalid_argument("blocked Gibbs requires RBM structure");
  if (init_v.rows() != u.n_v) throw std::invalid_argument("blocked Gibbs: init_v has wrong row count");
  const int count = static_cast<int>(init_v.cols());
  Eigen::MatrixXd vs = init_v;
  Eigen::MatrixXd hs(u.n_h, count);

  const std::size_t blocks = (static_cast<std::size_t>(count) + kChainBlock - 1) / kChainBlock;
  parallel_for(blocks, effective_threads(threads), [&](std::size_t lo, std::size_t hi) {
    for (std::size_t bidx = lo; bidx < hi; ++bidx) {
      const int base = static_cast<int>(bidx) * kChainBlock;
      const int width = std::min(kChainBlock, count - base);
      std::vector<RngStream> streams = make_streams(seed, base, width);
      auto vblock = vs.middleCols(base, width);
      auto hblock = hs.middleCols(base, width);
      Eigen::MatrixXd field(u.n_h, width);
      auto draw_h = [&] {
        field.noalias() = u.W.transpose() * vblock;
        field.colwise() += u.c;
        for (int col = 0; col < width; ++col)
          for (int j = 0; j < u.n_h; ++j)
            hblock(j, col) = streams[col].uniform() < logistic(2.0 * beta * field(j, col)) ? 1.0 : -1.0;
      };
      draw_h();
      Eigen::MatrixXd vfield(u.n_v, width);
      for (int t = 0; t < k; ++t) {
        vfield.noalias() = u.W * hblock;
        vfield.colwise() += u.b;
        for (int col = 0; col < width; ++col)
          for (int i = 0; i < u.n_v; ++i)
            vblock(i, col) = streams[col].uniform() < logistic(2.0 * beta * vfield(i, col)) ? 1.0 : -1.0;
        draw_h();
      }
    }
  });
  return {vs, hs};
}

Eigen::VectorXd dmfi_visible(const ModelParams& u, const SpinVector& h, const Eigen::VectorXd& v0,
                             int iters, double damping) {
  u.validate();
  if (h.size() != u.n_h || v0.size() != u.n_v) throw std::invalid_argument("dmfi: dimension mismatch");
  if (!(damping > 0.0) || damping > 1.0) throw std::invalid_argument("dmfi: damping must be in (0, 1]");
  if (iters < 0) throw std::invalid_argument("dmfi: iters must be >= 0");
  const Eigen::VectorXd hd = h.cast<double>();
  const Eigen::VectorXd drive = u.W * hd + u.b;
  Eigen::VectorXd v = v0;
  for (int t = 0; t < iters; ++t)
    v = (1.0 - damping) * v + damping * (u.V * v + drive).array().tanh().matrix();
  return v;
}

void write_samples(const std::string& path, const SampleSet& set, const std::string& extra_header) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "# n_v=" << set.n_v << " n_h=" << set.n_h << " sampler=" << set.sampler
      << " seed=" << set.seed << "\n";
  if (!extra_header.empty()) out << "# " << extra_header << "\n";
  for (int l = 0; l < set.chain_count(); ++l) {
    for (int i = 0; i < set.spin_count(); ++i) {
      if (i) out << ",";
      out << set.samples(i, l);
    }
    out << "\n";
  }
}

namespace {
void parse_header_fields(const std::string& line, SampleSet& set) {
  std::istringstream ss(line.substr(1));
  std::string tok;
  while (ss >> tok) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = tok.substr(0, eq), val = tok.substr(eq + 1);
    if (key == "n_v") set.n_v = std::stoi(val);
    else if (key == "n_h") set.n_h = std::stoi(val);
    else if (key == "sampler") set.sampler = val;
    else if (key == "seed") set.seed = std::stoull(val);
  }
}
}  // namespace

SampleSet read_samples(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  SampleSet set;
  std::vector<std::vector<int>> rows;
  std::string line;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (!header_seen) {
        parse_header_fields(line, set);
        header_seen = true;
      }
      continue;
    }
    std::vector<int> row;
    std::istringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      const int v = std::stoi(cell);
      if (v != 1 && v != -1) throw std::runtime_error(path + ": sample entries must be +1 or -1");
      row.push_back(v);
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw std::runtime_error(path + ": ragged sample rows");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::runtime_error(path + ": no samples");
  set.samples.resize(static_cast<Eigen::Index>(rows.front().size()), static_cast<Eigen::Index>(rows.size()));
  for (std::size_t l = 0; l < rows.size(); ++l)
    for (std::size_t i = 0; i < rows.front().size(); ++i)
      set.samples(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(l)) = rows[l][i];
  return set;
}

}  // namespace salbm
