// Experiment runner: data generation, sampling, temperature estimation,
// training, and evaluation, all reproducible from (config, seed).

#include <CLI11.hpp>
#include <json.hpp>

#include "salbm/beta_estimation.hpp"
#include "salbm/datasets.hpp"
#include "salbm/eval.hpp"
#include "salbm/model_io.hpp"
#include "salbm/samplers.hpp"
#include "salbm/training.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace salbm;

namespace {

// JSON config files: a flat object whose keys are the long option names of
// the invoked subcommand (plus the global seed/out/threads). Explicit flags
// win; unknown keys are rejected.
struct ConfigUsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<std::string> config_tokens(const std::string& path, const CLI::App& root,
                                       const CLI::App& sub) {
  std::ifstream in(path);
  if (!in) throw ConfigUsageError("config file not readable: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigUsageError("config is not valid JSON: " + std::string(e.what()));
  }
  if (!j.is_object()) throw ConfigUsageError("config must be a JSON object");

  std::vector<std::string> tokens;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string flag = "--" + it.key();
    const CLI::Option* opt = sub.get_option_no_throw(flag);
    if (opt == nullptr) opt = root.get_option_no_throw(flag);
    if (opt == nullptr)
      throw ConfigUsageError("unknown config key '" + it.key() + "' for subcommand " +
                             sub.get_name());
    const json& v = it.value();
    if (v.is_boolean()) {
      tokens.push_back(flag + (v.get<bool>() ? "=true" : "=false"));
    } else if (v.is_string()) {
      tokens.push_back(flag);
      tokens.push_back(v.get<std::string>());
    } else {
      tokens.push_back(flag);
      tokens.push_back(v.dump());
    }
  }
  return tokens;
}

std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string config_hash(const json& resolved) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(resolved.dump())));
  return buf;
}

std::string run_header(const json& resolved, std::uint64_t seed) {
  return "config=" + config_hash(resolved) + " seed=" + std::to_string(seed);
}

void ensure_dir(const std::string& dir) {
  if (!dir.empty()) fs::create_directories(dir);
}

// referenced input paths must resolve before any work starts
struct ConfigPathError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void require_file(const std::string& path, const char* what) {
  if (path.empty()) throw ConfigPathError(std::string(what) + " path is required");
  if (!fs::exists(path)) throw ConfigPathError(std::string(what) + " not found: " + path);
}

std::vector<double> parse_grid(const std::string& spec) {
  // "lo:hi:step" inclusive, or a comma-separated list
  std::vector<double> values;
  if (spec.find(':') != std::string::npos) {
    double lo, hi, step;
    char c1, c2;
    std::istringstream ss(spec);
    if (!(ss >> lo >> c1 >> hi >> c2 >> step) || c1 != ':' || c2 != ':' || step <= 0)
      throw std::invalid_argument("bad grid spec: " + spec);
    for (double x = lo; x < hi + 0.5 * step; x += step) values.push_back(x);
  } else {
    std::istringstream ss(spec);
    std::string cell;
    while (std::getline(ss, cell, ',')) values.push_back(std::stod(cell));
  }
  if (values.empty()) throw std::invalid_argument("empty grid spec: " + spec);
  return values;
}

std::vector<std::pair<int, int>> parse_assignments(const std::string& spec) {
  // "index:spin,index:spin" with spin in {+1,-1}
  std::vector<std::pair<int, int>> out;
  if (spec.empty()) return out;
  std::istringstream ss(spec);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    const auto colon = cell.find(':');
    if (colon == std::string::npos) throw std::invalid_argument("bad assignment: " + cell);
    out.emplace_back(std::stoi(cell.substr(0, colon)), std::stoi(cell.substr(colon + 1)));
  }
  return out;
}

std::vector<int> parse_index_list(const std::string& spec) {
  std::vector<int> out;
  if (spec.empty()) return out;
  std::istringstream ss(spec);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(std::stoi(cell));
  return out;
}

struct SamplerOpts {
  double sigma_inv_sq = 1.0;
  double delta = 1.0;
  int iterations = 100;
  int chains = 1000;

  void attach(CLI::App* cmd) {
    cmd->add_option("--sigma-inv-sq", sigma_inv_sq, "momentum noise as 1/sigma^2")
        ->capture_default_str();
    cmd->add_option("--delta", delta, "symplectic time step")->capture_default_str();
    cmd->add_option("--iters", iterations, "iterations / sweeps (M)")->capture_default_str();
    cmd->add_option("--chains", chains, "parallel chains (L)")->capture_default_str();
  }
  LsbConfig lsb(std::uint64_t seed, int threads) const {
    LsbConfig cfg;
    cfg.delta = delta;
    cfg.sigma = 1.0 / std::sqrt(sigma_inv_sq);
    cfg.iterations = iterations;
    cfg.chains = chains;
    cfg.seed = seed;
    cfg.threads = threads;
    return cfg;
  }
  json resolved() const {
    return {{"sigma_inv_sq", sigma_inv_sq}, {"delta", delta}, {"iters", iterations}, {"chains", chains}};
  }
};

// ---------------------------------------------------------------- gen

int run_gen_3spin(int n_v, double zeta, int count, std::uint64_t seed, const std::string& out) {
  ensure_dir(out);
  const auto [inst, data] = gen_3spin(n_v, zeta, count, seed);
  const json resolved = {{"cmd", "gen 3spin"}, {"nv", n_v}, {"zeta", zeta}, {"d", count}, {"seed", seed}};
  json ij = three_spin_to_json(inst);
  ij["config"] = config_hash(resolved);
  write_json_file(out + "/3spin_instance.json", ij);
  write_dataset(out + "/3spin_data.csv", data, run_header(resolved, seed));
  std::cout << "3spin instance with " << inst.triples.size() << " couplings, " << data.count()
            << " samples -> " << out << "\n";
  return 0;
}

int run_gen_bas(int rows, int cols, bool dedup, std::uint64_t seed, const std::string& out) {
  ensure_dir(out);
  const auto [train, test] = split_bas(rows, cols, seed, dedup);
  const json resolved = {{"cmd", "gen bas"}, {"rows", rows}, {"cols", cols}, {"dedup", dedup}, {"seed", seed}};
  write_dataset(out + "/bas_train.csv", train, run_header(resolved, seed));
  write_dataset(out + "/bas_test.csv", test, run_header(resolved, seed));
  std::cout << "bas " << rows << "x" << cols << ": " << train.count() << " train / " << test.count()
            << " test -> " << out << "\n";
  return 0;
}

int run_gen_sk(int n, double zeta, std::uint64_t seed, const std::string& out) {
  ensure_dir(out);
  const ModelParams u = gen_sk(n, zeta, seed);
  const json resolved = {{"cmd", "gen sk"}, {"n", n}, {"zeta", zeta}, {"seed", seed}};
  json j = sk_to_json(u, zeta, seed);
  j["config"] = config_hash(resolved);
  write_json_file(out + "/sk_instance.json", j);
  std::cout << "sk instance n=" << n << " -> " << out << "/sk_instance.json\n";
  return 0;
}

int run_gen_optdigits(const std::string& train_path, const std::string& test_path,
                      const std::string& out) {
  require_file(train_path, "training file");
  require_file(test_path, "test file");
  ensure_dir(out);
  const auto [train, test] = ingest_optdigits(train_path, test_path);
  const json resolved = {{"cmd", "gen optdigits"}, {"train", train_path}, {"test", test_path}};
  write_dataset(out + "/optdigits_train.csv", train, run_header(resolved, 0));
  write_dataset(out + "/optdigits_test.csv", test, run_header(resolved, 0));
  std::cout << "optdigits: " << train.count() << " train / " << test.count() << " test -> " << out
            << "\n";
  return 0;
}

// ---------------------------------------------------------------- sample

ModelParams load_model_or_instance(const std::string& path) {
  require_file(path, "model file");
  const json j = read_json_file(path);
  if (j.contains("type")) {
    const std::string type = j["type"].get<std::string>();
    if (type == "sk") return sk_from_json(j);
    throw std::invalid_argument(path + ": instance type '" + type + "' has no pairwise model form");
  }
  return model_from_json(j);
}

int run_sample(const std::string& model_path, const std::string& sampler, const SamplerOpts& so,
               double beta, std::uint64_t seed, int threads, const std::string& out_file) {
  const ModelParams u = load_model_or_instance(model_path);
  const json resolved = {{"cmd", "sample"}, {"model", model_path}, {"sampler", sampler},
                         {"beta", beta},    {"seed", seed},        {"opts", so.resolved()}};
  SampleSet set;
  if (sampler == "lsb") {
    set = lsb_sample(u, so.lsb(seed, threads));
  } else if (sampler == "gibbs") {
    set = gibbs_sample(u, beta, so.iterations, so.chains, seed, threads);
  } else {
    SbConfig cfg;
    cfg.variant = sb_variant_from_string(sampler);
    cfg.dt = so.delta;
    cfg.sigma = 1.0 / std::sqrt(so.sigma_inv_sq);
    cfg.iterations = so.iterations;
    cfg.chains = so.chains;
    cfg.seed = seed;
    cfg.threads = threads;
    set = sb_sample(u, cfg);
  }
  write_samples(out_file, set, run_header(resolved, seed));
  std::cout << set.sampler << ": " << set.chain_count() << " samples of " << set.spin_count()
            << " spins in " << set.wall_seconds << " s -> " << out_file << "\n";
  return 0;
}

// ---------------------------------------------------------------- estimate-beta

int run_estimate_beta(const std::string& model_path, const std::string& samples_path,
                      const std::string& method, int cem_n, const SamplerOpts& so,
                      std::uint64_t seed, int threads, const std::string& out_dir) {
  const ModelParams u = load_model_or_instance(model_path);
  ensure_dir(out_dir);
  if (!samples_path.empty()) require_file(samples_path, "samples file");
  const json resolved = {{"cmd", "estimate-beta"}, {"model", model_path}, {"samples", samples_path},
                         {"method", method},       {"cem_n", cem_n},      {"seed", seed},
                         {"opts", so.resolved()}};

  BetaEstimate est;
  if (method == "kl" || method == "mlpl") {
    if (samples_path.empty()) throw std::invalid_argument(method + " estimation needs --samples");
    const SampleSet samples = read_samples(samples_path);
    est = method == "kl" ? estimate_beta_kl(samples, u) : mlpl_estimate(samples, u);
  } else if (method == "cem") {
    if (u.n_h < 1) throw std::invalid_argument("cem estimation needs hidden units");
    RngStream pick(derive_seed(seed, 0, 2), 0);
    std::vector<std::pair<Eigen::VectorXd, SpinVector>> conds;
    for (int m = 0; m < std::max(1, cem_n); ++m) {
      SpinVector r(u.n_v);
      for (int i = 0; i < u.n_v; ++i) r[i] = pick.spin();
      const LsbConfig cfg = so.lsb(derive_seed(seed, 1 + m, 3), threads);
      conds.emplace_back(cem_conditional_means(u, r, cfg), r);
    }
    est = cem_n_estimate(conds, u.W, u.c);
  } else {
    throw std::invalid_argument("unknown estimation method: " + method);
  }

  std::ofstream out(out_dir + "/beta_estimate.csv");
  out << "# " << run_header(resolved, seed) << "\n";
  out << "method,beta,objective,converged\n";
  out.precision(12);
  out << to_string(est.method) << "," << est.beta << "," << est.objective << ","
      << (est.converged ? 1 : 0) << "\n";
  std::cout << "beta_" << to_string(est.method) << " = " << est.beta
            << (est.converged ? "" : " (not converged)") << "\n";
  return 0;
}

// ---------------------------------------------------------------- benchmark

struct BenchmarkRow {
  int instance = 0;
  std::string sampler;
  double sigma_inv_sq = std::numeric_limits<double>::quiet_NaN();
  double kl = 0.0;
  double beta_kl = 0.0;
  double beta_cem = std::numeric_limits<double>::quiet_NaN();
  double beta_mlpl = std::numeric_limits<double>::quiet_NaN();
  double seconds = 0.0;
};

ModelParams benchmark_instance(const std::string& suite, int index, std::uint64_t seed) {
  if (suite == "srbm") {
    // weights ~ N(0, 2/sqrt(N)) on a 10+5 model, zero biases
    return gen_random_srbm(10, 5, 2.0 / std::sqrt(15.0), derive_seed(seed, index, 0x10));
  }
  if (suite == "sk") return gen_sk(15, 2.0, derive_seed(seed, index, 0x20));
  throw std::invalid_argument("unknown benchmark suite: " + suite);
}

int run_benchmark(const std::string& suite, int instances, const std::vector<std::string>& samplers,
                  const std::string& grid_spec, int iterations, int chains, std::uint64_t seed,
                  int threads, const std::string& out_dir) {
  ensure_dir(out_dir);
  const std::vector<double> grid = parse_grid(grid_spec);
  const json resolved = {{"cmd", "benchmark"},   {"suite", suite}, {"instances", instances},
                         {"samplers", samplers}, {"grid", grid},   {"iters", iterations},
                         {"chains", chains},     {"seed", seed}};
  std::vector<BenchmarkRow> rows;

  for (int inst = 0; inst < instances; ++inst) {
    const ModelParams u = benchmark_instance(suite, inst, seed);
    const Eigen::VectorXd energies = enumerate_energies(u);

    for (const std::string& name : samplers) {
      BenchmarkRow row;
      row.instance = inst;
      row.sampler = name;
      const auto t0 = std::chrono::steady_clock::now();

      SampleSet best;
      if (name == "lsb" || name == "clsb") {
        // per-instance sigma tuned for sampling accuracy
        double best_kl = std::numeric_limits<double>::infinity();
        double best_beta = 1.0, best_sigma = grid.front();
        for (const double inv_sq : grid) {
          SampleSet set;
          if (name == "lsb") {
            LsbConfig cfg;
            cfg.sigma = 1.0 / std::sqrt(inv_sq);
            cfg.iterations = iterations;
            cfg.chains = chains;
            cfg.seed = derive_seed(seed, inst, 0x30);
            cfg.threads = threads;
            set = lsb_sample(u, cfg);
          } else {
            SbConfig cfg;
            cfg.variant = SbVariant::cLSB;
            cfg.sigma = 1.0 / std::sqrt(inv_sq);
            cfg.iterations = iterations;
            cfg.chains = chains;
            cfg.seed = derive_seed(seed, inst, 0x31);
            cfg.threads = threads;
            set = sb_sample(u, cfg);
          }
          const BetaEstimate est = estimate_beta_kl(set, energies);
          if (est.objective < best_kl) {
            best_kl = est.objective;
            best_beta = est.beta;
            best_sigma = inv_sq;
            best = set;
          }
        }
        row.kl = best_kl;
        row.beta_kl = best_beta;
        row.sigma_inv_sq = best_sigma;
      } else if (name == "gibbs") {
        best = gibbs_sample(u, 1.0, iterations, chains, derive_seed(seed, inst, 0x32), threads);
        const BetaEstimate est = estimate_beta_kl(best, energies);
        row.kl = est.objective;
        row.beta_kl = est.beta;
      } else {
        SbConfig cfg;
        cfg.variant = sb_variant_from_string(name);
        cfg.iterations = iterations;
        cfg.chains = chains;
        cfg.seed = derive_seed(seed, inst, 0x33);
        cfg.threads = threads;
        best = sb_sample(u, cfg);
        const BetaEstimate est = estimate_beta_kl(best, energies);
        row.kl = est.objective;
        row.beta_kl = est.beta;
      }

      if (u.n_h > 0 && (name == "lsb" || name == "clsb")) {
        // conditional-expectation estimate on the tuned run, random condition
        RngStream rr(derive_seed(seed, inst, 0x34), 0);
        SpinVector r(u.n_v);
        for (int i = 0; i < u.n_v; ++i) r[i] = rr.spin();
        LsbConfig ccfg;
        ccfg.sigma = 1.0 / std::sqrt(row.sigma_inv_sq);
        ccfg.iterations = iterations;
        ccfg.chains = chains;
        ccfg.seed = derive_seed(seed, inst, 0x35);
        ccfg.threads = threads;
        const Eigen::VectorXd means = cem_conditional_means(u, r, ccfg);
        row.beta_cem = cem_estimate(means, r, u.W, u.c).beta;
      }
      row.beta_mlpl = mlpl_estimate(best, u).beta;
      row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      std::cout << "instance " << inst << " " << name << ": kl=" << row.kl
                << " beta_kl=" << row.beta_kl << "\n";
      rows.push_back(std::move(row));
    }
  }

  std::ofstream out(out_dir + "/benchmark_" + suite + ".csv");
  out << "# " << run_header(resolved, seed) << "\n";
  out << "instance,sampler,sigma_inv_sq,kl,beta_kl,beta_cem,beta_mlpl,seconds\n";
  out.precision(12);
  for (const auto& r : rows)
    out << r.instance << "," << r.sampler << "," << r.sigma_inv_sq << "," << r.kl << ","
        << r.beta_kl << "," << r.beta_cem << "," << r.beta_mlpl << "," << r.seconds << "\n";
  std::cout << "wrote " << rows.size() << " rows -> " << out_dir << "/benchmark_" << suite
            << ".csv\n";
  return 0;
}

// ---------------------------------------------------------------- train

int run_train(const std::string& data_path, const std::string& structure_name, int n_h,
              const std::string& method, const SamplerOpts& so, double eta, double momentum,
              double l2, int epochs, int batch, const std::string& estimator_name, int cem_n,
              int cd_k, int dmfi_iters, double dmfi_damping, int eval_every, int checkpoint_every,
              bool beta_per_epoch, const std::string& resume_path, std::uint64_t seed, int threads,
              const std::string& out_dir) {
  ensure_dir(out_dir);
  require_file(data_path, "dataset");
  if (!resume_path.empty()) require_file(resume_path, "checkpoint");
  const Dataset data = read_dataset(data_path);
  const Structure structure = structure_from_string(structure_name);

  TrainConfig cfg;
  cfg.eta = eta;
  cfg.momentum = momentum;
  cfg.l2 = l2;
  cfg.epochs = epochs;
  cfg.batch_size = batch;
  cfg.lsb = so.lsb(0, threads);  // per-epoch seeds are derived inside
  cfg.estimator = beta_method_from_string(estimator_name);
  cfg.cem_conditions = cem_n;
  cfg.seed = seed;
  cfg.eval_every = eval_every;
  cfg.checkpoint_every = checkpoint_every;
  cfg.checkpoint_dir = out_dir;
  cfg.beta_per_batch = !beta_per_epoch;
  cfg.threads = threads;

  const json resolved = {{"cmd", "train"},
                         {"data", data_path},
                         {"structure", structure_name},
                         {"nh", n_h},
                         {"method", method},
                         {"eta", eta},
                         {"momentum", momentum},
                         {"l2", l2},
                         {"epochs", epochs},
                         {"batch", batch},
                         {"estimator", estimator_name},
                         {"cem_n", cem_n},
                         {"cd_k", cd_k},
                         {"dmfi_iters", dmfi_iters},
                         {"dmfi_damping", dmfi_damping},
                         {"seed", seed},
                         {"opts", so.resolved()}};

  TrainResult result;
  if (!resume_path.empty()) {
    const Checkpoint ck = read_checkpoint(resume_path);
    if (method == "sal") result = sal_train(ck, data, cfg);
    else if (method == "cd") result = cd_train_rbm(ck, data, cd_k, cfg);
    else if (method == "dmfi-cd") result = dmfi_cd_train_srbm(ck, data, cd_k, dmfi_iters, dmfi_damping, cfg);
    else throw std::invalid_argument("unknown training method: " + method);
  } else {
    const ModelParams u0 = init_model(data.dim(), n_h, structure, derive_seed(seed, 0, 0));
    if (method == "sal") result = sal_train(u0, data, cfg);
    else if (method == "cd") result = cd_train_rbm(u0, data, cd_k, cfg);
    else if (method == "dmfi-cd") result = dmfi_cd_train_srbm(u0, data, cd_k, dmfi_iters, dmfi_damping, cfg);
    else throw std::invalid_argument("unknown training method: " + method);
  }

  write_model(out_dir + "/model_final.json", result.model);
  write_history(out_dir + "/history.csv", result.history, run_header(resolved, seed));
  double last_kl = std::numeric_limits<double>::quiet_NaN();
  for (const auto& rec : result.history)
    if (!std::isnan(rec.kl_exact)) last_kl = rec.kl_exact;
  std::cout << "trained " << result.history.size() << " epochs";
  if (!std::isnan(last_kl)) std::cout << ", final exact cost " << last_kl;
  std::cout << " -> " << out_dir << "\n";
  return 0;
}

// ---------------------------------------------------------------- eval

int run_eval(const std::string& task, const std::string& model_path, const std::string& data_path,
             const std::string& samples_path, double beta, bool beta_from_kl, int bins,
             std::int64_t pair_cap, const std::string& mask_spec, const std::string& mask_block,
             int img_rows, int img_cols, const std::string& fix_spec, int n_classes, int limit,
             const SamplerOpts& so, std::uint64_t seed, int threads, const std::string& out_dir) {
  ensure_dir(out_dir);
  const json resolved = {{"cmd", "eval"},
                         {"task", task},
                         {"model", model_path},
                         {"data", data_path},
                         {"samples", samples_path},
                         {"beta", beta},
                         {"bins", bins},
                         {"mask", mask_spec},
                         {"mask_block", mask_block},
                         {"fix", fix_spec},
                         {"classes", n_classes},
                         {"limit", limit},
                         {"seed", seed},
                         {"opts", so.resolved()}};
  const std::string header = run_header(resolved, seed);
  if (!model_path.empty()) require_file(model_path, "model file");
  if (!data_path.empty()) require_file(data_path, "dataset");
  if (!samples_path.empty()) require_file(samples_path, "samples file");

  if (task == "sampling-accuracy") {
    const ModelParams u = load_model_or_instance(model_path);
    const SampleSet samples = read_samples(samples_path);
    double b = beta;
    if (beta_from_kl) b = estimate_beta_kl(samples, u).beta;
    const double kl = sampling_accuracy(samples, u, b);
    TaskReport report;
    report.task = task;
    report.metrics["kl"] = kl;
    report.metrics["beta"] = b;
    write_report_json(out_dir + "/sampling_accuracy.json", report, config_hash(resolved));
    std::cout << "kl=" << kl << " at beta=" << b << "\n";
    return 0;
  }
  if (task == "model-kl") {
    const ModelParams u = load_model_or_instance(model_path);
    const Dataset data = read_dataset(data_path);
    const double kl = model_kl(u, beta, data);
    TaskReport report;
    report.task = task;
    report.metrics["kl"] = kl;
    report.metrics["beta"] = beta;
    write_report_json(out_dir + "/model_kl.json", report, config_hash(resolved));
    std::cout << "model kl=" << kl << " at beta=" << beta << "\n";
    return 0;
  }
  if (task == "overlap") {
    const Dataset data = read_dataset(data_path);
    const OverlapHistogram hist = overlap_histogram(data, bins, pair_cap, seed);
    write_overlap_csv(out_dir + "/overlap.csv", hist, header);
    std::cout << "overlap histogram over " << hist.pair_count << " pairs -> " << out_dir
              << "/overlap.csv\n";
    return 0;
  }
  if (task == "reconstruct") {
    const ModelParams u = load_model_or_instance(model_path);
    const Dataset data = read_dataset(data_path);
    std::vector<int> mask = parse_index_list(mask_spec);
    if (!mask_block.empty()) {
      // "r0:r1,c0:c1" inclusive block of a rows x cols image
      int r0, r1, c0, c1;
      char a, b_, c;
      std::istringstream ss(mask_block);
      if (!(ss >> r0 >> a >> r1 >> b_ >> c0 >> c >> c1) || a != ':' || b_ != ',' || c != ':')
        throw std::invalid_argument("bad mask block: " + mask_block);
      if (img_rows <= 0 || img_cols <= 0)
        throw std::invalid_argument("--mask-block needs --rows and --cols");
      for (int r = r0; r <= r1; ++r)
        for (int cc = c0; cc <= c1; ++cc) mask.push_back(r * img_cols + cc);
    }
    if (mask.empty()) throw std::invalid_argument("reconstruction needs --mask or --mask-block");
    const int count = limit > 0 ? std::min(limit, data.count()) : data.count();
    TaskReport report;
    report.task = task;
    report.detail_columns = {"sample", "wrong_pixels", "masked_pixels"};
    double wrong_total = 0.0;
    for (int d = 0; d < count; ++d) {
      const LsbConfig cfg = so.lsb(derive_seed(seed, d, 0x40), threads);
      const SpinVector out = reconstruct(u, data.vectors.col(d), mask, cfg);
      int wrong = 0;
      for (int idx : mask) wrong += out[idx] != data.vectors(idx, d);
      wrong_total += wrong;
      report.details.push_back(
          {static_cast<double>(d), static_cast<double>(wrong), static_cast<double>(mask.size())});
    }
    const double frac = wrong_total / (static_cast<double>(count) * mask.size());
    report.metrics["error_fraction"] = frac;
    report.metrics["samples"] = count;
    write_report_json(out_dir + "/reconstruction.json", report, config_hash(resolved));
    write_report_csv(out_dir + "/reconstruction.csv", report, header);
    std::cout << "reconstruction error fraction " << frac << " over " << count << " images\n";
    return 0;
  }
  if (task == "generate") {
    const ModelParams u = load_model_or_instance(model_path);
    const SampleSet set = conditional_generate(u, parse_assignments(fix_spec),
                                               so.lsb(derive_seed(seed, 0, 0x41), threads));
    write_samples(out_dir + "/generated.csv", set, header);
    std::cout << "generated " << set.chain_count() << " visible samples -> " << out_dir
              << "/generated.csv\n";
    return 0;
  }
  if (task == "classify") {
    const ModelParams u = load_model_or_instance(model_path);
    const Dataset data = read_dataset(data_path);
    if (!data.labeled()) throw std::invalid_argument("classification needs a labeled dataset");
    if (data.dim() != u.n_v)
      throw std::invalid_argument("dataset dimension must match the model (pixels + one-hot)");
    const int n_pixels = u.n_v - n_classes;
    const int count = limit > 0 ? std::min(limit, data.count()) : data.count();
    TaskReport report;
    report.task = task;
    report.detail_columns = {"sample", "label", "predicted"};
    int correct = 0;
    for (int d = 0; d < count; ++d) {
      const SpinVector image = data.vectors.col(d).head(n_pixels);
      const int predicted =
          classify(u, image, n_classes, so.lsb(derive_seed(seed, d, 0x42), threads));
      correct += predicted == data.labels[d];
      report.details.push_back({static_cast<double>(d), static_cast<double>(data.labels[d]),
                                static_cast<double>(predicted)});
    }
    const double accuracy = static_cast<double>(correct) / count;
    report.metrics["accuracy"] = accuracy;
    report.metrics["samples"] = count;
    write_report_json(out_dir + "/classification.json", report, config_hash(resolved));
    write_report_csv(out_dir + "/classification.csv", report, header);
    std::cout << "classification accuracy " << accuracy << " over " << count << " images\n";
    return 0;
  }
  throw std::invalid_argument("unknown eval task: " + task);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Boltzmann-machine sampling, temperature estimation, and training toolkit"};
  app.require_subcommand(1);
  app.fallthrough();  // global --seed/--out/--threads may follow the subcommand
  // config-injected tokens precede explicit flags, so the explicit value wins
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  std::uint64_t seed = 0;
  int threads = 0;
  std::string out_dir = ".";
  app.add_option("--seed", seed, "master seed")->capture_default_str();
  app.add_option("--threads", threads, "worker thread cap (0 = hardware)")->capture_default_str();
  app.add_option("--out", out_dir, "output directory")->capture_default_str();

  // gen
  CLI::App* gen = app.add_subcommand("gen", "generate datasets and instances");
  gen->require_subcommand(1);
  CLI::App* g3 = gen->add_subcommand("3spin", "three-body spin-glass dataset");
  int g3_nv = 10, g3_d = 9600;
  double g3_zeta = 2.0;
  g3->add_option("--nv", g3_nv, "visible count")->capture_default_str();
  g3->add_option("--zeta", g3_zeta, "coupling strength")->capture_default_str();
  g3->add_option("--d", g3_d, "dataset size")->capture_default_str();

  CLI::App* gb = gen->add_subcommand("bas", "bars-and-stripes patterns");
  int gb_rows = 7, gb_cols = 6;
  bool gb_dedup = false;
  gb->add_option("--rows", gb_rows)->capture_default_str();
  gb->add_option("--cols", gb_cols)->capture_default_str();
  gb->add_flag("--dedup", gb_dedup, "drop the duplicated uniform images");

  CLI::App* gs = gen->add_subcommand("sk", "Sherrington-Kirkpatrick couplings");
  int gs_n = 15;
  double gs_zeta = 2.0;
  gs->add_option("--n", gs_n)->capture_default_str();
  gs->add_option("--zeta", gs_zeta)->capture_default_str();

  CLI::App* go = gen->add_subcommand("optdigits", "ingest upstream digit files");
  std::string go_train, go_test;
  go->add_option("--train", go_train, "optdigits.tra path")->required();
  go->add_option("--test", go_test, "optdigits.tes path")->required();

  // sample
  CLI::App* sample = app.add_subcommand("sample", "draw samples from a model");
  std::string sm_model, sm_sampler = "lsb", sm_out = "samples.csv";
  double sm_beta = 1.0;
  SamplerOpts sm_opts;
  sample->add_option("--model", sm_model, "model or instance JSON")->required();
  sample->add_option("--sampler", sm_sampler, "sampling algorithm")
      ->check(CLI::IsMember({"lsb", "clsb", "asb", "bsb", "dsb", "gibbs"}))
      ->capture_default_str();
  sample->add_option("--beta", sm_beta, "gibbs inverse temperature")->capture_default_str();
  sample->add_option("--samples-out", sm_out, "output CSV")->capture_default_str();
  sm_opts.attach(sample);

  // estimate-beta
  CLI::App* est = app.add_subcommand("estimate-beta", "effective inverse temperature estimators");
  std::string eb_model, eb_samples, eb_method = "kl";
  int eb_cem_n = 1;
  SamplerOpts eb_opts;
  est->add_option("--model", eb_model)->required();
  est->add_option("--samples", eb_samples, "sample CSV (kl/mlpl)");
  est->add_option("--method", eb_method, "estimator")
      ->check(CLI::IsMember({"kl", "cem", "mlpl"}))
      ->capture_default_str();
  est->add_option("--cem-n", eb_cem_n, "number of CEM conditions")->capture_default_str();
  eb_opts.attach(est);

  // benchmark
  CLI::App* bench = app.add_subcommand("benchmark", "sampling-accuracy benchmark suites");
  std::string bm_suite = "srbm", bm_samplers = "lsb,gibbs", bm_grid = "0.5:2.0:0.1";
  int bm_instances = 10, bm_iters = 100, bm_chains = 9600;
  bench->add_option("--suite", bm_suite, "benchmark family")
      ->check(CLI::IsMember({"srbm", "sk"}))
      ->capture_default_str();
  bench->add_option("--instances", bm_instances)->capture_default_str();
  bench->add_option("--samplers", bm_samplers, "comma list")->capture_default_str();
  bench->add_option("--sigma-grid", bm_grid, "1/sigma^2 grid lo:hi:step")->capture_default_str();
  bench->add_option("--iters", bm_iters)->capture_default_str();
  bench->add_option("--chains", bm_chains)->capture_default_str();

  // train
  CLI::App* train = app.add_subcommand("train", "train a model");
  std::string tr_data, tr_structure = "srbm", tr_method = "sal", tr_estimator = "cem", tr_resume;
  int tr_nh = 5, tr_epochs = 500, tr_batch = 0, tr_cem_n = 1, tr_cd_k = 100;
  int tr_dmfi_iters = 5, tr_eval_every = 10, tr_checkpoint_every = 0;
  double tr_eta = 0.05, tr_momentum = 0.5, tr_l2 = 1e-5, tr_dmfi_damping = 0.5;
  bool tr_beta_per_epoch = false;
  SamplerOpts tr_opts;
  train->add_option("--data", tr_data, "training dataset CSV")->required();
  train->add_option("--structure", tr_structure, "model family")
      ->check(CLI::IsMember({"fbm", "rbm", "srbm"}))
      ->capture_default_str();
  train->add_option("--nh", tr_nh, "hidden units")->capture_default_str();
  train->add_option("--method", tr_method, "training method")
      ->check(CLI::IsMember({"sal", "cd", "dmfi-cd"}))
      ->capture_default_str();
  train->add_option("--eta", tr_eta)->capture_default_str();
  train->add_option("--momentum", tr_momentum)->capture_default_str();
  train->add_option("--l2", tr_l2)->capture_default_str();
  train->add_option("--epochs", tr_epochs)->capture_default_str();
  train->add_option("--batch", tr_batch, "0 = full batch")->capture_default_str();
  train->add_option("--estimator", tr_estimator, "temperature estimator")
      ->check(CLI::IsMember({"cem", "cemn", "kl", "mlpl", "none"}))
      ->capture_default_str();
  train->add_option("--cem-n", tr_cem_n)->capture_default_str();
  train->add_option("--cd-k", tr_cd_k)->capture_default_str();
  train->add_option("--dmfi-iters", tr_dmfi_iters)->capture_default_str();
  train->add_option("--dmfi-damping", tr_dmfi_damping)->capture_default_str();
  train->add_option("--eval-every", tr_eval_every, "exact-cost cadence (0 = never)")
      ->capture_default_str();
  train->add_option("--checkpoint-every", tr_checkpoint_every)->capture_default_str();
  train->add_flag("--beta-per-epoch", tr_beta_per_epoch, "estimate beta once per epoch");
  train->add_option("--resume", tr_resume, "checkpoint JSON to continue from");
  tr_opts.attach(train);

  // eval
  CLI::App* eval_cmd = app.add_subcommand("eval", "evaluation tasks and reports");
  std::string ev_task, ev_model, ev_data, ev_samples, ev_mask, ev_mask_block, ev_fix;
  double ev_beta = 1.0;
  bool ev_beta_from_kl = false;
  int ev_bins = 50, ev_rows = 0, ev_cols = 0, ev_classes = 10, ev_limit = 0;
  std::int64_t ev_pair_cap = 1000000;
  SamplerOpts ev_opts;
  eval_cmd
      ->add_option("--task", ev_task, "evaluation task")
      ->check(CLI::IsMember(
          {"sampling-accuracy", "model-kl", "overlap", "reconstruct", "generate", "classify"}))
      ->required();
  eval_cmd->add_option("--model", ev_model);
  eval_cmd->add_option("--data", ev_data);
  eval_cmd->add_option("--samples", ev_samples);
  eval_cmd->add_option("--beta", ev_beta)->capture_default_str();
  eval_cmd->add_flag("--beta-from-kl", ev_beta_from_kl, "estimate beta from the samples first");
  eval_cmd->add_option("--bins", ev_bins)->capture_default_str();
  eval_cmd->add_option("--pair-cap", ev_pair_cap)->capture_default_str();
  eval_cmd->add_option("--mask", ev_mask, "comma list of pixel indices");
  eval_cmd->add_option("--mask-block", ev_mask_block, "r0:r1,c0:c1 inclusive");
  eval_cmd->add_option("--rows", ev_rows)->capture_default_str();
  eval_cmd->add_option("--cols", ev_cols)->capture_default_str();
  eval_cmd->add_option("--fix", ev_fix, "index:spin assignments");
  eval_cmd->add_option("--classes", ev_classes)->capture_default_str();
  eval_cmd->add_option("--limit", ev_limit, "evaluate at most this many samples (0 = all)")
      ->capture_default_str();
  ev_opts.attach(eval_cmd);

  // pull --config out of the raw arguments; its keys become injected tokens
  std::vector<std::string> tokens;
  std::string config_path;
  for (int i = 1; i < argc; ++i) {
    const std::string tok = argv[i];
    if (tok == "--config") {
      if (i + 1 >= argc) {
        std::cerr << "error: --config needs a value\n";
        return 2;
      }
      config_path = argv[++i];
    } else if (tok.rfind("--config=", 0) == 0) {
      config_path = tok.substr(9);
    } else {
      tokens.push_back(tok);
    }
  }

  try {
    if (!config_path.empty()) {
      std::size_t sub_end = 0;
      const CLI::App* sub = &app;
      while (sub_end < tokens.size() && !tokens[sub_end].empty() && tokens[sub_end][0] != '-') {
        const CLI::App* next = sub->get_subcommand_no_throw(tokens[sub_end]);
        if (next == nullptr) break;
        sub = next;
        ++sub_end;
      }
      if (sub == &app) throw ConfigUsageError("--config requires a subcommand");
      const std::vector<std::string> extra = config_tokens(config_path, app, *sub);
      tokens.insert(tokens.begin() + static_cast<std::ptrdiff_t>(sub_end), extra.begin(),
                    extra.end());
    }
  } catch (const ConfigUsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  try {
    app.parse(std::vector<std::string>(tokens.rbegin(), tokens.rend()));
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  set_default_threads(threads);

  try {
    if (g3->parsed()) return run_gen_3spin(g3_nv, g3_zeta, g3_d, seed, out_dir);
    if (gb->parsed()) return run_gen_bas(gb_rows, gb_cols, gb_dedup, seed, out_dir);
    if (gs->parsed()) return run_gen_sk(gs_n, gs_zeta, seed, out_dir);
    if (go->parsed()) return run_gen_optdigits(go_train, go_test, out_dir);
    if (sample->parsed())
      return run_sample(sm_model, sm_sampler, sm_opts, sm_beta, seed, threads, sm_out);
    if (est->parsed())
      return run_estimate_beta(eb_model, eb_samples, eb_method, eb_cem_n, eb_opts, seed, threads,
                               out_dir);
    if (bench->parsed()) {
      std::vector<std::string> names;
      std::istringstream ss(bm_samplers);
      std::string cell;
      while (std::getline(ss, cell, ',')) names.push_back(cell);
      return run_benchmark(bm_suite, bm_instances, names, bm_grid, bm_iters, bm_chains, seed,
                           threads, out_dir);
    }
    if (train->parsed())
      return run_train(tr_data, tr_structure, tr_nh, tr_method, tr_opts, tr_eta, tr_momentum,
                       tr_l2, tr_epochs, tr_batch, tr_estimator, tr_cem_n, tr_cd_k, tr_dmfi_iters,
                       tr_dmfi_damping, tr_eval_every, tr_checkpoint_every, tr_beta_per_epoch,
                       tr_resume, seed, threads, out_dir);
    if (eval_cmd->parsed())
      return run_eval(ev_task, ev_model, ev_data, ev_samples, ev_beta, ev_beta_from_kl, ev_bins,
                      ev_pair_cap, ev_mask, ev_mask_block, ev_rows, ev_cols, ev_fix, ev_classes,
                      ev_limit, ev_opts, seed, threads, out_dir);
  } catch (const ConfigPathError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
