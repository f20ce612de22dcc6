#include "salbm/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace salbm {

void Dataset::validate() const {
  if (vectors.size() == 0) throw std::invalid_argument("dataset is empty");
  if (!((vectors.array() == 1) || (vectors.array() == -1)).all())
    throw std::invalid_argument("dataset entries must be +1 or -1");
  if (!labels.empty() && static_cast<int>(labels.size()) != count())
    throw std::invalid_argument("label count does not match vector count");
}

double ThreeSpinInstance::energy(const SpinVector& v) const {
  if (v.size() != n_v) throw std::invalid_argument("3-spin energy: dimension mismatch");
  double e = 0.0;
  for (const Triple& t : triples) e -= t.t * v[t.i] * v[t.j] * v[t.k];
  return e;
}

Eigen::VectorXd ThreeSpinInstance::enumerate_energies() const {
  check_enumerable(n_v);
  const std::size_t count = std::size_t{1} << n_v;
  // triples touching each site, for O(degree) Gray-code flips
  std::vector<std::vector<const Triple*>> by_site(n_v);
  for (const Triple& t : triples) {
    by_site[t.i].push_back(&t);
    by_site[t.j].push_back(&t);
    by_site[t.k].push_back(&t);
  }
  Eigen::VectorXd energies(static_cast<Eigen::Index>(count));
  SpinVector v = SpinVector::Constant(n_v, -1);
  double e = energy(v);
  energies[0] = e;
  std::uint32_t gray = 0;
  for (std::size_t i = 1; i < count; ++i) {
    const int k = __builtin_ctzll(i);
    // flipping spin k negates every triple containing it
    double delta = 0.0;
    for (const Triple* t : by_site[k]) delta += 2.0 * t->t * v[t->i] * v[t->j] * v[t->k];
    e += delta;
    v[k] = -v[k];
    gray ^= (1u << k);
    energies[gray] = e;
  }
  return energies;
}

Eigen::MatrixXi sample_exact(const Eigen::VectorXd& probs, int n_spins, int count, RngStream& rng) {
  if (probs.size() != (Eigen::Index{1} << n_spins))
    throw std::invalid_argument("sample_exact: distribution size mismatch");
  Eigen::VectorXd cdf(probs.size());
  double acc = 0.0;
  for (Eigen::Index i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    cdf[i] = acc;
  }
  Eigen::MatrixXi out(n_spins, count);
  for (int d = 0; d < count; ++d) {
    const double u = rng.uniform() * acc;
    const auto it = std::lower_bound(cdf.data(), cdf.data() + cdf.size(), u);
    auto idx = static_cast<std::uint32_t>(std::min<Eigen::Index>(it - cdf.data(), probs.size() - 1));
    out.col(d) = spin_state(idx, n_spins);
  }
  return out;
}

Eigen::VectorXd empirical_distribution(const Eigen::MatrixXi& vectors) {
  const int n = static_cast<int>(vectors.rows());
  check_enumerable(n);
  Eigen::VectorXd p = Eigen::VectorXd::Zero(Eigen::Index{1} << n);
  for (Eigen::Index d = 0; d < vectors.cols(); ++d) {
    std::uint32_t idx = 0;
    for (int i = 0; i < n; ++i)
      if (vectors(i, d) > 0) idx |= (1u << i);
    p[idx] += 1.0;
  }
  p /= static_cast<double>(vectors.cols());
  return p;
}

std::pair<ThreeSpinInstance, Dataset> gen_3spin(int n_v, double zeta, int count, std::uint64_t seed) {
  if (n_v < 3) throw std::invalid_argument("3-spin model needs at least 3 sites");
  if (n_v > 20) throw std::invalid_argument("3-spin generation enumerates 2^n_v; n_v capped at 20");
  if (count < 1) throw std::invalid_argument("dataset size must be positive");

  ThreeSpinInstance inst;
  inst.n_v = n_v;
  inst.zeta = zeta;
  inst.seed = seed;
  RngStream coupling_rng(seed, 0);
  const double std_dev = std::sqrt(3.0) * zeta / n_v;
  for (int i = 0; i < n_v; ++i)
    for (int j = i + 1; j < n_v; ++j)
      for (int k = j + 1; k < n_v; ++k)
        inst.triples.push_back({i, j, k, std_dev * coupling_rng.normal()});

  const Eigen::VectorXd probs = boltzmann_distribution(inst.enumerate_energies(), 1.0);
  RngStream draw_rng(seed, 1);
  Dataset data;
  data.vectors = sample_exact(probs, n_v, count, draw_rng);
  data.generator = "3spin";
  data.seed = seed;
  data.zeta = zeta;
  return {std::move(inst), std::move(data)};
}

ModelParams gen_sk(int n, double zeta, std::uint64_t seed) {
  if (n < 2) throw std::invalid_argument("SK model needs at least 2 sites");
  ModelParams u = ModelParams::zeros(n, 0, Structure::FBM);
  RngStream rng(seed, 0);
  const double std_dev = zeta / std::sqrt(static_cast<double>(n));
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) u.V(i, j) = u.V(j, i) = std_dev * rng.normal();
  return u;
}

ModelParams gen_random_srbm(int n_v, int n_h, double weight_std, std::uint64_t seed) {
  ModelParams u = ModelParams::zeros(n_v, n_h, Structure::SRBM);
  RngStream rng(seed, 0);
  for (int i = 0; i < n_v; ++i)
    for (int j = i + 1; j < n_v; ++j) u.V(i, j) = u.V(j, i) = weight_std * rng.normal();
  for (int i = 0; i < n_v; ++i)
    for (int j = 0; j < n_h; ++j) u.W(i, j) = weight_std * rng.normal();
  return u;
}

Dataset gen_bas(int rows, int cols, bool dedup) {
  if (rows < 1 || cols < 1) throw std::invalid_argument("bas: rows and cols must be positive");
  if (rows > 20 || cols > 20) throw std::invalid_argument("bas: pattern family too large");
  const int n_v = rows * cols;
  const std::size_t bars = std::size_t{1} << rows;
  const std::size_t stripes = std::size_t{1} << cols;

  std::vector<SpinVector> patterns;
  patterns.reserve(bars + stripes);
  for (std::size_t p = 0; p < bars; ++p) {
    SpinVector img(n_v);
    for (int r = 0; r < rows; ++r) {
      const int color = (p >> r) & 1u ? 1 : -1;
      for (int c = 0; c < cols; ++c) img[r * cols + c] = color;
    }
    patterns.push_back(std::move(img));
  }
  for (std::size_t p = 0; p < stripes; ++p) {
    SpinVector img(n_v);
    for (int c = 0; c < cols; ++c) {
      const int color = (p >> c) & 1u ? 1 : -1;
      for (int r = 0; r < rows; ++r) img[r * cols + c] = color;
    }
    patterns.push_back(std::move(img));
  }
  if (dedup) {
    std::vector<SpinVector> unique;
    for (const auto& img : patterns) {
      bool seen = false;
      for (const auto& other : unique)
        if (img == other) {
          seen = true;
          break;
        }
      if (!seen) unique.push_back(img);
    }
    patterns.swap(unique);
  }

  Dataset data;
  data.vectors.resize(n_v, static_cast<Eigen::Index>(patterns.size()));
  for (std::size_t d = 0; d < patterns.size(); ++d)
    data.vectors.col(static_cast<Eigen::Index>(d)) = patterns[d];
  data.generator = "bas";
  return data;
}

std::pair<Dataset, Dataset> split_bas(int rows, int cols, std::uint64_t seed, bool dedup) {
  const Dataset full = gen_bas(rows, cols, dedup);
  const int total = full.count();
  std::vector<int> order(total);
  std::iota(order.begin(), order.end(), 0);
  RngStream rng(seed, 0);
  for (int i = total - 1; i > 0; --i) {
    const int j = static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(i + 1));
    std::swap(order[i], order[j]);
  }
  const int train_count = total / 2;
  Dataset train, test;
  train.vectors.resize(full.dim(), train_count);
  test.vectors.resize(full.dim(), total - train_count);
  for (int d = 0; d < train_count; ++d) train.vectors.col(d) = full.vectors.col(order[d]);
  for (int d = train_count; d < total; ++d)
    test.vectors.col(d - train_count) = full.vectors.col(order[d]);
  train.generator = test.generator = "bas";
  train.seed = test.seed = seed;
  return {std::move(train), std::move(test)};
}

Dataset read_optdigits_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  constexpr int kPixels = 64;
  constexpr int kClasses = 10;
  std::vector<std::array<int, kPixels + 1>> rows;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::array<int, kPixels + 1> row{};
    std::istringstream ss(line);
    std::string cell;
    int field = 0;
    while (std::getline(ss, cell, ',')) {
      if (field > kPixels) break;
      try {
        row[field] = std::stoi(cell);
      } catch (const std::exception&) {
        throw std::runtime_error(path + ":" + std::to_string(line_no) + ": malformed value");
      }
      ++field;
    }
    if (field != kPixels + 1)
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": expected 65 fields");
    for (int p = 0; p < kPixels; ++p)
      if (row[p] < 0 || row[p] > 16)
        throw std::runtime_error(path + ":" + std::to_string(line_no) + ": pixel out of range");
    if (row[kPixels] < 0 || row[kPixels] > 9)
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": class out of range");
    rows.push_back(row);
  }
  if (rows.empty()) throw std::runtime_error(path + ": no rows");

  Dataset data;
  data.vectors.resize(kPixels + kClasses, static_cast<Eigen::Index>(rows.size()));
  data.labels.resize(rows.size());
  for (std::size_t d = 0; d < rows.size(); ++d) {
    const auto col = static_cast<Eigen::Index>(d);
    for (int p = 0; p < kPixels; ++p)
      data.vectors(p, col) = rows[d][p] >= 8 ? 1 : -1;  // four-bit midpoint; ties go up
    const int cls = rows[d][kPixels];
    for (int j = 0; j < kClasses; ++j) data.vectors(kPixels + j, col) = j == cls ? 1 : -1;
    data.labels[d] = cls;
  }
  data.generator = "optdigits";
  return data;
}

std::pair<Dataset, Dataset> ingest_optdigits(const std::string& train_path,
                                             const std::string& test_path) {
  return {read_optdigits_file(train_path), read_optdigits_file(test_path)};
}

void write_dataset(const std::string& path, const Dataset& data, const std::string& extra_header) {
  data.validate();
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "# n_v=" << data.dim() << " count=" << data.count() << " labeled=" << (data.labeled() ? 1 : 0)
      << " generator=" << (data.generator.empty() ? "unknown" : data.generator) << " seed=" << data.seed
      << " zeta=" << data.zeta << "\n";
  if (!extra_header.empty()) out << "# " << extra_header << "\n";
  for (int d = 0; d < data.count(); ++d) {
    for (int i = 0; i < data.dim(); ++i) {
      if (i) out << ",";
      out << data.vectors(i, d);
    }
    if (data.labeled()) out << "," << data.labels[d];
    out << "\n";
  }
}

Dataset read_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  Dataset data;
  bool labeled = false;
  bool header_seen = false;
  std::vector<std::vector<int>> rows;
  std::vector<int> labels;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (!header_seen) {
        std::istringstream ss(line.substr(1));
        std::string tok;
        while (ss >> tok) {
          const auto eq = tok.find('=');
          if (eq == std::string::npos) continue;
          const std::string key = tok.substr(0, eq), val = tok.substr(eq + 1);
          if (key == "labeled") labeled = val == "1";
          else if (key == "generator") data.generator = val;
          else if (key == "seed") data.seed = std::stoull(val);
          else if (key == "zeta") data.zeta = std::stod(val);
        }
        header_seen = true;
      }
      continue;
    }
    std::vector<int> cells;
    std::istringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(std::stoi(cell));
    if (labeled) {
      if (cells.size() < 2) throw std::runtime_error(path + ": labeled row too short");
      labels.push_back(cells.back());
      cells.pop_back();
    }
    if (!rows.empty() && cells.size() != rows.front().size())
      throw std::runtime_error(path + ": ragged rows");
    rows.push_back(std::move(cells));
  }
  if (rows.empty()) throw std::runtime_error(path + ": no data rows");
  data.vectors.resize(static_cast<Eigen::Index>(rows.front().size()), static_cast<Eigen::Index>(rows.size()));
  for (std::size_t d = 0; d < rows.size(); ++d)
    for (std::size_t i = 0; i < rows.front().size(); ++i)
      data.vectors(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)) = rows[d][i];
  data.labels = std::move(labels);
  data.validate();
  return data;
}

nlohmann::json three_spin_to_json(const ThreeSpinInstance& inst) {
  nlohmann::json j;
  j["type"] = "3spin";
  j["n_v"] = inst.n_v;
  j["zeta"] = inst.zeta;
  j["seed"] = inst.seed;
  nlohmann::json triples = nlohmann::json::array();
  for (const auto& t : inst.triples) triples.push_back({t.i, t.j, t.k, t.t});
  j["triples"] = triples;
  return j;
}

ThreeSpinInstance three_spin_from_json(const nlohmann::json& j) {
  if (j.value("type", "") != "3spin") throw std::invalid_argument("not a 3spin instance file");
  ThreeSpinInstance inst;
  inst.n_v = j.at("n_v").get<int>();
  inst.zeta = j.value("zeta", 0.0);
  inst.seed = j.value("seed", std::uint64_t{0});
  for (const auto& t : j.at("triples")) {
    const int a = t.at(0).get<int>(), b = t.at(1).get<int>(), c = t.at(2).get<int>();
    if (!(0 <= a && a < b && b < c && c < inst.n_v))
      throw std::invalid_argument("3spin triple indices must satisfy 0 <= i < j < k < n_v");
    inst.triples.push_back({a, b, c, t.at(3).get<double>()});
  }
  return inst;
}

nlohmann::json sk_to_json(const ModelParams& u, double zeta, std::uint64_t seed) {
  nlohmann::json j;
  j["type"] = "sk";
  j["n"] = u.n_v;
  j["zeta"] = zeta;
  j["seed"] = seed;
  nlohmann::json couplings = nlohmann::json::array();
  for (int i = 0; i < u.n_v; ++i)
    for (int k = i + 1; k < u.n_v; ++k)
      if (u.V(i, k) != 0.0) couplings.push_back({i, k, u.V(i, k)});
  j["couplings"] = couplings;
  return j;
}

ModelParams sk_from_json(const nlohmann::json& j) {
  if (j.value("type", "") != "sk") throw std::invalid_argument("not an SK instance file");
  const int n = j.at("n").get<int>();
  ModelParams u = ModelParams::zeros(n, 0, Structure::FBM);
  for (const auto& e : j.at("couplings")) {
    const int a = e.at(0).get<int>(), b = e.at(1).get<int>();
    if (!(0 <= a && a < b && b < n)) throw std::invalid_argument("SK coupling indices out of range");
    u.V(a, b) = u.V(b, a) = e.at(2).get<double>();
  }
  return u;
}

}  // namespace salbm
