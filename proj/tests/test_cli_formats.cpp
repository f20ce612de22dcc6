// End-to-end checks of the command-line surface: file formats, headers,
// determinism, resume, and exit codes.

#include <doctest.h>

#include "salbm/datasets.hpp"
#include "salbm/model_io.hpp"
#include "salbm/samplers.hpp"
#include "salbm/training.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;
using namespace salbm;

namespace {

#ifndef SALBM_CLI_PATH
#error "SALBM_CLI_PATH must point at the built binary"
#endif
const std::string kCli = SALBM_CLI_PATH;

struct Workdir {
  fs::path dir;
  Workdir() {
    dir = fs::temp_directory_path() / ("salbm_cli_" + std::to_string(::getpid()));
    fs::create_directories(dir);
  }
  ~Workdir() { fs::remove_all(dir); }
  std::string path(const std::string& name) const { return (dir / name).string(); }
};

int run(const std::string& args) {
  const std::string cmd = kCli + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("gen bas writes headed csv files with the expected split") {
  Workdir wd;
  REQUIRE(run("gen bas --rows 7 --cols 6 --seed 1 --out " + wd.path("bas")) == 0);
  const Dataset train = read_dataset(wd.path("bas/bas_train.csv"));
  const Dataset test = read_dataset(wd.path("bas/bas_test.csv"));
  CHECK(train.count() == 96);
  CHECK(test.count() == 96);
  CHECK(train.dim() == 42);
  const std::string text = slurp(wd.path("bas/bas_train.csv"));
  CHECK(text.find("config=") != std::string::npos);
  CHECK(text.find("seed=1") != std::string::npos);
}

TEST_CASE("gen 3spin emits an instance json and matching data csv") {
  Workdir wd;
  REQUIRE(run("gen 3spin --nv 6 --zeta 2 --d 500 --seed 4 --out " + wd.path("ts")) == 0);
  const ThreeSpinInstance inst =
      three_spin_from_json(read_json_file(wd.path("ts/3spin_instance.json")));
  CHECK(inst.n_v == 6);
  CHECK(inst.triples.size() == 20);
  const Dataset data = read_dataset(wd.path("ts/3spin_data.csv"));
  CHECK(data.count() == 500);
  CHECK(data.dim() == 6);
}

TEST_CASE("sample and estimate-beta round trip through files") {
  Workdir wd;
  REQUIRE(run("gen sk --n 8 --zeta 2 --seed 3 --out " + wd.path("sk")) == 0);
  REQUIRE(run("sample --model " + wd.path("sk/sk_instance.json") +
              " --sampler gibbs --beta 1 --iters 60 --chains 3000 --seed 5 --samples-out " +
              wd.path("samples.csv")) == 0);
  const SampleSet set = read_samples(wd.path("samples.csv"));
  CHECK(set.spin_count() == 8);
  CHECK(set.chain_count() == 3000);
  CHECK(set.sampler == "gibbs");

  REQUIRE(run("estimate-beta --model " + wd.path("sk/sk_instance.json") + " --samples " +
              wd.path("samples.csv") + " --method kl --out " + wd.path("est")) == 0);
  const std::string text = slurp(wd.path("est/beta_estimate.csv"));
  CHECK(text.find("method,beta,objective,converged") != std::string::npos);
  CHECK(text.find("kl,") != std::string::npos);
  // gibbs at unit temperature should estimate near 1
  std::istringstream ss(text.substr(text.find("kl,") + 3));
  double beta = 0;
  ss >> beta;
  CHECK(beta > 0.8);
  CHECK(beta < 1.2);
}

TEST_CASE("train runs are reproducible at the file level and resumable") {
  Workdir wd;
  REQUIRE(run("gen 3spin --nv 5 --zeta 2 --d 400 --seed 9 --out " + wd.path("ts")) == 0);
  const std::string data = wd.path("ts/3spin_data.csv");
  const std::string common =
      " --structure srbm --nh 2 --epochs 6 --eta 0.05 --chains 300 --iters 30 --seed 21 ";

  REQUIRE(run("train --data " + data + common + "--out " + wd.path("a")) == 0);
  REQUIRE(run("train --data " + data + common + "--out " + wd.path("b")) == 0);
  CHECK(slurp(wd.path("a/model_final.json")) == slurp(wd.path("b/model_final.json")));

  REQUIRE(run("train --data " + data + common + "--checkpoint-every 3 --out " + wd.path("c")) == 0);
  REQUIRE(run("train --data " + data + common + "--resume " + wd.path("c/checkpoint_000003.json") +
              " --out " + wd.path("d")) == 0);
  CHECK(slurp(wd.path("d/model_final.json")) == slurp(wd.path("a/model_final.json")));
}

TEST_CASE("config file values apply and explicit flags beat them") {
  Workdir wd;
  REQUIRE(run("gen 3spin --nv 5 --zeta 2 --d 300 --seed 2 --out " + wd.path("ts")) == 0);
  {
    std::ofstream cfg(wd.path("cfg.json"));
    cfg << R"({"structure": "rbm", "nh": 2, "epochs": 4, "chains": 200, "iters": 20})";
  }
  REQUIRE(run("train --data " + wd.path("ts/3spin_data.csv") + " --config " + wd.path("cfg.json") +
              " --seed 7 --out " + wd.path("r1")) == 0);
  const auto h1 = read_history(wd.path("r1/history.csv"));
  CHECK(h1.size() == 4);

  REQUIRE(run("train --data " + wd.path("ts/3spin_data.csv") + " --config " + wd.path("cfg.json") +
              " --epochs 2 --seed 7 --out " + wd.path("r2")) == 0);
  const auto h2 = read_history(wd.path("r2/history.csv"));
  CHECK(h2.size() == 2);
}

TEST_CASE("benchmark with zero instances emits a header-only csv") {
  Workdir wd;
  REQUIRE(run("benchmark --suite srbm --instances 0 --chains 100 --iters 10 --out " +
              wd.path("bench")) == 0);
  const std::string text = slurp(wd.path("bench/benchmark_srbm.csv"));
  CHECK(text.find("instance,sampler,sigma_inv_sq,kl,beta_kl,beta_cem,beta_mlpl,seconds") !=
        std::string::npos);
  int data_lines = 0;
  std::istringstream ss(text);
  std::string line;
  while (std::getline(ss, line))
    if (!line.empty() && line[0] != '#' && line.rfind("instance,", 0) != 0) ++data_lines;
  CHECK(data_lines == 0);
}

TEST_CASE("exit codes distinguish config problems from runtime failures") {
  Workdir wd;
  CHECK(run("definitely-not-a-subcommand") == 2);
  CHECK(run("train") == 2);                                        // missing required --data
  CHECK(run("train --data nope.csv --structure bogus") == 2);     // bad enum value
  CHECK(run("sample --model missing.json --samples-out x.csv") == 2);  // unresolvable path
  CHECK(run("eval --task overlap --data missing.csv --out " + wd.path("e")) == 2);
  {
    std::ofstream cfg(wd.path("bad.json"));
    cfg << R"({"not_a_key": 1})";
  }
  CHECK(run("train --data nope.csv --config " + wd.path("bad.json")) == 2);
  {
    std::ofstream cfg(wd.path("broken.json"));
    cfg << "{ not json";
  }
  CHECK(run("train --data nope.csv --config " + wd.path("broken.json")) == 2);

  // a structurally invalid model file is a runtime/validation failure
  {
    std::ofstream m(wd.path("badmodel.json"));
    m << R"({"n_v":2,"n_h":0,"structure":"FBM","V":[0,1,0,0],"W":[],"b":[0,0],"c":[]})";
  }
  CHECK(run("sample --model " + wd.path("badmodel.json") + " --samples-out " + wd.path("x.csv")) ==
        3);
}
