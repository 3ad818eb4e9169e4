#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cli.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
  int code = 0;
  std::string out;
  std::string err;
};

Run invoke(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  Run r;
  r.code = rdq::cli::run(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

struct Golden {
  const char* file;
  std::vector<std::string> args;
};

// Set RDQ_UPDATE_GOLDENS=1 to rewrite the files from the current build.
const std::vector<Golden>& goldens() {
  static const std::vector<Golden> g = {
      {"excess_all.csv", {"excess", "--all", "--out", "csv"}},
      {"excess_all.json", {"excess", "--all", "--out", "json"}},
      {"excess_layered.csv", {"excess", "--layered", "--out", "csv"}},
      {"match_k1.json", {"match", "--k", "1.0"}},
      {"match_sweep.csv", {"match", "--sweep", "0.05:1.4:28"}},
      {"kl_fft.csv", {"kl-scaling", "--k", "1.0", "--n", "10,20,40", "--method", "fft", "--out", "csv"}},
      {"kl_knn.csv",
       {"kl-scaling", "--n", "10", "--method", "knn", "--samples", "10000", "--seed", "3", "--out", "csv"}},
      {"simulate_z16.json", {"simulate", "--n", "16", "--lattice", "Z", "--k", "1", "--sigma", "1", "--trials",
                             "3000", "--seed", "7"}},
      {"simulate_d4.csv", {"simulate", "--n", "8", "--lattice", "D4", "--trials", "500", "--seed", "2",
                           "--mc-samples", "20000", "--out", "csv"}},
      {"lattices.csv", {"lattices", "--out", "csv"}},
      {"basis_e8.csv", {"lattices", "--basis", "E8"}},
      {"moments_a2.csv", {"moments", "--lattice", "A2,D4", "--samples", "20000", "--seed", "4", "--out", "csv"}},
  };
  return g;
}

}  // namespace

TEST_CASE("subcommand outputs match the golden files byte for byte") {
  const fs::path dir = RDQ_GOLDEN_DIR;
  const bool update = std::getenv("RDQ_UPDATE_GOLDENS") != nullptr;
  for (const auto& g : goldens()) {
    CAPTURE(g.file);
    const auto r = invoke(g.args);
    REQUIRE(r.code == 0);
    if (update) {
      fs::create_directories(dir);
      std::ofstream(dir / g.file, std::ios::binary) << r.out;
      continue;
    }
    REQUIRE(fs::exists(dir / g.file));
    CHECK(r.out == slurp(dir / g.file));
  }
}

TEST_CASE("repeated runs are byte identical regardless of worker count") {
  const std::vector<std::string> args = {"simulate", "--n", "12", "--trials", "800", "--seed", "5"};
  const auto a = invoke(args);
  setenv("RD_THREADS", "1", 1);
  const auto b = invoke(args);
  setenv("RD_THREADS", "3", 1);
  const auto c = invoke(args);
  unsetenv("RD_THREADS");
  CHECK(a.code == 0);
  CHECK(a.out == b.out);
  CHECK(a.out == c.out);
}

TEST_CASE("excess table row for A2") {
  const auto r = invoke({"excess", "--all", "--out", "csv"});
  REQUIRE(r.code == 0);
  std::istringstream in(r.out);
  std::string line;
  bool header = false, found = false;
  while (std::getline(in, line)) {
    if (line.starts_with("#")) continue;
    if (!header) {
      CHECK(line == "lattice,m,volume,mean_sq,var_sq,excess_bits_per_dim");
      header = true;
      continue;
    }
    if (line.starts_with("A2,")) {
      found = true;
      const double v = std::stod(line.substr(line.rfind(',') + 1));
      CHECK(std::abs(v - 0.22686) < 1e-4);
    }
  }
  CHECK(found);
}

TEST_CASE("match reports tiny residuals") {
  const auto r = invoke({"match", "--k", "1.0"});
  REQUIRE(r.code == 0);
  const auto j = nlohmann::json::parse(r.out);
  CHECK(j["k"].get<double>() == 1.0);
  CHECK(j["s"].get<double>() == doctest::Approx(2.7112523599485314));
  CHECK(std::abs(j["residuals"][0].get<double>()) < 1e-9);
  CHECK(std::abs(j["residuals"][1].get<double>()) < 1e-9);
}

TEST_CASE("exit codes") {
  const auto bogus = invoke({"bogus"});
  CHECK(bogus.code == 1);
  CHECK(bogus.err.find("Usage") != std::string::npos);
  CHECK(invoke({}).code == 1);
  CHECK(invoke({"simulate", "--n", "-3"}).code == 1);
  CHECK(invoke({"simulate", "--lattice", "Q7"}).code == 1);
  CHECK(invoke({"simulate", "--n", "10", "--lattice", "D4", "--trials", "10"}).code == 1);

  const auto infeasible = invoke({"match", "--k", "2"});
  CHECK(infeasible.code == 2);
  CHECK(infeasible.err.find("DiscriminantNegative") != std::string::npos);

  const auto sweep = invoke({"match", "--sweep", "1:2:3"});
  CHECK(sweep.code == 2);
  CHECK(sweep.err.find("DiscriminantNegative") != std::string::npos);
  CHECK(sweep.out.find("\n2,nan,nan,nan\n") != std::string::npos);

  CHECK(invoke({"--version"}).code == 0);
}

TEST_CASE("flags override the config file, which overrides defaults") {
  const fs::path cfg = fs::temp_directory_path() / "rdq_test_config.toml";
  std::ofstream(cfg) << "[match]\nk = 0.5\n";
  const auto from_file = invoke({"--config", cfg.string(), "match"});
  REQUIRE(from_file.code == 0);
  CHECK(nlohmann::json::parse(from_file.out)["k"].get<double>() == 0.5);
  const auto flag = invoke({"--config", cfg.string(), "match", "--k", "1.2"});
  REQUIRE(flag.code == 0);
  CHECK(nlohmann::json::parse(flag.out)["k"].get<double>() == 1.2);
  const auto plain = invoke({"match"});
  CHECK(nlohmann::json::parse(plain.out)["k"].get<double>() == 1.0);
  fs::remove(cfg);
}

TEST_CASE("output file option") {
  const fs::path p = fs::temp_directory_path() / "rdq_test_excess.csv";
  const auto r = invoke({"excess", "--layered", "--out", "csv", "--output", p.string()});
  CHECK(r.code == 0);
  CHECK(r.out.empty());
  CHECK(slurp(p) == invoke({"excess", "--layered", "--out", "csv"}).out);
  fs::remove(p);
}
