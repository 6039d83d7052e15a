#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"

#include "bwh/report.hpp"
#include "cli.hpp"

using namespace bwh;
namespace fs = std::filesystem;

namespace {

const fs::path kConfigs = fs::path(BWH_SOURCE_DIR) / "configs";

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("bwh_test_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

struct Run {
  int code = 0;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream o, e;
  Run r;
  r.code = run_cli(args, o, e);
  r.out = o.str();
  r.err = e.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream is(slurp(p));
  std::string line;
  while (std::getline(is, line)) {
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string c;
    while (std::getline(ls, c, ',')) cells.push_back(c);
    rows.push_back(cells);
  }
  return rows;
}

void write(const fs::path& p, const std::string& s) {
  std::ofstream os(p);
  os << s;
}

}  // namespace

TEST_CASE("bands on the free medium follow the parabola") {
  fs::path out = scratch("bands");
  Run r = run({"bands", "--config", (kConfigs / "bands_free.json").string(), "--out", out.string()});
  REQUIRE(r.code == 0);
  auto rows = read_csv(out / "bands.csv");
  REQUIRE(rows.size() > 1);
  CHECK(rows[0] == std::vector<std::string>{"theta_1", "band", "lambda", "config_hash", "seed"});
  int checked = 0;
  for (size_t i = 1; i < rows.size(); ++i) {
    if (rows[i][1] != "0") continue;
    const double t = std::stod(rows[i][0]);
    CHECK(std::abs(std::stod(rows[i][2]) - kFourPi2 * t * t) <= 1e-10);
    ++checked;
  }
  CHECK(checked == 21);
}

TEST_CASE("effective on the free medium returns the identity") {
  fs::path out = scratch("effective");
  write(out / "cfg.json", R"({"medium": ")" + (kConfigs / "media" / "free2d.json").string() +
                              R"(", "cutoff": 3, "theta": [0.1, 0.2]})");
  Run r = run({"effective", "--config", (out / "cfg.json").string(), "--out", out.string()});
  REQUIRE(r.code == 0);
  json j = read_json(out / "effective.json");
  MatR A = mat_from_json(j.at("A_star"));
  CHECK((A - MatR::Identity(2, 2)).cwiseAbs().maxCoeff() <= 1e-8);
  CHECK(j.at("routes").size() == 3);
}

TEST_CASE("oracle slope on the Mathieu supercell") {
  fs::path out = scratch("oracle");
  Run r = run({"oracle", "--config", (kConfigs / "oracle_mathieu.json").string(), "--out", out.string()});
  REQUIRE(r.code == 0);
  json j = read_json(out / "oracle.json");
  const double s = j.at("slope").get<double>();
  CHECK(s >= 1.8);
  CHECK(s <= 2.2);
}

TEST_CASE("outputs embed the config hash and seed and are reproducible") {
  fs::path a = scratch("repro_a"), b = scratch("repro_b");
  const std::string cfg = (kConfigs / "perturb_matrix_2x2.json").string();
  REQUIRE(run({"perturb-matrix", "--config", cfg, "--seed", "42", "--out", a.string()}).code == 0);
  REQUIRE(run({"perturb-matrix", "--config", cfg, "--seed", "42", "--out", b.string(), "--threads", "2"}).code == 0);
  CHECK(slurp(a / "branches.csv") == slurp(b / "branches.csv"));
  CHECK(slurp(a / "branches.json") == slurp(b / "branches.json"));
  json j = read_json(a / "branches.json");
  CHECK(j.at("seed").get<int>() == 42);
  const std::string hash = j.at("config_hash").get<std::string>();
  CHECK(hash.size() == 16);
  auto rows = read_csv(a / "branches.csv");
  for (size_t i = 1; i < rows.size(); ++i) {
    CHECK(rows[i][rows[i].size() - 2] == hash);
    CHECK(rows[i].back() == "42");
  }
  fs::path c = scratch("repro_c");
  REQUIRE(run({"perturb-matrix", "--config", cfg, "--seed", "43", "--out", c.string()}).code == 0);
  CHECK(read_json(c / "branches.json").at("config_hash").get<std::string>() != hash);
}

TEST_CASE("config errors exit with 2 and a JSON error line") {
  fs::path out = scratch("errors");
  Run r = run({"effective", "--config", (out / "missing.json").string(), "--out", out.string()});
  CHECK(r.code == 2);
  json e = json::parse(r.err);
  CHECK(e.at("status") == "error");
  CHECK(e.at("kind") == "config_error");
  CHECK(e.at("exit_code") == 2);

  write(out / "bad.json", R"({"medium": {"dim": 1, "cutoff": 2, "A": {"kind": "bogus", "data": 1}}})");
  CHECK(run({"effective", "--config", (out / "bad.json").string(), "--out", out.string()}).code == 2);
  CHECK(run({"nonsense"}).code == 2);
  CHECK(run({"bands", "--threads", "0"}).code == 2);
}

TEST_CASE("numerical failures exit with 3") {
  fs::path out = scratch("numerical");
  // A non-critical point is requested for the correctors.
  write(out / "cfg.json", R"({"medium": ")" + (kConfigs / "media" / "mathieu1d.json").string() +
                              R"(", "deformation": ")" + (kConfigs / "deform" / "cyclic_sine.json").string() +
                              R"(", "cutoff": 8, "theta": [0.2], "find_critical": false})");
  Run r = run({"perturb", "--config", (out / "cfg.json").string(), "--out", out.string()});
  CHECK(r.code == 3);
  CHECK(json::parse(r.err).at("kind") == "numerical_error");
}

TEST_CASE("the installed executable reports the same exit codes") {
  const char* exe = std::getenv("BWH_EXE");
  if (!exe) return;
  fs::path out = scratch("exe");
  const std::string base = std::string(exe) + " ";
  auto status = [](const std::string& cmd) {
    const int s = std::system((cmd + " > /dev/null 2>&1").c_str());
    return WEXITSTATUS(s);
  };
  CHECK(status(base + "perturb-matrix --config " + (kConfigs / "perturb_matrix_2x2.json").string() + " --out " +
               out.string()) == 0);
  CHECK(status(base + "effective --config " + (out / "nope.json").string()) == 2);
  CHECK(fs::exists(out / "branches.csv"));
  CHECK(fs::exists(out / "config.json"));
}
