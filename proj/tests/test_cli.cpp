#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace fs = std::filesystem;

namespace {

std::string cli_path() {
  const char* p = std::getenv("MFG_CLI_PATH");
  REQUIRE_MESSAGE(p != nullptr, "MFG_CLI_PATH must point at the cli binary");
  return p;
}

struct CmdResult {
  int exit_code;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Run the cli through the shell, capturing exit code and both streams.
CmdResult run_cli(const std::string& args, const fs::path& output_root) {
  static int counter = 0;
  fs::path dir = fs::temp_directory_path() / "mfg_cli_capture";
  fs::create_directories(dir);
  fs::path out = dir / ("out_" + std::to_string(counter));
  fs::path err = dir / ("err_" + std::to_string(counter));
  ++counter;
  std::string cmd = "MFG_OUTPUT_ROOT='" + output_root.string() + "' '" +
                    cli_path() + "' " + args + " > '" + out.string() +
                    "' 2> '" + err.string() + "'";
  int raw = std::system(cmd.c_str());
  int code = (raw >= 0 && WIFEXITED(raw)) ? WEXITSTATUS(raw) : -1;
  return CmdResult{code, slurp(out), slurp(err)};
}

fs::path fresh_dir(const std::string& name) {
  fs::path d = fs::temp_directory_path() / "mfg_cli_test" / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

fs::path write_config(const fs::path& dir, const std::string& name,
                      const std::string& body) {
  fs::path p = dir / name;
  std::ofstream(p) << body;
  return p;
}

const char* kTrivialConfig = R"({
  "mode": "first_order",
  "grid": { "dim": 1, "points_per_dim": 32 },
  "time": { "T": 1.0, "K": 16 },
  "coupling_f": { "cosine": [0.0], "offset": 0.3 },
  "coupling_g": { "cosine": [0.0], "offset": 0.7 },
  "initial": { "kind": "cosine", "amplitude": 0.5, "mode": 1 },
  "play": { "n_max": 50, "tol_a": 1e-4 },
  "controls": { "j_max": 2 },
  "output": { "directory": "run" }
})";

const char* kSlowConfig = R"({
  "mode": "first_order",
  "grid": { "dim": 1, "points_per_dim": 32 },
  "time": { "T": 1.0, "K": 16 },
  "hamiltonian": { "b": [0.3] },
  "coupling_f": { "cosine": [1.0, 0.5], "monotone": true },
  "coupling_g": { "cosine": [0.5], "monotone": true },
  "initial": { "kind": "cosine", "amplitude": 0.5, "mode": 1 },
  "play": { "n_max": 3, "tol_a": 1e-12 },
  "controls": { "j_max": 3 },
  "output": { "directory": "run" }
})";

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::ifstream in(p);
  REQUIRE_MESSAGE(in.good(), ("missing csv: " + p.string()).c_str());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(cell);
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

TEST_CASE("selftest passes and prints one line per oracle suite") {
  fs::path root = fresh_dir("selftest");
  CmdResult r = run_cli("selftest", root);
  CHECK(r.exit_code == 0);
  CHECK(r.out.find("PASS") != std::string::npos);
  CHECK(r.out.find("FAIL") == std::string::npos);
  CHECK(r.out.find("selftest passed") != std::string::npos);
}

TEST_CASE("run reports bad inputs with exit code 1") {
  fs::path root = fresh_dir("bad_inputs");

  SUBCASE("missing file") {
    CmdResult r = run_cli("run /nonexistent/nowhere.json", root);
    CHECK(r.exit_code == 1);
    CHECK(r.err.find("cannot read config file") != std::string::npos);
  }

  SUBCASE("invalid json") {
    fs::path cfg = write_config(root, "broken.json", "{ not json");
    CmdResult r = run_cli("run '" + cfg.string() + "'", root);
    CHECK(r.exit_code == 1);
    CHECK(r.err.find("not valid JSON") != std::string::npos);
  }

  SUBCASE("missing required field is named in the error") {
    fs::path cfg = write_config(root, "incomplete.json",
                                R"({"mode": "parabolic",
                                    "grid": {"points_per_dim": 16},
                                    "time": {"K": 32},
                                    "coupling_f": {"cosine": [1.0]}})");
    CmdResult r = run_cli("run '" + cfg.string() + "'", root);
    CHECK(r.exit_code == 1);
    CHECK(r.err.find("time.T") != std::string::npos);
  }

  SUBCASE("non-monotone kernel declared monotone") {
    fs::path cfg = write_config(root, "badmono.json",
                                R"({"mode": "first_order",
                                    "grid": {"points_per_dim": 16},
                                    "time": {"T": 1.0, "K": 8},
                                    "coupling_f": {"cosine": [0.0, -1.0],
                                                    "monotone": true}})");
    CmdResult r = run_cli("run '" + cfg.string() + "'", root);
    CHECK(r.exit_code == 1);
    CHECK(r.err.find("monotone") != std::string::npos);
  }
}

TEST_CASE("trivial game runs to convergence with complete outputs") {
  fs::path root = fresh_dir("trivial");
  fs::path cfg = write_config(root, "trivial.json", kTrivialConfig);
  CmdResult r = run_cli("run '" + cfg.string() + "'", root);
  CHECK(r.exit_code == 0);
  CHECK(r.out.find("converged") != std::string::npos);

  fs::path run_dir = root / "run";
  for (const char* name :
       {"iterations.csv", "density_final.csv", "report.json", "phi.svg",
        "a_n.svg", "density.svg"})
    CHECK_MESSAGE(fs::exists(run_dir / name), name);

  nlohmann::json rep;
  std::ifstream(run_dir / "report.json") >> rep;
  CHECK(rep.at("mode") == "first_order");
  CHECK(rep.at("converged") == true);
  int iters = rep.at("iterations").get<int>();
  CHECK(iters == 2);

  auto rows = read_csv(run_dir / "iterations.csv");
  REQUIRE(static_cast<int>(rows.size()) == iters + 1);  // header + one per n
  CHECK(rows[0][0] == "n");
  CHECK(rows[0][2] == "a_n");
  // From the second iteration on, nobody can improve: a_n is numerically 0.
  for (size_t i = 2; i < rows.size(); ++i)
    CHECK(std::fabs(std::stod(rows[i][2])) <= 1e-12);

  // density_final.csv covers every time node of the belief flow.
  auto dens = read_csv(run_dir / "density_final.csv");
  CHECK(dens.size() == 1 + 17 * 32);  // header + (K+1) * cells
}

TEST_CASE("iteration budget exhaustion exits with code 2") {
  fs::path root = fresh_dir("budget");
  fs::path cfg = write_config(root, "slow.json", kSlowConfig);
  CmdResult r = run_cli("run '" + cfg.string() + "'", root);
  CHECK(r.exit_code == 2);
  CHECK(r.out.find("n_max") != std::string::npos);
  // Outputs are still written for post-mortem inspection.
  CHECK(fs::exists(root / "run" / "report.json"));
}

TEST_CASE("repeated runs produce byte-identical artifacts") {
  fs::path root_a = fresh_dir("det_a");
  fs::path root_b = fresh_dir("det_b");
  fs::path cfg_a = write_config(root_a, "cfg.json", kSlowConfig);
  CHECK(run_cli("run '" + cfg_a.string() + "'", root_a).exit_code == 2);
  CHECK(run_cli("run '" + cfg_a.string() + "'", root_b).exit_code == 2);
  for (const char* name : {"iterations.csv", "density_final.csv"}) {
    std::string a = slurp(root_a / "run" / name);
    std::string b = slurp(root_b / "run" / name);
    CHECK(!a.empty());
    CHECK(a == b);
  }
}

TEST_CASE("compare measures the gap between two stored runs") {
  fs::path root = fresh_dir("compare");
  fs::path cfg1 = write_config(root, "t.json", kTrivialConfig);
  fs::path cfg2 = write_config(root, "s.json", kSlowConfig);
  fs::path root2 = fresh_dir("compare2");
  REQUIRE(run_cli("run '" + cfg1.string() + "'", root).exit_code == 0);
  REQUIRE(run_cli("run '" + cfg2.string() + "'", root2).exit_code == 2);

  SUBCASE("a run compared to itself is exactly zero") {
    CmdResult r = run_cli("compare '" + (root / "run").string() + "' '" +
                              (root / "run").string() + "'",
                          root);
    CHECK(r.exit_code == 0);
    CHECK(r.out.find("sup_t d1 = 0") != std::string::npos);
  }

  SUBCASE("different runs on the same grid give a positive distance") {
    CmdResult r = run_cli("compare '" + (root / "run").string() + "' '" +
                              (root2 / "run").string() + "'",
                          root);
    CHECK(r.exit_code == 0);
    double d = std::stod(r.out.substr(r.out.find('=') + 1));
    CHECK(d > 0.0);
  }

  SUBCASE("missing directory is an error") {
    CmdResult r = run_cli("compare '" + (root / "run").string() +
                              "' /nonexistent/run",
                          root);
    CHECK(r.exit_code == 1);
    CHECK(!r.err.empty());
  }
}

TEST_CASE("seeded beliefs fan out into per-seed directories") {
  fs::path root = fresh_dir("seeds");
  std::string cfg_body = R"({
    "mode": "first_order",
    "grid": { "dim": 1, "points_per_dim": 32 },
    "time": { "T": 1.0, "K": 16 },
    "coupling_f": { "cosine": [1.0, 0.5], "monotone": true },
    "coupling_g": { "cosine": [0.5], "monotone": true },
    "initial": { "kind": "cosine" },
    "play": { "n_max": 200, "tol_a": 5e-3, "seeds": [1, 2] },
    "controls": { "j_max": 3 },
    "output": { "directory": "run" }
  })";
  fs::path cfg = write_config(root, "cfg.json", cfg_body);
  CmdResult r = run_cli("run '" + cfg.string() + "'", root);
  CHECK(r.exit_code == 0);
  CHECK(fs::exists(root / "run" / "seed_1" / "report.json"));
  CHECK(fs::exists(root / "run" / "seed_2" / "report.json"));
  // Different seeds perturb the starting belief, not the limit: both runs
  // converge and their final beliefs agree to a couple of cells.
  CmdResult cmp = run_cli("compare '" + (root / "run" / "seed_1").string() +
                              "' '" + (root / "run" / "seed_2").string() + "'",
                          root);
  CHECK(cmp.exit_code == 0);
  double d = std::stod(cmp.out.substr(cmp.out.find('=') + 1));
  CHECK(d <= 2.0 / 32.0);
}
