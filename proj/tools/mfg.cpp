#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <string>

#include <CLI11.hpp>

#include "mfg/config.hpp"
#include "mfg/oracles.hpp"
#include "mfg/outputs.hpp"
#include "mfg/runner.hpp"

namespace fs = std::filesystem;

static int do_run(const std::string& config_path) {
  std::ifstream in(config_path);
  if (!in) {
    std::cerr << "error: cannot read config file: " << config_path << "\n";
    return 1;
  }
  mfg::json j;
  try {
    in >> j;
  } catch (const mfg::json::exception& e) {
    std::cerr << "error: config is not valid JSON: " << e.what() << "\n";
    return 1;
  }
  mfg::RunConfig cfg = mfg::parse_config(j);
  fs::path out = cfg.out_dir;
  if (const char* root = std::getenv("MFG_OUTPUT_ROOT"))
    out = fs::path(root) / out;
  mfg::RunOutcome outcome = mfg::run_from_config(cfg, out);
  for (const auto& rep : outcome.reports)
    std::cout << rep.mode << ": " << (rep.converged ? "converged" : "n_max")
              << " after " << rep.iterations << " iterations (final a = "
              << (rep.a.empty() ? 0.0 : rep.a.back()) << ", "
              << rep.wall_seconds << " s)\n";
  std::cout << "outputs written to " << out.string() << "\n";
  return outcome.exit_code;
}

static int do_compare(const std::string& dir_a, const std::string& dir_b) {
  mfg::CompareReport rep = mfg::compare_runs(dir_a, dir_b);
  std::cout << "sup_t d1 = " << mfg::fmt_double(rep.sup_d1) << " over "
            << rep.slices << " time slices\n";
  return 0;
}

static int do_selftest() {
  using namespace mfg;
  int failures = 0;
  auto check = [&](const std::string& name, bool ok, const std::string& msg) {
    std::cout << (ok ? "PASS" : "FAIL") << "  " << name;
    if (!ok) std::cout << "  (" << msg << ")";
    std::cout << "\n";
    if (!ok) ++failures;
  };

  {  // best response vs exhaustive enumeration on tiny games
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    double worst = 0.0;
    bool paths_match = true;
    for (int trial = 0; trial < 50; ++trial) {
      TorusGrid g(1, 5);
      TimeGrid tg(1.0, 3);
      std::vector<double> coeffs{unif(rng), unif(rng)};
      FirstOrderProblem p{g,
                          tg,
                          HamiltonianSpec::zero_drift(g),
                          ConvolutionCoupling::from_cosine(g, coeffs),
                          ConvolutionCoupling::from_cosine(g, {unif(rng)}),
                          ControlSet::make(1, 1),
                          ProbabilityVector::uniform(g),
                          0};
      std::vector<double> w(g.cells());
      for (auto& v : w) v = 0.1 + unif(rng);
      DensityFlow belief = DensityFlow::constant(
          ProbabilityVector::from_weights(std::move(w), g), tg);
      BestResponse br = bellman_best_response(belief, p);
      auto en = oracle::enumerate_best_response(belief, p);
      for (int x = 0; x < g.cells(); ++x) {
        worst = std::max(worst, std::fabs(br.value[0][x] - en.value0[x]));
        if (br.paths[x].cells != en.paths[x].cells) paths_match = false;
      }
    }
    check("bellman vs enumeration (50 games)", worst <= 1e-12 && paths_match,
          "max value gap " + fmt_double(worst));
  }

  {  // exact circular transport vs LP
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    TorusGrid g(1, 24);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
      std::vector<double> a(g.cells()), b(g.cells());
      for (auto& v : a) v = 0.05 + unif(rng);
      for (auto& v : b) v = 0.05 + unif(rng);
      auto pa = ProbabilityVector::from_weights(std::move(a), g);
      auto pb = ProbabilityVector::from_weights(std::move(b), g);
      worst = std::max(worst, std::fabs(d1_circle_exact(pa, pb, g) -
                                        d1_distance_lp(pa, pb, g)));
    }
    check("circular d1 vs transport LP (100 pairs)", worst <= 1e-9,
          "max gap " + fmt_double(worst));
  }

  {  // closed-form conjugate vs grid search
    std::mt19937 rng(13);
    std::uniform_real_distribution<double> unif(-3.0, 3.0);
    TorusGrid g(1, 8);
    HamiltonianSpec spec = HamiltonianSpec::with_sine_drift(g, {0.7, -0.3});
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
      Vec q{unif(rng), 0.0};
      int cell = trial % g.cells();
      worst = std::max(worst, std::fabs(legendre(spec, cell, q) -
                                        oracle::grid_search_legendre(spec, cell, q)));
    }
    check("legendre closed form vs grid search (100 samples)", worst <= 1e-5,
          "max gap " + fmt_double(worst));
  }

  std::cout << (failures == 0 ? "selftest passed" : "selftest FAILED") << "\n";
  return failures == 0 ? 0 : 1;
}

int main(int argc, char** argv) {
  CLI::App app{"fictitious-play laboratory for torus mean-field games"};
  app.require_subcommand(1);

  std::string config_path, dir_a, dir_b;
  auto* run = app.add_subcommand("run", "execute a configured experiment");
  run->add_option("config", config_path, "JSON config file")->required();
  auto* cmp = app.add_subcommand("compare",
                                 "sup_t d1 between two completed runs");
  cmp->add_option("dirA", dir_a, "first run directory")->required();
  cmp->add_option("dirB", dir_b, "second run directory")->required();
  app.add_subcommand("selftest", "run the brute-force oracle suites");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return do_run(config_path);
    if (cmp->parsed()) return do_compare(dir_a, dir_b);
    return do_selftest();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
