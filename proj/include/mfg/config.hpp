#pragma once

#include <optional>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mfg/coupling.hpp"
#include "mfg/errors.hpp"
#include "mfg/grid.hpp"
#include "mfg/hamiltonian.hpp"
#include "mfg/hjb.hpp"

namespace mfg {

using json = nlohmann::json;

namespace detail {

inline const json& require_section(const json& j, const std::string& path) {
  if (!j.contains(path))
    throw ConfigError("config: missing required section '" + path + "'");
  return j.at(path);
}

template <typename T>
T require_field(const json& j, const std::string& section,
                const std::string& key) {
  if (!j.contains(key))
    throw ConfigError("config: missing required field '" + section + "." +
                      key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config: field '" + section + "." + key +
                      "' has the wrong type");
  }
}

template <typename T>
T field_or(const json& j, const std::string& section, const std::string& key,
           T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config: field '" + section + "." + key +
                      "' has the wrong type");
  }
}

}  // namespace detail

struct CouplingConfig {
  std::vector<double> cosine;   // empty means sample-based
  std::vector<double> samples;  // per-cell kernel values
  double offset = 0.0;
  bool require_monotone = false;

  ConvolutionCoupling build(const TorusGrid& g,
                            const std::string& section) const {
    ConvolutionCoupling c =
        !samples.empty() ? ConvolutionCoupling::from_samples(g, samples, offset)
                         : ConvolutionCoupling::from_cosine(g, cosine, offset);
    if (require_monotone && !c.monotone_flag)
      throw ConfigError("config: '" + section +
                        "' declares monotone: true but the kernel has a "
                        "negative Fourier coefficient");
    return c;
  }
};

struct InitialConfig {
  std::string kind = "cosine";  // uniform | cosine | bump
  double amplitude = 0.5;
  int mode = 1;
  double center = 0.5;
  double width = 0.1;
};

struct RunConfig {
  std::string mode;  // parabolic | first_order | nplayer
  int dim = 1;
  int points_per_dim = 0;
  double T = 0.0;
  int K = 0;
  std::vector<double> drift_coeffs;
  CouplingConfig coupling_f, coupling_g;
  InitialConfig initial;

  int n_max = 200;
  double tol_a = 1e-4;
  double m_floor = 1e-10;
  std::string belief = "average";  // average | last
  std::vector<unsigned long> seeds;

  double theta_lf = 1.0;
  double cfl_safety = 0.9;
  int j_max = -1;  // first-order control radius; <0 means auto

  std::vector<int> n_ladder{16, 64, 256};
  std::string placement = "quantile";  // quantile | iid
  unsigned long nplayer_seed = 0;

  std::string out_dir = "out";
  bool emit_plots = true;
  int bank_cap = 0;
};

inline CouplingConfig parse_coupling(const json& j, const std::string& section) {
  CouplingConfig c;
  c.cosine = detail::field_or<std::vector<double>>(j, section, "cosine", {});
  c.samples = detail::field_or<std::vector<double>>(j, section, "samples", {});
  c.offset = detail::field_or<double>(j, section, "offset", 0.0);
  c.require_monotone = detail::field_or<bool>(j, section, "monotone", false);
  if (!c.cosine.empty() && !c.samples.empty())
    throw ConfigError("config: '" + section +
                      "' must give either cosine coefficients or samples, "
                      "not both");
  return c;
}

inline RunConfig parse_config(const json& j) {
  RunConfig c;
  c.mode = detail::require_field<std::string>(j, "", "mode");
  if (c.mode != "parabolic" && c.mode != "first_order" && c.mode != "nplayer")
    throw ConfigError("config: field 'mode' must be one of parabolic, "
                      "first_order, nplayer");

  const json& grid = detail::require_section(j, "grid");
  c.dim = detail::field_or<int>(grid, "grid", "dim", 1);
  c.points_per_dim = detail::require_field<int>(grid, "grid", "points_per_dim");

  const json& time = detail::require_section(j, "time");
  c.T = detail::require_field<double>(time, "time", "T");
  c.K = detail::require_field<int>(time, "time", "K");

  if (j.contains("hamiltonian"))
    c.drift_coeffs = detail::field_or<std::vector<double>>(
        j.at("hamiltonian"), "hamiltonian", "b", {});

  c.coupling_f = parse_coupling(detail::require_section(j, "coupling_f"),
                                "coupling_f");
  if (j.contains("coupling_g"))
    c.coupling_g = parse_coupling(j.at("coupling_g"), "coupling_g");

  if (j.contains("initial")) {
    const json& in = j.at("initial");
    c.initial.kind = detail::field_or<std::string>(in, "initial", "kind",
                                                   "cosine");
    if (c.initial.kind != "uniform" && c.initial.kind != "cosine" &&
        c.initial.kind != "bump")
      throw ConfigError("config: field 'initial.kind' must be one of "
                        "uniform, cosine, bump");
    c.initial.amplitude =
        detail::field_or<double>(in, "initial", "amplitude", 0.5);
    c.initial.mode = detail::field_or<int>(in, "initial", "mode", 1);
    c.initial.center = detail::field_or<double>(in, "initial", "center", 0.5);
    c.initial.width = detail::field_or<double>(in, "initial", "width", 0.1);
  }

  if (j.contains("play")) {
    const json& p = j.at("play");
    c.n_max = detail::field_or<int>(p, "play", "n_max", 200);
    c.tol_a = detail::field_or<double>(p, "play", "tol_a", 1e-4);
    c.m_floor = detail::field_or<double>(p, "play", "m_floor", 1e-10);
    c.belief = detail::field_or<std::string>(p, "play", "belief", "average");
    if (c.belief != "average" && c.belief != "last")
      throw ConfigError(
          "config: field 'play.belief' must be 'average' or 'last'");
    c.seeds =
        detail::field_or<std::vector<unsigned long>>(p, "play", "seeds", {});
  }

  if (j.contains("scheme")) {
    const json& s = j.at("scheme");
    c.theta_lf = detail::field_or<double>(s, "scheme", "theta_lf", 1.0);
    c.cfl_safety = detail::field_or<double>(s, "scheme", "cfl_safety", 0.9);
  }
  if (j.contains("controls"))
    c.j_max = detail::field_or<int>(j.at("controls"), "controls", "j_max", -1);

  if (j.contains("nplayer")) {
    const json& np = j.at("nplayer");
    c.n_ladder = detail::field_or<std::vector<int>>(np, "nplayer", "N",
                                                    {16, 64, 256});
    c.placement =
        detail::field_or<std::string>(np, "nplayer", "placement", "quantile");
    if (c.placement != "quantile" && c.placement != "iid")
      throw ConfigError(
          "config: field 'nplayer.placement' must be 'quantile' or 'iid'");
    c.nplayer_seed =
        detail::field_or<unsigned long>(np, "nplayer", "seed", 0);
  }

  if (j.contains("output")) {
    const json& o = j.at("output");
    c.out_dir = detail::field_or<std::string>(o, "output", "directory", "out");
    c.emit_plots = detail::field_or<bool>(o, "output", "emit_plots", true);
    c.bank_cap = detail::field_or<int>(o, "output", "bank_cap", 0);
  }

  if (c.points_per_dim < 3)
    throw ConfigError("config: field 'grid.points_per_dim' must be >= 3");
  if (!(c.T > 0.0)) throw ConfigError("config: field 'time.T' must be > 0");
  if (c.K < 1) throw ConfigError("config: field 'time.K' must be >= 1");
  if (c.n_max < 1)
    throw ConfigError("config: field 'play.n_max' must be >= 1");
  return c;
}

inline ProbabilityVector build_initial(const InitialConfig& ic,
                                       const TorusGrid& g) {
  std::vector<double> w(g.cells());
  for (int i = 0; i < g.cells(); ++i) {
    double v = 1.0;
    for (int d = 0; d < g.dim; ++d) {
      double x = g.coord(i, d);
      if (ic.kind == "cosine")
        v *= 1.0 + ic.amplitude * std::cos(2.0 * M_PI * ic.mode * x);
      else if (ic.kind == "bump") {
        double r = TorusGrid::circle_dist(x, ic.center);
        v *= std::exp(-0.5 * r * r / (ic.width * ic.width));
      }
    }
    w[i] = v;
  }
  return ProbabilityVector::from_weights(std::move(w), g);
}

// Deterministic seeded initial belief: a smooth random cosine perturbation
// of the uniform density. Same seed, same belief, independent of platform
// (mt19937 is fully specified).
inline ProbabilityVector belief_from_seed(const TorusGrid& g,
                                          unsigned long seed) {
  std::mt19937 rng(static_cast<std::mt19937::result_type>(seed));
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<double> w(g.cells(), 1.0);
  for (int d = 0; d < g.dim; ++d) {
    double amp = 0.2 + 0.6 * unif(rng);
    int mode = 1 + static_cast<int>(unif(rng) * 3.0);
    double phase = unif(rng);
    for (int i = 0; i < g.cells(); ++i)
      w[i] *= 1.0 + amp * std::cos(2.0 * M_PI * (mode * g.coord(i, d) + phase));
  }
  return ProbabilityVector::from_weights(std::move(w), g);
}

}  // namespace mfg
