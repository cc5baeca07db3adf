#pragma once

#include <algorithm>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mfg/config.hpp"
#include "mfg/nplayer.hpp"
#include "mfg/outputs.hpp"
#include "mfg/parabolic.hpp"
#include "mfg/trajectory.hpp"

namespace mfg {

namespace detail {

inline double kernel_lipschitz(const ConvolutionCoupling& c) {
  double lip = 0.0;
  const TorusGrid& g = c.grid;
  for (int i = 0; i < g.cells(); ++i)
    for (int a = 0; a < g.dim; ++a)
      lip = std::max(lip, std::fabs(c.kernel[g.shift(i, a, 1)] - c.kernel[i]) /
                              g.h);
  return lip;
}

}  // namespace detail

struct BuiltProblem {
  TorusGrid grid;
  TimeGrid time;
  HamiltonianSpec spec;
  ConvolutionCoupling coupling_f;
  ConvolutionCoupling coupling_g;
  ProbabilityVector m0;
};

inline BuiltProblem build_problem(const RunConfig& c) {
  TorusGrid g(c.dim, c.points_per_dim);
  TimeGrid tg(c.T, c.K);
  HamiltonianSpec spec = c.drift_coeffs.empty()
                             ? HamiltonianSpec::zero_drift(g)
                             : HamiltonianSpec::with_sine_drift(g, c.drift_coeffs);
  return BuiltProblem{g, tg, spec, c.coupling_f.build(g, "coupling_f"),
                      c.coupling_g.build(g, "coupling_g"),
                      build_initial(c.initial, g)};
}

inline ParabolicProblem build_parabolic(const RunConfig& c) {
  BuiltProblem b = build_problem(c);
  ParabolicProblem p{b.grid,       b.time,
                     b.spec,       b.coupling_f,
                     b.coupling_g, HjbScheme{c.theta_lf, c.cfl_safety},
                     b.m0,         c.m_floor};
  check_cfl(p.scheme, p.grid, p.time);  // fail before any work starts
  return p;
}

// Control radius: enough cells per step to realize the optimal drift
// |v| <= |b| + value-gradient scale, derived from the coupling Lipschitz
// constants, capped at half the grid.
inline int auto_j_max(const BuiltProblem& b) {
  double v_cap = b.spec.b_sup() + b.time.T * detail::kernel_lipschitz(b.coupling_f) +
                 detail::kernel_lipschitz(b.coupling_g) + 1.0;
  int j = static_cast<int>(std::ceil(v_cap * b.time.dt / b.grid.h));
  return std::clamp(j, 1, b.grid.points_per_dim / 2);
}

inline FirstOrderProblem build_first_order(const RunConfig& c) {
  BuiltProblem b = build_problem(c);
  int j_max = c.j_max >= 0 ? c.j_max : auto_j_max(b);
  return FirstOrderProblem{b.grid,
                           b.time,
                           b.spec,
                           b.coupling_f,
                           b.coupling_g,
                           ControlSet::make(b.grid.dim, j_max),
                           b.m0,
                           c.bank_cap};
}

struct RunOutcome {
  int exit_code = 0;  // 0 converged, 2 iteration budget exhausted
  std::vector<PlayReport> reports;
};

inline PlayReport run_one(const RunConfig& c,
                          const std::optional<ProbabilityVector>& belief0) {
  if (c.mode == "parabolic") {
    ParabolicProblem p = build_parabolic(c);
    ParabolicOptions o;
    o.n_max = c.n_max;
    o.tol_a = c.tol_a;
    o.belief_last = c.belief == "last";
    o.belief0 = belief0;
    return run_parabolic(p, o);
  }
  FirstOrderProblem p = build_first_order(c);
  FirstOrderOptions o;
  o.n_max = c.n_max;
  o.tol_a = c.tol_a;
  o.belief0 = belief0;
  return run_first_order(p, o);
}

inline RunOutcome run_from_config(const RunConfig& c,
                                  const std::filesystem::path& out_dir) {
  RunOutcome outcome;
  auto record = [&](const PlayReport& rep, const std::filesystem::path& dir,
                    const TorusGrid& g, const TimeGrid& tg) {
    emit_outputs(dir, rep, g, tg, c.emit_plots);
    outcome.reports.push_back(rep);
    if (!rep.converged) outcome.exit_code = 2;
  };

  if (c.mode == "nplayer") {
    BuiltProblem b = build_problem(c);
    FirstOrderProblem base = build_first_order(c);
    FirstOrderOptions o;
    o.n_max = c.n_max;
    o.tol_a = c.tol_a;
    PlayReport ref = run_first_order(base, o);
    record(ref, out_dir / "reference", b.grid, b.time);

    nlohmann::ordered_json ladder;
    for (int N : c.n_ladder) {
      Placement pl =
          c.placement == "iid" ? Placement::kIid : Placement::kQuantile;
      NPlayerResult r = run_nplayer(base, base.initial, N, pl, c.nplayer_seed, o);
      record(r.report, out_dir / ("N_" + std::to_string(N)), b.grid, b.time);
      ladder.push_back(
          {{"N", N},
           {"d1_initial_gap", r.d1_initial_gap},
           {"distance_to_reference",
            compare_to_mfg(r, ref.final_belief, b.grid)},
           {"converged", r.report.converged}});
    }
    std::filesystem::create_directories(out_dir);
    auto f = open_out(out_dir / "nplayer_summary.json");
    f << ladder.dump(2) << '\n';
    return outcome;
  }

  BuiltProblem b = build_problem(c);
  if (c.seeds.empty()) {
    record(run_one(c, {}), out_dir, b.grid, b.time);
  } else {
    for (unsigned long s : c.seeds)
      record(run_one(c, belief_from_seed(b.grid, s)),
             out_dir / ("seed_" + std::to_string(s)), b.grid, b.time);
  }
  return outcome;
}

}  // namespace mfg
