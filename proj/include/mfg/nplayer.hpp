#pragma once

#include <algorithm>
#include <random>
#include <vector>

#include "mfg/trajectory.hpp"

namespace mfg {

enum class Placement { kQuantile, kIid };

// N players snapped to grid cells. Quantile placement puts player i at the
// i/(N+1) quantile of m0 (deterministic); iid placement samples from m0.
struct PlayerSet {
  int N;
  std::vector<int> cells;

  ProbabilityVector empirical(const TorusGrid& g) const {
    std::vector<double> w(g.cells(), 0.0);
    for (int c : cells) w[c] += 1.0;
    return ProbabilityVector::from_weights(std::move(w), g);
  }
};

namespace detail {

// Inverse-CDF sample along the flattened cell order.
inline int quantile_cell(const ProbabilityVector& m, const TorusGrid& g,
                         double q) {
  double acc = 0.0;
  const double hvol = g.cell_volume();
  for (int i = 0; i < g.cells(); ++i) {
    acc += m.w[i] * hvol;
    if (acc >= q) return i;
  }
  return g.cells() - 1;
}

}  // namespace detail

inline PlayerSet place_players(const ProbabilityVector& m0, const TorusGrid& g,
                               int N, Placement placement,
                               unsigned long seed = 0) {
  if (N < 1) throw ValidationError("place_players: N must be >= 1");
  m0.validate(g);
  PlayerSet ps{N, {}};
  ps.cells.reserve(N);
  if (placement == Placement::kQuantile) {
    for (int i = 1; i <= N; ++i)
      ps.cells.push_back(
          detail::quantile_cell(m0, g, static_cast<double>(i) / (N + 1)));
  } else {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int i = 0; i < N; ++i)
      ps.cells.push_back(detail::quantile_cell(m0, g, unif(rng)));
  }
  return ps;
}

struct NPlayerResult {
  PlayReport report;
  ProbabilityVector empirical_m0;
  double d1_initial_gap = 0.0;  // d1(empirical m0, target m0)
};

// Symmetric N-player play: every player best-responds to the shared
// empirical belief, so the dynamics coincide with the aggregate loop run
// from the empirical initial measure.
inline NPlayerResult run_nplayer(const FirstOrderProblem& base,
                                 const ProbabilityVector& m0, int N,
                                 Placement placement, unsigned long seed,
                                 const FirstOrderOptions& opts,
                                 StrategyState* out_state = nullptr) {
  PlayerSet ps = place_players(m0, base.grid, N, placement, seed);
  NPlayerResult res{PlayReport{}, ps.empirical(base.grid), 0.0};
  res.d1_initial_gap = d1_distance(res.empirical_m0, m0, base.grid);

  FirstOrderProblem p = base;
  p.initial = res.empirical_m0;
  FirstOrderOptions o = opts;
  if (!o.belief0) o.belief0 = res.empirical_m0;
  res.report = run_first_order(p, o, out_state);
  res.report.mode = "nplayer";
  res.report.d1_initial_gap = res.d1_initial_gap;
  return res;
}

// Distance between the N-player limit belief and a reference aggregate
// belief, measured as sup over time nodes of d1.
inline double compare_to_mfg(const NPlayerResult& n_run,
                             const DensityFlow& reference,
                             const TorusGrid& grid) {
  return sup_t_d1(n_run.report.final_belief, reference, grid);
}

}  // namespace mfg
