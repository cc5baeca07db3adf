#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "mfg/coupling.hpp"
#include "mfg/grid.hpp"
#include "mfg/hamiltonian.hpp"
#include "mfg/report.hpp"
#include "mfg/wasserstein.hpp"

namespace mfg {

// Per-step integer cell displacements, realizing velocities j * h / dt.
// Ordered for deterministic tie-breaking: smallest |j| first, negative
// before positive.
struct ControlSet {
  int j_max;
  std::vector<std::array<int, 2>> moves;

  static ControlSet make(int dim, int j_max) {
    if (j_max < 0) throw ValidationError("ControlSet: j_max must be >= 0");
    ControlSet cs{j_max, {}};
    if (dim == 1) {
      for (int j = -j_max; j <= j_max; ++j) cs.moves.push_back({j, 0});
    } else {
      for (int j0 = -j_max; j0 <= j_max; ++j0)
        for (int j1 = -j_max; j1 <= j_max; ++j1) cs.moves.push_back({j0, j1});
    }
    std::sort(cs.moves.begin(), cs.moves.end(),
              [](const std::array<int, 2>& a, const std::array<int, 2>& b) {
                int la = std::abs(a[0]) + std::abs(a[1]);
                int lb = std::abs(b[0]) + std::abs(b[1]);
                if (la != lb) return la < lb;
                return a < b;
              });
    return cs;
  }
};

// Grid-exact curve: K+1 cells, consecutive displacements in the control set.
struct Trajectory {
  std::vector<int> cells;                 // K+1 entries
  std::vector<std::array<int, 2>> moves;  // K entries
};

struct FirstOrderProblem {
  TorusGrid grid;
  TimeGrid time;
  HamiltonianSpec spec;
  ConvolutionCoupling coupling_f;
  ConvolutionCoupling coupling_g;
  ControlSet controls;
  ProbabilityVector initial;  // e_0 # theta constraint (m0 or empirical)
  int bank_cap = 0;           // trajectories kept for cross-checks; 0 = off
};

inline Vec move_velocity(const std::array<int, 2>& j, const TorusGrid& g,
                         const TimeGrid& tg) {
  return Vec{j[0] * g.h / tg.dt, j[1] * g.h / tg.dt};
}

// J(gamma) = sum_k dt [L(x_k, v_k) + f(x_k, m(t_k))] + g(x_K, m(T)).
inline double cost_J(const Trajectory& traj, const DensityFlow& m,
                     const FirstOrderProblem& p) {
  const TimeGrid& tg = p.time;
  if (static_cast<int>(traj.cells.size()) != tg.K + 1 ||
      static_cast<int>(traj.moves.size()) != tg.K)
    throw ValidationError("cost_J: trajectory length mismatch");
  double total = 0.0;
  for (int k = 0; k < tg.K; ++k) {
    const auto& mv = traj.moves[k];
    if (std::abs(mv[0]) > p.controls.j_max || std::abs(mv[1]) > p.controls.j_max)
      throw ValidationError("cost_J: displacement outside control set");
    Field fk = eval_f(p.coupling_f, m.slices[k], p.grid);
    total += tg.dt * (lagrangian(p.spec, traj.cells[k],
                                 move_velocity(mv, p.grid, tg)) +
                      fk[traj.cells[k]]);
  }
  Field gT = eval_f(p.coupling_g, m.slices[tg.K], p.grid);
  return total + gT[traj.cells[tg.K]];
}

struct BestResponse {
  std::vector<Field> value;              // (K+1) x cells
  std::vector<std::vector<int>> policy;  // K x cells, move index
  std::vector<Trajectory> paths;         // one per start cell
  int against_n = -1;                    // iteration of the belief used
  bool saturated = false;                // some policy hit |j| = j_max
};

inline int apply_move(int cell, const std::array<int, 2>& j,
                      const TorusGrid& g) {
  int c = g.shift(cell, 0, j[0]);
  if (g.dim == 2) c = g.shift(c, 1, j[1]);
  return c;
}

inline BestResponse bellman_best_response(const DensityFlow& belief,
                                          const FirstOrderProblem& p) {
  if (p.controls.moves.empty())
    throw ValidationError("bellman_best_response: empty control set");
  const TorusGrid& g = p.grid;
  const TimeGrid& tg = p.time;
  const int n = g.cells();
  const int nm = static_cast<int>(p.controls.moves.size());

  // L(x, v) is time-independent; precompute per (cell, move).
  std::vector<double> lcost(static_cast<size_t>(n) * nm);
  std::vector<int> dest(static_cast<size_t>(n) * nm);
  for (int i = 0; i < n; ++i)
    for (int jm = 0; jm < nm; ++jm) {
      const auto& mv = p.controls.moves[jm];
      lcost[i * nm + jm] = lagrangian(p.spec, i, move_velocity(mv, g, tg));
      dest[i * nm + jm] = apply_move(i, mv, g);
    }

  BestResponse br;
  br.value.assign(tg.K + 1, Field(n, 0.0));
  br.policy.assign(tg.K, std::vector<int>(n, 0));
  br.value[tg.K] = eval_f(p.coupling_g, belief.slices[tg.K], g);
  for (int k = tg.K - 1; k >= 0; --k) {
    Field fk = eval_f(p.coupling_f, belief.slices[k], g);
    for (int i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      int arg = 0;
      for (int jm = 0; jm < nm; ++jm) {
        double c = tg.dt * (lcost[i * nm + jm] + fk[i]) +
                   br.value[k + 1][dest[i * nm + jm]];
        if (c < best) {
          best = c;
          arg = jm;
        }
      }
      br.value[k][i] = best;
      br.policy[k][i] = arg;
      const auto& mv = p.controls.moves[arg];
      if (std::abs(mv[0]) == p.controls.j_max ||
          (g.dim == 2 && std::abs(mv[1]) == p.controls.j_max))
        br.saturated = br.saturated || p.controls.j_max > 0;
    }
  }

  br.paths.resize(n);
  for (int x = 0; x < n; ++x) {
    Trajectory t;
    t.cells.resize(tg.K + 1);
    t.moves.resize(tg.K);
    t.cells[0] = x;
    for (int k = 0; k < tg.K; ++k) {
      int jm = br.policy[k][t.cells[k]];
      t.moves[k] = p.controls.moves[jm];
      t.cells[k + 1] = dest[t.cells[k] * nm + jm];
    }
    br.paths[x] = std::move(t);
  }
  return br;
}

struct BankEntry {
  Trajectory traj;
  double weight;  // initial mass carried by the curve
  int iteration;
};

// eta^n via sufficient statistics: the induced density flow and the
// averaged kinetic cost. Exact because J depends on eta only through
// (e_t # eta) and the kinetic term is linear in eta.
struct StrategyState {
  int n = 0;
  DensityFlow belief;      // e_t # eta^n
  double kinetic_avg = 0;  // (1/n) sum_k int L dtheta^k
  std::vector<double> phi_hist, a_hist;
  std::vector<double> du_hist, dm_hist;
  std::vector<BankEntry> bank;
  std::vector<Field> last_value;  // for step-variation logging
  DensityFlow last_theta_flow;
};

inline StrategyState init_strategy_state(const FirstOrderProblem& p,
                                         const ProbabilityVector& belief0) {
  StrategyState s;
  s.belief = DensityFlow::constant(belief0, p.time);
  // The constant belief is realized by the stay-put profile, whose kinetic
  // cost T int L(x, 0) dm is nonzero whenever the drift is.
  double stay = 0.0;
  for (int i = 0; i < p.grid.cells(); ++i)
    stay += belief0.w[i] * lagrangian(p.spec, i, Vec{0.0, 0.0});
  s.kinetic_avg = stay * p.grid.cell_volume() * p.time.T;
  return s;
}

// Pushforward of the initial measure along per-cell optimal curves, plus
// the realized kinetic cost.
inline std::pair<DensityFlow, double> pushforward(const BestResponse& br,
                                                  const FirstOrderProblem& p) {
  const TorusGrid& g = p.grid;
  const TimeGrid& tg = p.time;
  std::vector<std::vector<double>> dens(tg.K + 1,
                                        std::vector<double>(g.cells(), 0.0));
  double kinetic = 0.0;
  const double hvol = g.cell_volume();
  for (int x = 0; x < g.cells(); ++x) {
    double wgt = p.initial.w[x];
    if (wgt == 0.0) continue;
    const Trajectory& t = br.paths[x];
    for (int k = 0; k <= tg.K; ++k) dens[k][t.cells[k]] += wgt;
    for (int k = 0; k < tg.K; ++k)
      kinetic += wgt * hvol * tg.dt *
                 lagrangian(p.spec, t.cells[k],
                            move_velocity(t.moves[k], g, tg));
  }
  DensityFlow flow;
  flow.slices.reserve(tg.K + 1);
  for (auto& d : dens) flow.slices.push_back(ProbabilityVector{std::move(d)});
  return {std::move(flow), kinetic};
}

inline void play_step(StrategyState& s, const BestResponse& br,
                      const FirstOrderProblem& p) {
  if (br.against_n != s.n)
    throw StalenessError("play_step: best response is stale");
  auto [theta_flow, kinetic] = pushforward(br, p);

  if (!s.last_value.empty())
    s.du_hist.push_back(sup_norm_diff(br.value, s.last_value));
  else
    s.du_hist.push_back(0.0);
  if (!s.last_theta_flow.slices.empty()) {
    std::vector<Field> a, b;
    for (const auto& sl : theta_flow.slices) a.push_back(sl.w);
    for (const auto& sl : s.last_theta_flow.slices) b.push_back(sl.w);
    s.dm_hist.push_back(sup_norm_diff(a, b));
  } else {
    s.dm_hist.push_back(0.0);
  }
  s.last_value = br.value;
  s.last_theta_flow = theta_flow;

  if (p.bank_cap > 0) {
    for (int x = 0; x < p.grid.cells(); ++x) {
      if (p.initial.w[x] == 0.0) continue;
      if (static_cast<int>(s.bank.size()) >= p.bank_cap) break;
      s.bank.push_back(BankEntry{br.paths[x],
                                 p.initial.w[x] * p.grid.cell_volume(),
                                 s.n + 1});
    }
  }

  if (s.n == 0) {
    s.belief = std::move(theta_flow);
    s.kinetic_avg = kinetic;
  } else {
    s.belief = running_average(s.belief, theta_flow, s.n);
    s.kinetic_avg += (kinetic - s.kinetic_avg) / (s.n + 1);
  }
  s.n += 1;
}

// Phi(eta^n) = int L d eta + int F(e_t # eta) dt + G(e_T # eta).
inline double phi_eta(const StrategyState& s, const FirstOrderProblem& p) {
  double running = 0.0;
  for (int k = 0; k < p.time.K; ++k)
    running += potential_F(p.coupling_f, s.belief.slices[k]) * p.time.dt;
  return s.kinetic_avg + running +
         potential_F(p.coupling_g, s.belief.slices[p.time.K]);
}

// a^{n+1} = int J d eta^n - min_theta int J d theta, nonnegative by the
// optimality of the best response.
inline double exploitability(const StrategyState& s, const BestResponse& br,
                             const FirstOrderProblem& p) {
  if (br.against_n != s.n)
    throw StalenessError("exploitability: best response is stale");
  const TorusGrid& g = p.grid;
  const TimeGrid& tg = p.time;
  const double hvol = g.cell_volume();
  double current = s.kinetic_avg;
  for (int k = 0; k < tg.K; ++k) {
    Field fk = eval_f(p.coupling_f, s.belief.slices[k], g);
    double sl = 0.0;
    for (int i = 0; i < g.cells(); ++i) sl += fk[i] * s.belief.slices[k].w[i];
    current += tg.dt * sl * hvol;
  }
  {
    Field gT = eval_f(p.coupling_g, s.belief.slices[tg.K], g);
    double sl = 0.0;
    for (int i = 0; i < g.cells(); ++i) sl += gT[i] * s.belief.slices[tg.K].w[i];
    current += sl * hvol;
  }
  double best = 0.0;
  for (int i = 0; i < g.cells(); ++i) best += br.value[0][i] * p.initial.w[i];
  best *= hvol;
  return current - best;
}

struct FirstOrderOptions {
  int n_max = 200;
  double tol_a = 1e-4;
  int sustain = 5;
  std::optional<ProbabilityVector> belief0;  // defaults to p.initial
};

inline PlayReport run_first_order(const FirstOrderProblem& p,
                                  const FirstOrderOptions& opts,
                                  StrategyState* out_state = nullptr) {
  auto t0 = std::chrono::steady_clock::now();
  StrategyState s =
      init_strategy_state(p, opts.belief0 ? *opts.belief0 : p.initial);
  PlayReport rep;
  rep.mode = "first_order";
  int below = 0, hard_below = 0;
  for (int n = 1; n <= opts.n_max; ++n) {
    BestResponse br = bellman_best_response(s.belief, p);
    br.against_n = s.n;
    double a = exploitability(s, br, p);
    play_step(s, br, p);
    s.a_hist.push_back(a);
    s.phi_hist.push_back(phi_eta(s, p));
    below = (n >= 2 && a < opts.tol_a) ? below + 1 : 0;
    hard_below = (n >= 2 && a < 1e-12) ? hard_below + 1 : 0;
    if (below >= opts.sustain || hard_below >= 1) {
      rep.converged = true;
      break;
    }
  }
  rep.iterations = s.n;
  rep.phi = s.phi_hist;
  rep.a = s.a_hist;
  rep.variations.reserve(s.du_hist.size());
  for (size_t i = 0; i < s.du_hist.size(); ++i)
    rep.variations.push_back(StepVariation{s.du_hist[i], 0.0, s.dm_hist[i], 0.0});
  rep.final_belief = s.belief;

  // Equilibrium extraction consistency: the pushforward of the final best
  // response should reproduce the limit belief.
  BestResponse br = bellman_best_response(s.belief, p);
  br.against_n = s.n;
  auto [push, kin] = pushforward(br, p);
  (void)kin;
  rep.eq44_gap = sup_t_d1(push, s.belief, p.grid);
  rep.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  if (out_state) *out_state = std::move(s);
  return rep;
}

}  // namespace mfg
