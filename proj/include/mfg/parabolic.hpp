#pragma once

#include <chrono>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "mfg/coupling.hpp"
#include "mfg/fokker_planck.hpp"
#include "mfg/grid.hpp"
#include "mfg/hamiltonian.hpp"
#include "mfg/hjb.hpp"
#include "mfg/report.hpp"
#include "mfg/wasserstein.hpp"

namespace mfg {

struct ParabolicProblem {
  TorusGrid grid;
  TimeGrid time;
  HamiltonianSpec spec;
  ConvolutionCoupling coupling_f;
  ConvolutionCoupling coupling_g;
  HjbScheme scheme;
  ProbabilityVector m0;
  double m_floor = 1e-10;
};

// Phi(m, w) = int int m H*(x, -w/m) + int F(m(t)) dt + G(m(T)),
// left-endpoint rule in time, ratios floored at m_floor, and the cell term
// set to 0 where both m and |w| are below the floor.
inline double phi_parabolic(const DensityFlow& m, const VectorFlow& w,
                            const ConvolutionCoupling& coupling_f,
                            const ConvolutionCoupling& coupling_g,
                            const HamiltonianSpec& spec, const TorusGrid& g,
                            const TimeGrid& tg, double m_floor) {
  if (m.slices.size() != w.values.size())
    throw DimensionError("phi_parabolic: flow length mismatch");
  const double hvol = g.cell_volume();
  double kinetic = 0.0, running = 0.0;
  for (int k = 0; k < tg.K; ++k) {
    const auto& mk = m.slices[k].w;
    const auto& wk = w.values[k];
    double slice = 0.0;
    for (int i = 0; i < g.cells(); ++i) {
      Vec q{0.0, 0.0};
      double wmax = 0.0;
      for (int a = 0; a < g.dim; ++a) {
        q[a] = wk[i * g.dim + a];
        wmax = std::max(wmax, std::fabs(q[a]));
      }
      if (mk[i] <= m_floor && wmax <= m_floor) continue;
      double md = std::max(mk[i], m_floor);
      for (int a = 0; a < g.dim; ++a) q[a] = -q[a] / md;
      slice += mk[i] * legendre(spec, i, q);
    }
    kinetic += slice * hvol * tg.dt;
    running += potential_F(coupling_f, m.slices[k]) * tg.dt;
  }
  return kinetic + running + potential_F(coupling_g, m.slices[tg.K]);
}

// a_n = int int mbar |wbar/mbar - w/m|^2, ratios floored at m_floor.
inline double a_n_parabolic(const DensityFlow& m_avg, const VectorFlow& w_avg,
                            const DensityFlow& m_new, const VectorFlow& w_new,
                            const TorusGrid& g, const TimeGrid& tg,
                            double m_floor) {
  const double hvol = g.cell_volume();
  double total = 0.0;
  for (int k = 0; k < tg.K; ++k) {
    const auto& ma = m_avg.slices[k].w;
    const auto& mn = m_new.slices[k].w;
    const auto& wa = w_avg.values[k];
    const auto& wn = w_new.values[k];
    double slice = 0.0;
    for (int i = 0; i < g.cells(); ++i) {
      double da = std::max(ma[i], m_floor), dn = std::max(mn[i], m_floor);
      double s = 0.0;
      for (int a = 0; a < g.dim; ++a) {
        double d = wa[i * g.dim + a] / da - wn[i * g.dim + a] / dn;
        s += d * d;
      }
      slice += ma[i] * s;
    }
    total += slice * hvol * tg.dt;
  }
  return total;
}

struct ParabolicState {
  int n = 0;
  DensityFlow belief;       // mbar^n (or last iterate in `last` mode)
  DensityFlow m_avg;        // mbar^n proper
  VectorFlow w_avg;         // wbar^n
  ScalarFlow u_last;
  VectorFlow grad_last;
  DensityFlow m_last;
  VectorFlow w_last;
  double theta = 1.0;       // working Lax-Friedrichs speed
  std::vector<double> phi_hist, a_hist;
  std::vector<StepVariation> var_hist;
  bool belief_is_last = false;
};

inline ParabolicState init_parabolic_state(const ParabolicProblem& p,
                                           const ProbabilityVector& belief0,
                                           bool belief_last = false) {
  ParabolicState s;
  s.belief = DensityFlow::constant(belief0, p.time);
  s.m_avg = s.belief;
  s.w_avg = VectorFlow::zeros(p.grid, p.time);
  s.theta = std::max(p.scheme.theta_lf, p.spec.b_sup() + 1.0);
  s.belief_is_last = belief_last;
  return s;
}

// Backward solve with theta re-validated against the realized gradient;
// bumps theta and re-solves when the estimate was too small.
inline ScalarFlow solve_hjb_adaptive(const DensityFlow& belief,
                                     const ParabolicProblem& p,
                                     double& theta) {
  for (int attempt = 0; attempt < 6; ++attempt) {
    HjbScheme sc{theta, p.scheme.cfl_safety};
    ScalarFlow u = solve_hjb_backward(belief, p.coupling_f, p.coupling_g,
                                      p.spec, p.grid, p.time, sc);
    double speed = lf_speed_estimate(u, p.spec, p.grid);
    if (speed <= theta) return u;
    theta = speed + 1.0;
  }
  throw DivergenceError("solve_hjb_adaptive: theta_lf failed to stabilize");
}

inline void iterate(ParabolicState& s, const ParabolicProblem& p) {
  ScalarFlow u = solve_hjb_adaptive(s.belief, p, s.theta);
  HjbScheme sc{s.theta, p.scheme.cfl_safety};
  auto [m, w] = solve_fp_forward(u, p.m0, p.spec, p.grid, p.time, sc);
  VectorFlow grad = central_gradient(u, p.grid);

  StepVariation var;
  if (s.n >= 1) {
    var.du_inf = sup_norm_diff(u.values, s.u_last.values);
    var.dgrad_inf = sup_norm_diff(grad.values, s.grad_last.values);
    std::vector<Field> mn, mo;
    for (const auto& sl : m.slices) mn.push_back(sl.w);
    for (const auto& sl : s.m_last.slices) mo.push_back(sl.w);
    var.dm_inf = sup_norm_diff(mn, mo);
    var.dw_inf = sup_norm_diff(w.values, s.w_last.values);
  }

  if (s.n == 0) {
    s.m_avg = m;
    s.w_avg = w;
  } else {
    s.m_avg = running_average(s.m_avg, m, s.n);
    s.w_avg = running_average(s.w_avg, w, s.n);
  }
  s.n += 1;
  s.u_last = std::move(u);
  s.grad_last = std::move(grad);
  s.m_last = std::move(m);
  s.w_last = std::move(w);
  s.belief = s.belief_is_last ? s.m_last : s.m_avg;

  s.phi_hist.push_back(phi_parabolic(s.m_avg, s.w_avg, p.coupling_f,
                                     p.coupling_g, p.spec, p.grid, p.time,
                                     p.m_floor));
  s.a_hist.push_back(a_n_parabolic(s.m_avg, s.w_avg, s.m_last, s.w_last,
                                   p.grid, p.time, p.m_floor));
  s.var_hist.push_back(var);
}

// Discrete sup-norm residuals of the coupled system for a candidate pair:
// the HJB stencil applied to u with coupling evaluated at m itself, and the
// FP stencil applied to m with drift from u.
inline std::pair<double, double> mfg_residual(const ScalarFlow& u,
                                              const DensityFlow& m,
                                              const ParabolicProblem& p,
                                              double theta) {
  const TorusGrid& g = p.grid;
  const TimeGrid& tg = p.time;
  const int n = g.cells();
  const double h = g.h, dt = tg.dt;

  double r_hjb = 0.0;
  {
    Field terminal = eval_f(p.coupling_g, m.slices[tg.K], g);
    for (int i = 0; i < n; ++i)
      r_hjb = std::max(r_hjb, std::fabs(u.values[tg.K][i] - terminal[i]));
  }
  for (int k = tg.K - 1; k >= 0; --k) {
    const Field& up = u.values[k + 1];
    Field src = eval_f(p.coupling_f, m.slices[k], g);
    for (int i = 0; i < n; ++i) {
      double lap = 0.0, lf = 0.0;
      Vec pc{0.0, 0.0};
      for (int a = 0; a < g.dim; ++a) {
        double um = up[g.shift(i, a, -1)], upg = up[g.shift(i, a, +1)];
        pc[a] = 0.5 * ((up[i] - um) / h + (upg - up[i]) / h);
        lf += 0.5 * theta * ((upg - up[i]) / h - (up[i] - um) / h);
        lap += (upg - 2.0 * up[i] + um) / (h * h);
      }
      double pred = up[i] + dt * (lap - (eval_H(p.spec, i, pc) - lf) + src[i]);
      r_hjb = std::max(r_hjb, std::fabs(u.values[k][i] - pred) / dt);
    }
  }

  VectorFlow grad = central_gradient(u, g);
  double r_fp = 0.0;
  for (int k = 0; k < tg.K; ++k) {
    const auto& mk = m.slices[k].w;
    const auto& mk1 = m.slices[k + 1].w;
    std::vector<double> wk(n * g.dim);
    for (int i = 0; i < n; ++i) {
      Vec pc{0.0, 0.0};
      for (int a = 0; a < g.dim; ++a) pc[a] = grad.values[k][i * g.dim + a];
      Vec dph = grad_p_H(p.spec, i, pc);
      for (int a = 0; a < g.dim; ++a) wk[i * g.dim + a] = -mk[i] * dph[a];
    }
    for (int i = 0; i < n; ++i) {
      double lap = 0.0, dv = 0.0;
      for (int a = 0; a < g.dim; ++a) {
        lap += (mk[g.shift(i, a, +1)] - 2.0 * mk[i] + mk[g.shift(i, a, -1)]) /
               (h * h);
        dv += (wk[i * g.dim + a] - wk[g.shift(i, a, -1) * g.dim + a]) / h;
      }
      r_fp = std::max(r_fp, std::fabs((mk1[i] - mk[i]) / dt - lap + dv));
    }
  }
  return {r_hjb, r_fp};
}

struct ParabolicOptions {
  int n_max = 200;
  double tol_a = 1e-4;
  int sustain = 5;
  bool belief_last = false;
  bool residual_each = true;
  std::optional<ProbabilityVector> belief0;  // defaults to m0
};

inline PlayReport run_parabolic(const ParabolicProblem& p,
                                const ParabolicOptions& opts) {
  auto t0 = std::chrono::steady_clock::now();
  ParabolicState s = init_parabolic_state(
      p, opts.belief0 ? *opts.belief0 : p.m0, opts.belief_last);
  PlayReport rep;
  rep.mode = "parabolic";
  int below = 0, hard_below = 0;
  for (int n = 1; n <= opts.n_max; ++n) {
    try {
      iterate(s, p);
    } catch (const DivergenceError& e) {
      throw DivergenceError(std::string(e.what()) + " (iteration " +
                            std::to_string(n) + ")");
    }
    if (opts.residual_each) {
      auto [rh, rf] = mfg_residual(s.u_last, s.m_last, p, s.theta);
      rep.res_hjb.push_back(rh);
      rep.res_fp.push_back(rf);
    }
    double a = s.a_hist.back();
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
  rep.variations = s.var_hist;
  rep.final_belief = s.m_avg;
  // Residuals of the realized pair (u^n, m^n): m^n satisfies the forward
  // stencil exactly; the HJB defect measures the remaining belief gap.
  auto [rh, rf] = mfg_residual(s.u_last, s.m_last, p, s.theta);
  rep.final_res_hjb = rh;
  rep.final_res_fp = rf;
  rep.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return rep;
}

}  // namespace mfg
