#pragma once

#include <cmath>
#include <functional>
#include <sstream>
#include <vector>

#include "mfg/coupling.hpp"
#include "mfg/grid.hpp"
#include "mfg/hamiltonian.hpp"

namespace mfg {

struct HjbScheme {
  double theta_lf = 1.0;   // Lax-Friedrichs viscosity, >= sup |D_p H|
  double cfl_safety = 0.5;  // in (0, 1]
};

inline double cfl_max_dt(const HjbScheme& s, const TorusGrid& g, double sigma = 1.0) {
  return s.cfl_safety * g.h * g.h /
         (2.0 * g.dim * sigma + s.theta_lf * g.h * g.dim);
}

inline void check_cfl(const HjbScheme& s, const TorusGrid& g,
                      const TimeGrid& tg, double sigma = 1.0) {
  double max_dt = cfl_max_dt(s, g, sigma);
  if (tg.dt > max_dt * (1.0 + 1e-12)) {
    std::ostringstream msg;
    msg << "CFL violation: dt = " << tg.dt << " but the scheme requires dt <= "
        << max_dt << " (K >= " << static_cast<int>(std::ceil(tg.T / max_dt))
        << ")";
    throw ConfigError(msg.str());
  }
}

// Per-slice source provider: source(k) is the right-hand side field at t_k.
using SourceFn = std::function<Field(int)>;

// Explicit backward scheme for -du/dt - Lap u + H_hat(x, D-u, D+u) = src,
// u(T) = terminal. H_hat is the Lax-Friedrichs numerical Hamiltonian
// H(x, (D- + D+)/2) - (theta/2) sum_a (D+_a - D-_a); monotone under the CFL
// condition when theta_lf >= sup |D_p H|.
inline ScalarFlow solve_hjb_backward_core(const SourceFn& source,
                                          const Field& terminal,
                                          const HamiltonianSpec& spec,
                                          const TorusGrid& g,
                                          const TimeGrid& tg,
                                          const HjbScheme& scheme) {
  check_cfl(scheme, g, tg);
  const int n = g.cells();
  const double h = g.h, dt = tg.dt, th = scheme.theta_lf;
  ScalarFlow u;
  u.values.assign(tg.K + 1, Field(n, 0.0));
  u.values[tg.K] = terminal;
  for (int k = tg.K - 1; k >= 0; --k) {
    const Field& up = u.values[k + 1];
    Field src = source(k);
    Field& uk = u.values[k];
    for (int i = 0; i < n; ++i) {
      double lap = 0.0, lf = 0.0;
      Vec pc{0.0, 0.0};
      for (int a = 0; a < g.dim; ++a) {
        double um = up[g.shift(i, a, -1)], upg = up[g.shift(i, a, +1)];
        double dminus = (up[i] - um) / h, dplus = (upg - up[i]) / h;
        pc[a] = 0.5 * (dminus + dplus);
        lf += 0.5 * th * (dplus - dminus);
        lap += (upg - 2.0 * up[i] + um) / (h * h);
      }
      double ham = eval_H(spec, i, pc) - lf;
      uk[i] = up[i] + dt * (lap - ham + src[i]);
      if (!std::isfinite(uk[i]))
        throw DivergenceError("solve_hjb_backward: non-finite value at step " +
                              std::to_string(k));
    }
  }
  return u;
}

inline ScalarFlow solve_hjb_backward(const DensityFlow& belief,
                                     const ConvolutionCoupling& coupling_f,
                                     const ConvolutionCoupling& coupling_g,
                                     const HamiltonianSpec& spec,
                                     const TorusGrid& g, const TimeGrid& tg,
                                     const HjbScheme& scheme) {
  belief.validate(g, tg);
  SourceFn src = [&](int k) { return eval_f(coupling_f, belief.slices[k], g); };
  Field terminal = eval_f(coupling_g, belief.slices[tg.K], g);
  return solve_hjb_backward_core(src, terminal, spec, g, tg, scheme);
}

// Centered periodic gradient (D- + D+)/2; the same stencil feeds the
// Fokker-Planck drift so that w = -m D_pH(x, grad u) holds cell-exactly.
inline VectorFlow central_gradient(const ScalarFlow& u, const TorusGrid& g) {
  VectorFlow out;
  out.values.assign(u.values.size(), std::vector<double>(g.cells() * g.dim));
  for (size_t k = 0; k < u.values.size(); ++k) {
    const Field& uk = u.values[k];
    for (int i = 0; i < g.cells(); ++i)
      for (int a = 0; a < g.dim; ++a)
        out.values[k][i * g.dim + a] =
            (uk[g.shift(i, a, +1)] - uk[g.shift(i, a, -1)]) / (2.0 * g.h);
  }
  return out;
}

// Largest |grad u| + |b| seen over the flow; used to re-validate theta_lf.
inline double lf_speed_estimate(const ScalarFlow& u, const HamiltonianSpec& spec,
                                const TorusGrid& g) {
  VectorFlow gr = central_gradient(u, g);
  double m = 0.0;
  for (const auto& slice : gr.values)
    for (double v : slice) m = std::max(m, std::fabs(v));
  return m + spec.b_sup();
}

}  // namespace mfg
