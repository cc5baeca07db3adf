#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "mfg/grid.hpp"
#include "mfg/hamiltonian.hpp"
#include "mfg/hjb.hpp"

namespace mfg {

// Drift provider: velocity(k) is the transport velocity field at t_k
// (axis-major per cell), i.e. -D_pH(x, grad u(t_k, x)) in the MFG loop.
using VelocityFn = std::function<std::vector<double>(int)>;
using FpSourceFn = std::function<Field(int)>;

// Explicit conservative step for dm/dt - Lap m + div(w) = src with
// w = m * velocity evaluated cell-wise. The divergence is the fixed
// one-sided stencil (w_i - w_{i-e_a}) / h, which keeps the continuity
// residual a linear functional of (m, w): averaged iterates then satisfy
// the same discrete equation exactly. Positivity needs the CFL condition
// plus the cell Peclet bound |velocity| * h <= 1, checked per step.
inline std::pair<DensityFlow, VectorFlow> solve_fp_forward_core(
    const VelocityFn& velocity, const ProbabilityVector& m0,
    const TorusGrid& g, const TimeGrid& tg, const HjbScheme& scheme,
    const FpSourceFn& source = nullptr) {
  check_cfl(scheme, g, tg);
  m0.validate(g);
  const int n = g.cells();
  const double h = g.h, dt = tg.dt;

  std::vector<std::vector<double>> m(tg.K + 1);
  VectorFlow w;
  w.values.assign(tg.K + 1, std::vector<double>(n * g.dim, 0.0));
  m[0] = m0.w;

  for (int k = 0; k < tg.K; ++k) {
    std::vector<double> vel = velocity(k);
    auto& wk = w.values[k];
    for (int i = 0; i < n; ++i)
      for (int a = 0; a < g.dim; ++a) {
        double v = vel[i * g.dim + a];
        if (std::fabs(v) * h > 1.0)
          throw SchemeError("solve_fp_forward: cell Peclet bound exceeded");
        wk[i * g.dim + a] = m[k][i] * v;
      }
    m[k + 1].assign(n, 0.0);
    Field src;
    if (source) src = source(k);
    for (int i = 0; i < n; ++i) {
      double lap = 0.0, dv = 0.0;
      for (int a = 0; a < g.dim; ++a) {
        lap += (m[k][g.shift(i, a, +1)] - 2.0 * m[k][i] +
                m[k][g.shift(i, a, -1)]) / (h * h);
        dv += (wk[i * g.dim + a] - wk[g.shift(i, a, -1) * g.dim + a]) / h;
      }
      m[k + 1][i] = m[k][i] + dt * (lap - dv + (source ? src[i] : 0.0));
      if (!std::isfinite(m[k + 1][i]))
        throw DivergenceError("solve_fp_forward: non-finite density at step " +
                              std::to_string(k));
      if (!source && m[k + 1][i] < -1e-13)
        throw SchemeError("solve_fp_forward: negativity beyond tolerance");
    }
  }

  // Flux at the final node, for the residual of the last stored slice pair.
  std::vector<double> velK = velocity(tg.K);
  for (int i = 0; i < n; ++i)
    for (int a = 0; a < g.dim; ++a)
      w.values[tg.K][i * g.dim + a] = m[tg.K][i] * velK[i * g.dim + a];

  DensityFlow flow;
  flow.slices.reserve(tg.K + 1);
  for (auto& slice : m)
    flow.slices.push_back(ProbabilityVector{std::move(slice)});
  return {std::move(flow), std::move(w)};
}

// MFG forward solve against a fixed value function: drift -D_pH(x, grad u),
// flux w = -m D_pH(x, grad u) cell-exact.
inline std::pair<DensityFlow, VectorFlow> solve_fp_forward(
    const ScalarFlow& u, const ProbabilityVector& m0,
    const HamiltonianSpec& spec, const TorusGrid& g, const TimeGrid& tg,
    const HjbScheme& scheme) {
  VectorFlow grad = central_gradient(u, g);
  VelocityFn vel = [&](int k) {
    std::vector<double> v(g.cells() * g.dim);
    for (int i = 0; i < g.cells(); ++i) {
      Vec p{0.0, 0.0};
      for (int a = 0; a < g.dim; ++a) p[a] = grad.values[k][i * g.dim + a];
      Vec dph = grad_p_H(spec, i, p);
      for (int a = 0; a < g.dim; ++a) v[i * g.dim + a] = -dph[a];
    }
    return v;
  };
  return solve_fp_forward_core(vel, m0, g, tg, scheme);
}

// Max interior residual of dm/dt - Lap m + div(w) = 0 with the solver's own
// stencils. Linear in (m, w), so averages of solver outputs satisfy it too.
inline double continuity_residual(const DensityFlow& m, const VectorFlow& w,
                                  const TorusGrid& g, const TimeGrid& tg) {
  if (m.slices.size() != w.values.size() ||
      static_cast<int>(m.slices.size()) != tg.K + 1)
    throw DimensionError("continuity_residual: shape mismatch");
  const int n = g.cells();
  const double h = g.h, dt = tg.dt;
  double worst = 0.0;
  for (int k = 0; k < tg.K; ++k) {
    const auto& mk = m.slices[k].w;
    const auto& mk1 = m.slices[k + 1].w;
    const auto& wk = w.values[k];
    for (int i = 0; i < n; ++i) {
      double lap = 0.0, dv = 0.0;
      for (int a = 0; a < g.dim; ++a) {
        lap += (mk[g.shift(i, a, +1)] - 2.0 * mk[i] + mk[g.shift(i, a, -1)]) /
               (h * h);
        dv += (wk[i * g.dim + a] - wk[g.shift(i, a, -1) * g.dim + a]) / h;
      }
      worst = std::max(worst, std::fabs((mk1[i] - mk[i]) / dt - lap + dv));
    }
  }
  return worst;
}

// Per-slice max density (sup-norm track of Prop-A-style bounds).
inline std::vector<double> linf_track(const DensityFlow& m) {
  std::vector<double> out;
  out.reserve(m.slices.size());
  for (const auto& s : m.slices) {
    double mx = 0.0;
    for (double v : s.w) mx = std::max(mx, v);
    out.push_back(mx);
  }
  return out;
}

}  // namespace mfg
