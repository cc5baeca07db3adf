#pragma once

#include <cmath>
#include <vector>

#include "mfg/parabolic.hpp"
#include "mfg/trajectory.hpp"

namespace mfg {
namespace oracle {

// Exhaustive search over all |controls|^K move sequences per start cell,
// scanned in lexicographic move-index order so ties resolve exactly like
// the DP rollout (strictly-better updates keep the first optimum).
struct EnumeratedResponse {
  Field value0;
  std::vector<Trajectory> paths;
};

inline EnumeratedResponse enumerate_best_response(const DensityFlow& belief,
                                                  const FirstOrderProblem& p) {
  const int nm = static_cast<int>(p.controls.moves.size());
  const int K = p.time.K;
  double total = std::pow(static_cast<double>(nm), K) * p.grid.cells();
  if (total > 5e7)
    throw CapacityError("enumerate_best_response: search space too large");

  std::vector<Field> fk(K);
  for (int k = 0; k < K; ++k)
    fk[k] = eval_f(p.coupling_f, belief.slices[k], p.grid);
  Field gT = eval_f(p.coupling_g, belief.slices[K], p.grid);

  EnumeratedResponse out;
  out.value0.assign(p.grid.cells(), 0.0);
  out.paths.resize(p.grid.cells());
  std::vector<int> seq(K, 0);
  for (int x = 0; x < p.grid.cells(); ++x) {
    double best = std::numeric_limits<double>::infinity();
    Trajectory best_traj;
    std::fill(seq.begin(), seq.end(), 0);
    while (true) {
      Trajectory t;
      t.cells.resize(K + 1);
      t.moves.resize(K);
      t.cells[0] = x;
      double c = 0.0;
      for (int k = 0; k < K; ++k) {
        const auto& mv = p.controls.moves[seq[k]];
        t.moves[k] = mv;
        c += p.time.dt * (lagrangian(p.spec, t.cells[k],
                                     move_velocity(mv, p.grid, p.time)) +
                          fk[k][t.cells[k]]);
        t.cells[k + 1] = apply_move(t.cells[k], mv, p.grid);
      }
      c += gT[t.cells[K]];
      if (c < best) {
        best = c;
        best_traj = t;
      }
      int k = K - 1;
      while (k >= 0 && seq[k] == nm - 1) seq[k--] = 0;
      if (k < 0) break;
      ++seq[k];
    }
    out.value0[x] = best;
    out.paths[x] = std::move(best_traj);
  }
  return out;
}

// sup_p <p,q> - H(x,p) by nested grid search, no use of the conjugate
// formula. Each level re-centers on the best point and shrinks 10x.
inline double grid_search_legendre(const HamiltonianSpec& spec, int cell,
                                   const Vec& q, int levels = 6,
                                   int pts = 21) {
  const int dim = spec.grid.dim;
  double radius = std::sqrt(norm_sq(q, dim)) + spec.b_sup() + 1.0;
  Vec center{0.0, 0.0};
  double best = -std::numeric_limits<double>::infinity();
  for (int lvl = 0; lvl < levels; ++lvl) {
    Vec arg = center;
    for (int i = 0; i < pts; ++i) {
      Vec p{center[0] - radius + 2.0 * radius * i / (pts - 1), 0.0};
      int jmax = dim == 2 ? pts : 1;
      for (int j = 0; j < jmax; ++j) {
        if (dim == 2) p[1] = center[1] - radius + 2.0 * radius * j / (pts - 1);
        double v = dot(p, q, dim) - eval_H(spec, cell, p);
        if (v > best) {
          best = v;
          arg = p;
        }
      }
    }
    center = arg;
    radius /= 10.0;
  }
  return best;
}

// Convolution against a cosine-series kernel via trigonometric moments:
// rho(z) = sum_j c_j cos(2 pi j z) per axis splits into cos/sin sums of m.
// A different computation path than the direct double loop.
inline Field cosine_convolution_oracle(const std::vector<double>& coeffs,
                                       double offset,
                                       const ProbabilityVector& m,
                                       const TorusGrid& g) {
  if (g.dim != 1)
    throw ValidationError("cosine_convolution_oracle: 1D only");
  const int n = g.cells();
  const double hvol = g.cell_volume();
  Field out(n, offset);
  for (size_t j = 0; j < coeffs.size(); ++j) {
    double mc = 0.0, ms = 0.0;
    const double wj = 2.0 * M_PI * j;
    for (int y = 0; y < n; ++y) {
      mc += m.w[y] * std::cos(wj * g.coord(y, 0)) * hvol;
      ms += m.w[y] * std::sin(wj * g.coord(y, 0)) * hvol;
    }
    for (int x = 0; x < n; ++x)
      out[x] += coeffs[j] * (std::cos(wj * g.coord(x, 0)) * mc +
                             std::sin(wj * g.coord(x, 0)) * ms);
  }
  return out;
}

// Independent solver for the coupled backward-forward system: damped
// Picard iteration m <- (1-lambda) m + lambda FP(HJB(m)), no averaging.
struct DampedFixedPointResult {
  DensityFlow m;
  ScalarFlow u;       // backward solve against the final m
  VectorFlow w;       // flux of the final forward solve
  double theta = 0.0;
  int iterations = 0;
  bool converged = false;
  double last_update = 0.0;  // sup_t d1 between successive iterates
};

inline DampedFixedPointResult damped_fixed_point(const ParabolicProblem& p,
                                                 double lambda = 0.5,
                                                 int max_iter = 400,
                                                 double tol = 1e-7) {
  if (!(lambda > 0.0 && lambda <= 1.0))
    throw ValidationError("damped_fixed_point: lambda must be in (0, 1]");
  DampedFixedPointResult res;
  res.m = DensityFlow::constant(p.m0, p.time);
  double theta = std::max(p.scheme.theta_lf, p.spec.b_sup() + 1.0);
  for (int it = 1; it <= max_iter; ++it) {
    ScalarFlow u = solve_hjb_adaptive(res.m, p, theta);
    HjbScheme sc{theta, p.scheme.cfl_safety};
    auto [m_new, w] = solve_fp_forward(u, p.m0, p.spec, p.grid, p.time, sc);
    (void)w;
    DensityFlow mixed = res.m;
    for (size_t k = 0; k < mixed.slices.size(); ++k)
      for (size_t i = 0; i < mixed.slices[k].w.size(); ++i)
        mixed.slices[k].w[i] = (1.0 - lambda) * res.m.slices[k].w[i] +
                               lambda * m_new.slices[k].w[i];
    res.last_update = sup_t_d1(mixed, res.m, p.grid);
    res.m = std::move(mixed);
    res.iterations = it;
    if (res.last_update < tol) {
      res.converged = true;
      break;
    }
  }
  // Finish with one undamped composition so the reported pair (u, m)
  // satisfies the forward stencil exactly; the backward defect then
  // measures only the residual drift of the last Picard update.
  res.u = solve_hjb_adaptive(res.m, p, theta);
  HjbScheme sc{theta, p.scheme.cfl_safety};
  auto [m_fin, w_fin] = solve_fp_forward(res.u, p.m0, p.spec, p.grid, p.time, sc);
  res.m = std::move(m_fin);
  res.w = std::move(w_fin);
  res.theta = theta;
  return res;
}

}  // namespace oracle
}  // namespace mfg
