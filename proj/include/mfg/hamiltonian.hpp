#pragma once

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "mfg/grid.hpp"

namespace mfg {

// Quadratic-shifted family H(x, p) = |p|^2 / 2 + <b(x), p>.
// D^2_pp H = I, so the quadratic-like bounds hold with C = C_bar = 1 and the
// conjugate is closed-form: H*(x, q) = |q - b(x)|^2 / 2.
struct HamiltonianSpec {
  TorusGrid grid;
  std::vector<double> drift;  // cells * dim, axis-major; b(x) samples
  double c_bar = 1.0;

  static HamiltonianSpec zero_drift(const TorusGrid& g) {
    return HamiltonianSpec{g, std::vector<double>(g.cells() * g.dim, 0.0)};
  }

  // b_a(x) = sum_j coeffs[j] * sin(2 pi (j+1) x_a), smooth and periodic.
  static HamiltonianSpec with_sine_drift(const TorusGrid& g,
                                         const std::vector<double>& coeffs) {
    HamiltonianSpec s = zero_drift(g);
    for (int c = 0; c < g.cells(); ++c)
      for (int a = 0; a < g.dim; ++a) {
        double x = g.coord(c, a), v = 0.0;
        for (size_t j = 0; j < coeffs.size(); ++j)
          v += coeffs[j] * std::sin(2.0 * M_PI * (j + 1) * x);
        s.drift[c * g.dim + a] = v;
      }
    return s;
  }

  Vec b(int cell) const {
    Vec v{0.0, 0.0};
    for (int a = 0; a < grid.dim; ++a) v[a] = drift[cell * grid.dim + a];
    return v;
  }

  double b_sup() const {
    double m = 0.0;
    for (double v : drift) m = std::max(m, std::fabs(v));
    return m;
  }
};

inline double eval_H(const HamiltonianSpec& spec, int cell, const Vec& p) {
  const Vec bx = spec.b(cell);
  return 0.5 * norm_sq(p, spec.grid.dim) + dot(bx, p, spec.grid.dim);
}

inline Vec grad_p_H(const HamiltonianSpec& spec, int cell, const Vec& p) {
  Vec g = spec.b(cell);
  for (int a = 0; a < spec.grid.dim; ++a) g[a] += p[a];
  return g;
}

// Convex conjugate H*(x, q) = sup_p <p,q> - H(x,p) = |q - b(x)|^2 / 2.
inline double legendre(const HamiltonianSpec& spec, int cell, const Vec& q) {
  const Vec bx = spec.b(cell);
  double s = 0.0;
  for (int a = 0; a < spec.grid.dim; ++a) {
    double d = q[a] - bx[a];
    s += d * d;
  }
  return 0.5 * s;
}

// The argmax in the conjugate: the unique p with q = D_p H(x, p).
inline Vec p_hat(const HamiltonianSpec& spec, int cell, const Vec& q) {
  const Vec bx = spec.b(cell);
  Vec p{0.0, 0.0};
  for (int a = 0; a < spec.grid.dim; ++a) p[a] = q[a] - bx[a];
  return p;
}

// H(x,p) + H*(x,q) - <p,q> - |q - D_pH(x,p)|^2 / (2 c_bar).
// Nonnegative for any Hamiltonian in the family (zero identically here).
inline double lemma_slack(const HamiltonianSpec& spec, int cell, const Vec& p,
                          const Vec& q) {
  const int dim = spec.grid.dim;
  double lhs = eval_H(spec, cell, p) + legendre(spec, cell, q) - dot(p, q, dim);
  Vec dp = grad_p_H(spec, cell, p);
  double r = 0.0;
  for (int a = 0; a < dim; ++a) {
    double d = q[a] - dp[a];
    r += d * d;
  }
  return lhs - r / (2.0 * spec.c_bar);
}

// Running control cost L(x, v) = H*(x, -v).
inline double lagrangian(const HamiltonianSpec& spec, int cell, const Vec& v) {
  Vec mv{-v[0], -v[1]};
  return legendre(spec, cell, mv);
}

struct ConvexityReport {
  long samples = 0;
  double min_slack = 0.0;
};

// Monte-Carlo sweep of the strong-convexity inequality.
inline ConvexityReport sweep_convexity(const HamiltonianSpec& spec,
                                       long samples, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> pq(-8.0, 8.0);
  std::uniform_int_distribution<int> cell(0, spec.grid.cells() - 1);
  ConvexityReport rep{samples, std::numeric_limits<double>::infinity()};
  for (long s = 0; s < samples; ++s) {
    Vec p{pq(rng), pq(rng)}, q{pq(rng), pq(rng)};
    rep.min_slack = std::min(rep.min_slack, lemma_slack(spec, cell(rng), p, q));
  }
  return rep;
}

}  // namespace mfg
