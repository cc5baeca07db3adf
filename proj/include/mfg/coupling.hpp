#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "mfg/grid.hpp"

namespace mfg {

// Smoothing convolution coupling f(x, m) = (rho * m)(x) + offset, with a
// symmetric kernel rho sampled on the grid. The kernel symmetry makes the
// coupling derive from the potential F(m) = <rho * m, m> / 2 + offset.
struct ConvolutionCoupling {
  TorusGrid grid;
  std::vector<double> kernel;  // rho at each cell offset
  double offset = 0.0;
  bool monotone_flag = false;

  // rho(x) = sum_j coeffs[j] * cos(2 pi j x); in dim 2 the product kernel
  // rho(x) * rho(y). Nonnegative coefficients certify monotonicity.
  static ConvolutionCoupling from_cosine(const TorusGrid& g,
                                         const std::vector<double>& coeffs,
                                         double offset = 0.0) {
    auto line = [&](double x) {
      double v = 0.0;
      for (size_t j = 0; j < coeffs.size(); ++j)
        v += coeffs[j] * std::cos(2.0 * M_PI * j * x);
      return v;
    };
    std::vector<double> k(g.cells());
    for (int c = 0; c < g.cells(); ++c) {
      if (g.dim == 1) k[c] = line(g.coord(c, 0));
      else k[c] = line(g.coord(c, 0)) * line(g.coord(c, 1));
    }
    bool mono = true;
    for (double c : coeffs)
      if (c < -kProbabilityTol) mono = false;
    return ConvolutionCoupling{g, std::move(k), offset, mono};
  }

  static ConvolutionCoupling from_samples(const TorusGrid& g,
                                          std::vector<double> samples,
                                          double offset = 0.0) {
    if (static_cast<int>(samples.size()) != g.cells())
      throw DimensionError("ConvolutionCoupling: kernel size mismatch");
    for (int c = 0; c < g.cells(); ++c) {
      int neg = g.dim == 1 ? g.wrap(-c)
                           : g.cell_index(-g.coord_index(c, 0), -g.coord_index(c, 1));
      if (std::fabs(samples[c] - samples[neg]) > 1e-10)
        throw ValidationError("ConvolutionCoupling: kernel is not symmetric");
    }
    ConvolutionCoupling cc{g, std::move(samples), offset, false};
    cc.monotone_flag = cc.fourier_nonnegative();
    return cc;
  }

  // Naive DFT of the kernel; all coefficients >= -tol certifies (9).
  bool fourier_nonnegative(double tol = 1e-9) const {
    if (grid.dim != 1) return false;  // dim-2 samples: certify via cosine form
    const int n = grid.points_per_dim;
    for (int f = 0; f <= n / 2; ++f) {
      double re = 0.0;
      for (int i = 0; i < n; ++i)
        re += kernel[i] * std::cos(2.0 * M_PI * f * i / n);
      if (re < -tol * n) return false;
    }
    return true;
  }

  int offset_index(int x_cell, int y_cell) const {
    if (grid.dim == 1) return grid.wrap(x_cell - y_cell);
    return grid.cell_index(grid.coord_index(x_cell, 0) - grid.coord_index(y_cell, 0),
                           grid.coord_index(x_cell, 1) - grid.coord_index(y_cell, 1));
  }
};

inline Field eval_f(const ConvolutionCoupling& c, const ProbabilityVector& m,
                    const TorusGrid& grid) {
  if (grid != c.grid) throw DimensionError("eval_f: grid mismatch");
  if (static_cast<int>(m.w.size()) != grid.cells())
    throw ValidationError("eval_f: density size mismatch");
  const double hvol = grid.cell_volume();
  Field out(grid.cells(), 0.0);
  for (int i = 0; i < grid.cells(); ++i) {
    double s = 0.0;
    for (int j = 0; j < grid.cells(); ++j)
      s += c.kernel[c.offset_index(i, j)] * m.w[j];
    out[i] = s * hvol + c.offset;
  }
  return out;
}

// Closed-form potential: F(m) = (1/2) int (rho * m) dm + offset.
inline double potential_F(const ConvolutionCoupling& c,
                          const ProbabilityVector& m) {
  const double hvol = c.grid.cell_volume();
  double s = 0.0;
  for (int i = 0; i < c.grid.cells(); ++i) {
    double conv = 0.0;
    for (int j = 0; j < c.grid.cells(); ++j)
      conv += c.kernel[c.offset_index(i, j)] * m.w[j];
    s += conv * m.w[i];
  }
  return 0.5 * s * hvol * hvol + c.offset;
}

using CouplingFn = std::function<Field(const ProbabilityVector&)>;

// Constructive potential F(m) - F(m0) = int_0^1 int f(x, (1-t)m0 + t m)
// d(m - m0)(x) dt, by composite Simpson in t (exact for couplings whose
// integrand is quadratic in t, e.g. the convolution family).
inline double potential_from_coupling(const CouplingFn& f,
                                      const ProbabilityVector& m0,
                                      const ProbabilityVector& m,
                                      const TorusGrid& grid, int quad_nodes) {
  if (quad_nodes < 2)
    throw ValidationError("potential_from_coupling: quad_nodes must be >= 2");
  int panels = quad_nodes % 2 == 0 ? quad_nodes : quad_nodes + 1;
  const double hvol = grid.cell_volume();
  const int n = grid.cells();
  auto integrand = [&](double t) {
    std::vector<double> mix(n);
    for (int i = 0; i < n; ++i) mix[i] = (1.0 - t) * m0.w[i] + t * m.w[i];
    Field fx = f(ProbabilityVector{std::move(mix)});
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += fx[i] * (m.w[i] - m0.w[i]);
    return s * hvol;
  };
  const double dt = 1.0 / panels;
  double total = integrand(0.0) + integrand(1.0);
  for (int i = 1; i < panels; ++i)
    total += (i % 2 == 1 ? 4.0 : 2.0) * integrand(i * dt);
  return total * dt / 3.0;
}

// Symmetry slack of the measure derivative (Prop.-style checker). Estimates
// delta f / delta m differences with two one-cell bump mixtures, which
// cancels the normalization constant; zero by construction when x == y.
inline double check_symmetry(const CouplingFn& f, const ProbabilityVector& m,
                             const TorusGrid& grid, int x_cell, int y_cell,
                             double s = 1e-3) {
  if (x_cell == y_cell) return 0.0;
  auto bump_diff = [&](int at, int bump_a, int bump_b) {
    auto mixed = [&](int bump) {
      std::vector<double> w(m.w);
      const double dv = 1.0 / grid.cell_volume();
      for (auto& v : w) v *= (1.0 - s);
      w[bump] += s * dv;
      return ProbabilityVector{std::move(w)};
    };
    Field fa = f(mixed(bump_a)), fb = f(mixed(bump_b));
    return (fa[at] - fb[at]) / s;
  };
  double dxy = bump_diff(x_cell, y_cell, x_cell);
  double dyx = bump_diff(y_cell, x_cell, y_cell);
  return std::fabs(dxy - dyx);
}

inline double check_symmetry(const ConvolutionCoupling& c,
                             const ProbabilityVector& m, int x_cell,
                             int y_cell) {
  CouplingFn f = [&](const ProbabilityVector& mm) {
    return eval_f(c, mm, c.grid);
  };
  return check_symmetry(f, m, c.grid, x_cell, y_cell);
}

// Monotonicity value int (f(x,m) - f(x,m')) d(m - m')(x); >= 0 under (9).
inline double check_monotone(const CouplingFn& f, const ProbabilityVector& m,
                             const ProbabilityVector& m_prime,
                             const TorusGrid& grid) {
  Field fm = f(m), fmp = f(m_prime);
  const double hvol = grid.cell_volume();
  double s = 0.0;
  for (int i = 0; i < grid.cells(); ++i)
    s += (fm[i] - fmp[i]) * (m.w[i] - m_prime.w[i]);
  return s * hvol;
}

inline double check_monotone(const ConvolutionCoupling& c,
                             const ProbabilityVector& m,
                             const ProbabilityVector& m_prime) {
  CouplingFn f = [&](const ProbabilityVector& mm) {
    return eval_f(c, mm, c.grid);
  };
  return check_monotone(f, m, m_prime, c.grid);
}

}  // namespace mfg
