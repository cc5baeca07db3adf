#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <utility>
#include <vector>

#include "mfg/errors.hpp"

namespace mfg {

// Small fixed-capacity vector for points/gradients on T^d, d <= 2.
using Vec = std::array<double, 2>;

inline double dot(const Vec& a, const Vec& b, int dim) {
  double s = 0.0;
  for (int d = 0; d < dim; ++d) s += a[d] * b[d];
  return s;
}

inline double norm_sq(const Vec& a, int dim) { return dot(a, a, dim); }

inline constexpr double kProbabilityTol = 1e-12;

// Periodic mesh on the unit torus, cell centers at i*h.
struct TorusGrid {
  int dim;
  int points_per_dim;
  double h;

  TorusGrid(int dim_, int points_per_dim_)
      : dim(dim_), points_per_dim(points_per_dim_), h(1.0 / points_per_dim_) {
    if (dim != 1 && dim != 2)
      throw DimensionError("TorusGrid: dim must be 1 or 2");
    if (points_per_dim < 3)
      throw ValidationError("TorusGrid: points_per_dim must be >= 3");
  }

  int cells() const {
    return dim == 1 ? points_per_dim : points_per_dim * points_per_dim;
  }

  double cell_volume() const { return dim == 1 ? h : h * h; }

  int wrap(int i) const {
    int n = points_per_dim;
    return ((i % n) + n) % n;
  }

  int cell_index(int i, int j = 0) const {
    return dim == 1 ? wrap(i) : wrap(i) * points_per_dim + wrap(j);
  }

  int coord_index(int cell, int axis) const {
    if (dim == 1) return cell;
    return axis == 0 ? cell / points_per_dim : cell % points_per_dim;
  }

  double coord(int cell, int axis) const { return coord_index(cell, axis) * h; }

  Vec point(int cell) const {
    Vec x{0.0, 0.0};
    for (int d = 0; d < dim; ++d) x[d] = coord(cell, d);
    return x;
  }

  // Periodic neighbor of `cell`, displaced `by` cells along `axis`.
  int shift(int cell, int axis, int by) const {
    if (dim == 1) return wrap(cell + by);
    int i = cell / points_per_dim, j = cell % points_per_dim;
    if (axis == 0) i = wrap(i + by);
    else j = wrap(j + by);
    return i * points_per_dim + j;
  }

  // Wrapped distance between two coordinates on the unit circle.
  static double circle_dist(double a, double b) {
    double d = std::fabs(a - b);
    d -= std::floor(d);
    return std::min(d, 1.0 - d);
  }

  // Torus-wrapped L1 ground distance between two cells.
  double torus_l1(int a, int b) const {
    double s = 0.0;
    for (int d = 0; d < dim; ++d) s += circle_dist(coord(a, d), coord(b, d));
    return s;
  }

  bool operator==(const TorusGrid& o) const {
    return dim == o.dim && points_per_dim == o.points_per_dim;
  }
  bool operator!=(const TorusGrid& o) const { return !(*this == o); }
};

struct TimeGrid {
  double T;
  int K;
  double dt;

  TimeGrid(double T_, int K_) : T(T_), K(K_), dt(T_ / K_) {
    if (!(T > 0.0)) throw ValidationError("TimeGrid: horizon T must be > 0");
    if (K < 1) throw ValidationError("TimeGrid: steps K must be >= 1");
  }

  double t(int k) const { return k * dt; }

  bool operator==(const TimeGrid& o) const { return T == o.T && K == o.K; }
  bool operator!=(const TimeGrid& o) const { return !(*this == o); }
};

using Field = std::vector<double>;  // one real per grid cell

// Cell-averaged probability density: sum(w) * h^dim == 1.
struct ProbabilityVector {
  std::vector<double> w;

  double mass(const TorusGrid& g) const {
    return std::accumulate(w.begin(), w.end(), 0.0) * g.cell_volume();
  }

  void validate(const TorusGrid& g) const {
    if (static_cast<int>(w.size()) != g.cells())
      throw DimensionError("ProbabilityVector: size does not match grid");
    for (double v : w)
      if (!(v >= -kProbabilityTol) || !std::isfinite(v))
        throw ValidationError("ProbabilityVector: negative or non-finite entry");
    if (std::fabs(mass(g) - 1.0) > kProbabilityTol)
      throw ValidationError("ProbabilityVector: total mass is not 1");
  }

  // Normalizing constructor. This is the only place renormalization happens.
  static ProbabilityVector from_weights(std::vector<double> weights,
                                        const TorusGrid& g) {
    if (static_cast<int>(weights.size()) != g.cells())
      throw DimensionError("ProbabilityVector: size does not match grid");
    double total = 0.0;
    for (double v : weights) {
      if (!std::isfinite(v) || v < -kProbabilityTol)
        throw ValidationError("ProbabilityVector: negative or non-finite entry");
      total += v;
    }
    total *= g.cell_volume();
    if (!(total > 0.0))
      throw ValidationError("ProbabilityVector: zero total mass");
    for (double& v : weights) v /= total;
    ProbabilityVector p{std::move(weights)};
    p.validate(g);
    return p;
  }

  // Adopts already-normalized values without rescaling, so that
  // conservation violations surface in validate() instead of being hidden.
  static ProbabilityVector adopt(std::vector<double> weights,
                                 const TorusGrid& g) {
    ProbabilityVector p{std::move(weights)};
    p.validate(g);
    return p;
  }

  static ProbabilityVector uniform(const TorusGrid& g) {
    return ProbabilityVector{std::vector<double>(g.cells(), 1.0)};
  }

  // Point mass at one cell (density 1/h^dim).
  static ProbabilityVector delta(const TorusGrid& g, int cell) {
    std::vector<double> w(g.cells(), 0.0);
    w[cell] = 1.0 / g.cell_volume();
    return ProbabilityVector{std::move(w)};
  }
};

// K+1 density slices, one per time node.
struct DensityFlow {
  std::vector<ProbabilityVector> slices;

  int steps() const { return static_cast<int>(slices.size()) - 1; }

  void validate(const TorusGrid& g, const TimeGrid& tg) const {
    if (static_cast<int>(slices.size()) != tg.K + 1)
      throw DimensionError("DensityFlow: slice count does not match TimeGrid");
    for (const auto& s : slices) s.validate(g);
  }

  static DensityFlow constant(const ProbabilityVector& m, const TimeGrid& tg) {
    return DensityFlow{std::vector<ProbabilityVector>(tg.K + 1, m)};
  }
};

// Value function u(t, x): (K+1) x cells.
struct ScalarFlow {
  std::vector<Field> values;
};

// Vector field per time node, axis-major within each cell:
// values[k][cell * dim + axis].
struct VectorFlow {
  std::vector<std::vector<double>> values;

  static VectorFlow zeros(const TorusGrid& g, const TimeGrid& tg) {
    return VectorFlow{std::vector<std::vector<double>>(
        tg.K + 1, std::vector<double>(g.cells() * g.dim, 0.0))};
  }
};

// prev_avg is the average of n items; fold in one more.
inline DensityFlow running_average(const DensityFlow& prev_avg,
                                   const DensityFlow& next, int n) {
  if (n < 1) throw ValidationError("running_average: n must be >= 1");
  if (prev_avg.slices.size() != next.slices.size())
    throw DimensionError("running_average: flows have different lengths");
  DensityFlow out = prev_avg;
  const double lambda = 1.0 / (n + 1);
  for (size_t k = 0; k < out.slices.size(); ++k) {
    auto& a = out.slices[k].w;
    const auto& b = next.slices[k].w;
    if (a.size() != b.size())
      throw DimensionError("running_average: slice size mismatch");
    for (size_t i = 0; i < a.size(); ++i) a[i] += (b[i] - a[i]) * lambda;
  }
  return out;
}

inline VectorFlow running_average(const VectorFlow& prev_avg,
                                  const VectorFlow& next, int n) {
  if (n < 1) throw ValidationError("running_average: n must be >= 1");
  if (prev_avg.values.size() != next.values.size())
    throw DimensionError("running_average: flows have different lengths");
  VectorFlow out = prev_avg;
  const double lambda = 1.0 / (n + 1);
  for (size_t k = 0; k < out.values.size(); ++k)
    for (size_t i = 0; i < out.values[k].size(); ++i)
      out.values[k][i] += (next.values[k][i] - out.values[k][i]) * lambda;
  return out;
}

inline double sup_norm_diff(const std::vector<Field>& a,
                            const std::vector<Field>& b) {
  double m = 0.0;
  for (size_t k = 0; k < a.size(); ++k)
    for (size_t i = 0; i < a[k].size(); ++i)
      m = std::max(m, std::fabs(a[k][i] - b[k][i]));
  return m;
}

}  // namespace mfg
