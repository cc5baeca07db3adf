#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "mfg/grid.hpp"

namespace mfg {

// Exact W1 on the discrete circle: min over a shift c of the L1 norm of the
// shifted CDF difference; the optimum c is the median of the cumulative
// mass differences.
inline double d1_circle_exact(const ProbabilityVector& mu,
                              const ProbabilityVector& nu,
                              const TorusGrid& grid) {
  const int n = grid.points_per_dim;
  std::vector<double> cum(n);
  double run = 0.0;
  for (int i = 0; i < n; ++i) {
    run += (mu.w[i] - nu.w[i]) * grid.h;
    cum[i] = run;
  }
  std::vector<double> sorted = cum;
  std::nth_element(sorted.begin(), sorted.begin() + n / 2, sorted.end());
  const double med = sorted[n / 2];
  double total = 0.0;
  for (double c : cum) total += std::fabs(c - med);
  return total * grid.h;
}

namespace detail {

// Min-cost flow on an explicit residual network: paired arcs, shortest
// augmenting paths by label correcting (all original costs >= 0, so no
// negative cycles ever appear in the residual graph).
struct MinCostFlow {
  struct Arc {
    int to;
    double cap;
    double cost;
    int rev;  // index of the paired reverse arc in graph[to]
  };
  std::vector<std::vector<Arc>> graph;

  explicit MinCostFlow(int nodes) : graph(nodes) {}

  void add_edge(int u, int v, double cap, double cost) {
    graph[u].push_back(Arc{v, cap, cost, static_cast<int>(graph[v].size())});
    graph[v].push_back(
        Arc{u, 0.0, -cost, static_cast<int>(graph[u].size()) - 1});
  }

  // Sends as much flow as possible from s to t; returns total cost.
  double solve(int s, int t, long max_augment) {
    const double INF = std::numeric_limits<double>::infinity();
    const int n = static_cast<int>(graph.size());
    double total = 0.0;
    for (long round = 0; round < max_augment; ++round) {
      std::vector<double> dist(n, INF);
      std::vector<int> prev_node(n, -1), prev_arc(n, -1);
      std::vector<bool> in_queue(n, false);
      std::vector<int> queue{s};
      dist[s] = 0.0;
      in_queue[s] = true;
      for (size_t qi = 0; qi < queue.size(); ++qi) {
        int u = queue[qi];
        in_queue[u] = false;
        for (int ai = 0; ai < static_cast<int>(graph[u].size()); ++ai) {
          const Arc& a = graph[u][ai];
          if (a.cap <= 1e-15) continue;
          if (dist[u] + a.cost < dist[a.to] - 1e-15) {
            dist[a.to] = dist[u] + a.cost;
            prev_node[a.to] = u;
            prev_arc[a.to] = ai;
            if (!in_queue[a.to]) {
              in_queue[a.to] = true;
              queue.push_back(a.to);
            }
          }
        }
      }
      if (dist[t] == INF) return total;
      double amount = INF;
      for (int v = t; v != s; v = prev_node[v])
        amount = std::min(amount, graph[prev_node[v]][prev_arc[v]].cap);
      for (int v = t; v != s; v = prev_node[v]) {
        Arc& a = graph[prev_node[v]][prev_arc[v]];
        a.cap -= amount;
        graph[v][a.rev].cap += amount;
      }
      total += amount * dist[t];
    }
    throw DivergenceError("MinCostFlow: augmentation budget exhausted");
  }
};

}  // namespace detail

// Exact discrete optimal transport with torus-wrapped L1 ground cost, as a
// min-cost flow on the bipartite surplus/deficit graph. Intended as an
// oracle and as the dim-2 path; capped in size.
inline double d1_distance_lp(const ProbabilityVector& mu,
                             const ProbabilityVector& nu,
                             const TorusGrid& grid) {
  mu.validate(grid);
  nu.validate(grid);
  if (grid.cells() > 4096)
    throw CapacityError("d1_distance_lp: grid exceeds 4096 cells");

  const double hvol = grid.cell_volume();
  std::vector<int> src, snk;
  std::vector<double> supply, demand;
  for (int i = 0; i < grid.cells(); ++i) {
    double d = (mu.w[i] - nu.w[i]) * hvol;
    if (d > 1e-15) {
      src.push_back(i);
      supply.push_back(d);
    } else if (d < -1e-15) {
      snk.push_back(i);
      demand.push_back(-d);
    }
  }
  const int S = static_cast<int>(src.size());
  const int Tn = static_cast<int>(snk.size());
  if (S == 0 || Tn == 0) return 0.0;

  // Node layout: 0 super-source, 1..S sources, S+1..S+Tn sinks, last sink.
  detail::MinCostFlow mcf(S + Tn + 2);
  const int super_t = S + Tn + 1;
  for (int s = 0; s < S; ++s) mcf.add_edge(0, 1 + s, supply[s], 0.0);
  for (int t = 0; t < Tn; ++t)
    mcf.add_edge(1 + S + t, super_t, demand[t], 0.0);
  for (int s = 0; s < S; ++s)
    for (int t = 0; t < Tn; ++t)
      mcf.add_edge(1 + s, 1 + S + t, 2.0, grid.torus_l1(src[s], snk[t]));
  return mcf.solve(0, super_t, 64L * (S + Tn) + 256);
}

inline double d1_distance(const ProbabilityVector& mu,
                          const ProbabilityVector& nu, const TorusGrid& grid) {
  mu.validate(grid);
  nu.validate(grid);
  if (mu.w.size() != nu.w.size())
    throw DimensionError("d1_distance: size mismatch");
  if (grid.dim == 1) return d1_circle_exact(mu, nu, grid);
  return d1_distance_lp(mu, nu, grid);
}

inline double sup_t_d1(const DensityFlow& a, const DensityFlow& b,
                       const TorusGrid& grid) {
  if (a.slices.size() != b.slices.size())
    throw ValidationError("sup_t_d1: flows have different lengths");
  double m = 0.0;
  for (size_t k = 0; k < a.slices.size(); ++k)
    m = std::max(m, d1_distance(a.slices[k], b.slices[k], grid));
  return m;
}

}  // namespace mfg
