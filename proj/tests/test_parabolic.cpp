#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "mfg/fokker_planck.hpp"
#include "mfg/oracles.hpp"
#include "mfg/parabolic.hpp"
#include "mfg/wasserstein.hpp"

using namespace mfg;

namespace {

ProbabilityVector cosine_initial(const TorusGrid& g, double amp = 0.5) {
  std::vector<double> w(g.cells());
  for (int i = 0; i < g.cells(); ++i) {
    double v = 1.0;
    for (int a = 0; a < g.dim; ++a)
      v *= 1.0 + amp * std::cos(2.0 * M_PI * g.coord(i, a));
    w[i] = v;
  }
  return ProbabilityVector::from_weights(std::move(w), g);
}

// Number of time steps with CFL headroom up to `theta_room`.
int pick_K(const TorusGrid& g, double T, double theta_room) {
  HjbScheme tight{theta_room, 0.9};
  return static_cast<int>(std::ceil(T / cfl_max_dt(tight, g))) + 1;
}

ParabolicProblem make_problem(int nx, double T,
                              const std::vector<double>& f_kernel,
                              const std::vector<double>& g_kernel,
                              const std::vector<double>& drift,
                              double theta_room = 6.0) {
  TorusGrid g(1, nx);
  TimeGrid tg(T, pick_K(g, T, theta_room));
  HamiltonianSpec spec = drift.empty()
                             ? HamiltonianSpec::zero_drift(g)
                             : HamiltonianSpec::with_sine_drift(g, drift);
  return ParabolicProblem{g,
                          tg,
                          spec,
                          ConvolutionCoupling::from_cosine(g, f_kernel),
                          ConvolutionCoupling::from_cosine(g, g_kernel),
                          HjbScheme{1.0, 0.9},
                          cosine_initial(g),
                          1e-10};
}

}  // namespace

TEST_CASE("potential of trivial flows") {
  TorusGrid g(1, 16);
  TimeGrid tg(0.5, 40);
  HamiltonianSpec spec = HamiltonianSpec::zero_drift(g);
  ConvolutionCoupling zero = ConvolutionCoupling::from_cosine(g, {0.0});
  DensityFlow m = DensityFlow::constant(ProbabilityVector::uniform(g), tg);
  VectorFlow w = VectorFlow::zeros(g, tg);

  SUBCASE("all-zero data gives zero") {
    CHECK(phi_parabolic(m, w, zero, zero, spec, g, tg, 1e-10) == 0.0);
  }

  SUBCASE("uniform density with constant flux gives T/2 |w0|^2") {
    const double w0 = 0.7;
    for (auto& slice : w.values)
      for (double& v : slice) v = w0;
    double phi = phi_parabolic(m, w, zero, zero, spec, g, tg, 1e-10);
    CHECK(phi == doctest::Approx(tg.T * 0.5 * w0 * w0).epsilon(1e-12));
  }

  SUBCASE("constant couplings add their offsets") {
    ConvolutionCoupling cf = ConvolutionCoupling::from_cosine(g, {0.0}, 2.0);
    ConvolutionCoupling cg = ConvolutionCoupling::from_cosine(g, {0.0}, 0.5);
    // F(m) = offset for any probability density; left-endpoint rule in time.
    double phi = phi_parabolic(m, w, cf, cg, spec, g, tg, 1e-10);
    CHECK(phi == doctest::Approx(tg.T * 2.0 + 0.5).epsilon(1e-12));
  }
}

TEST_CASE("potential equals the control-form cost of a solver pair") {
  ParabolicProblem p =
      make_problem(24, 0.3, {1.0, 0.5}, {0.5, 0.25}, {0.4, -0.2});
  ParabolicState s = init_parabolic_state(p, p.m0);
  iterate(s, p);

  double phi =
      phi_parabolic(s.m_last, s.w_last, p.coupling_f, p.coupling_g, p.spec,
                    p.grid, p.time, p.m_floor);

  // Independent tally: velocity from the realized value function, Lagrangian
  // L(x, v) = H*(x, -v), plus the running and terminal potentials.
  VectorFlow grad = central_gradient(s.u_last, p.grid);
  const double hvol = p.grid.cell_volume();
  double cost = 0.0;
  for (int k = 0; k < p.time.K; ++k) {
    double slice = 0.0;
    for (int i = 0; i < p.grid.cells(); ++i) {
      Vec gr{0.0, 0.0};
      for (int a = 0; a < p.grid.dim; ++a)
        gr[a] = grad.values[k][i * p.grid.dim + a];
      Vec v = grad_p_H(p.spec, i, gr);
      for (int a = 0; a < p.grid.dim; ++a) v[a] = -v[a];
      slice += s.m_last.slices[k].w[i] * lagrangian(p.spec, i, v);
    }
    cost += slice * hvol * p.time.dt;
    cost += potential_F(p.coupling_f, s.m_last.slices[k]) * p.time.dt;
  }
  cost += potential_F(p.coupling_g, s.m_last.slices[p.time.K]);
  CHECK(phi == doctest::Approx(cost).epsilon(1e-10));
}

TEST_CASE("a_n vanishes on identical pairs and reacts to flux changes") {
  ParabolicProblem p = make_problem(16, 0.2, {1.0}, {0.5}, {});
  ParabolicState s = init_parabolic_state(p, p.m0);
  iterate(s, p);
  CHECK(s.a_hist[0] == 0.0);  // first averages equal the first iterate
  CHECK(a_n_parabolic(s.m_last, s.w_last, s.m_last, s.w_last, p.grid, p.time,
                      p.m_floor) == 0.0);
  VectorFlow w2 = s.w_last;
  for (auto& slice : w2.values)
    for (double& v : slice) v += 0.1;
  CHECK(a_n_parabolic(s.m_last, s.w_last, s.m_last, w2, p.grid, p.time,
                      p.m_floor) > 1e-4);
}

TEST_CASE("running averages obey the incremental identity") {
  ParabolicProblem p = make_problem(16, 0.2, {1.0, 0.5}, {0.5}, {0.3});
  ParabolicState s = init_parabolic_state(p, p.m0);
  iterate(s, p);
  for (int step = 0; step < 4; ++step) {
    DensityFlow prev = s.m_avg;
    iterate(s, p);
    const int n = s.n;  // new count: avg_new - avg_old = (m_new - avg_old)/n
    for (size_t k = 0; k < prev.slices.size(); ++k)
      for (size_t i = 0; i < prev.slices[k].w.size(); ++i) {
        double lhs = s.m_avg.slices[k].w[i] - prev.slices[k].w[i];
        double rhs = (s.m_last.slices[k].w[i] - prev.slices[k].w[i]) / n;
        CHECK(std::fabs(lhs - rhs) <= 1e-14);
      }
  }
}

TEST_CASE("averaged pair satisfies the discrete continuity stencil") {
  ParabolicProblem p = make_problem(16, 0.25, {1.0, 0.5, 0.25}, {0.5}, {0.3});
  ParabolicState s = init_parabolic_state(p, p.m0);
  for (int n = 1; n <= 6; ++n) {
    iterate(s, p);
    CHECK(continuity_residual(s.m_avg, s.w_avg, p.grid, p.time) <= 1e-12);
    CHECK(continuity_residual(s.m_last, s.w_last, p.grid, p.time) <= 1e-12);
  }
}

TEST_CASE("constant couplings give a fixed point after one iteration") {
  ParabolicProblem p = make_problem(16, 0.25, {0.0}, {0.0}, {0.4});
  p.coupling_f = ConvolutionCoupling::from_cosine(p.grid, {0.0}, 1.0);
  p.coupling_g = ConvolutionCoupling::from_cosine(p.grid, {0.0}, 0.25);

  SUBCASE("second iterate reproduces the first average") {
    ParabolicState s = init_parabolic_state(p, p.m0);
    iterate(s, p);
    DensityFlow first = s.m_avg;
    iterate(s, p);
    CHECK(sup_t_d1(s.m_avg, first, p.grid) <= 1e-12);
    CHECK(s.a_hist[1] <= 1e-12);
    CHECK(s.var_hist[1].du_inf <= 1e-14);
    CHECK(s.var_hist[1].dm_inf <= 1e-14);
    CHECK(s.var_hist[1].dw_inf <= 1e-14);
  }

  SUBCASE("play terminates at n = 2") {
    PlayReport rep = run_parabolic(p, ParabolicOptions{});
    CHECK(rep.converged);
    CHECK(rep.iterations == 2);
    CHECK(rep.a.back() <= 1e-12);
    CHECK(rep.final_res_fp <= 1e-11);
  }
}

TEST_CASE("monotone run converges with decaying a_n and clean histories") {
  ParabolicProblem p =
      make_problem(24, 0.4, {1.0, 0.5, 0.25}, {0.5, 0.25}, {0.3});
  ParabolicOptions opts;
  opts.tol_a = 1e-6;
  PlayReport rep = run_parabolic(p, opts);
  REQUIRE(rep.converged);
  CHECK(static_cast<int>(rep.a.size()) == rep.iterations);
  CHECK(static_cast<int>(rep.phi.size()) == rep.iterations);
  CHECK(static_cast<int>(rep.res_fp.size()) == rep.iterations);
  CHECK(rep.a.back() < 1e-6);
  // The forward solve is reproduced exactly by the stencil residual.
  for (double r : rep.res_fp) CHECK(r <= 1e-10);
  // The backward defect shrinks as the belief settles.
  CHECK(rep.final_res_hjb < rep.res_hjb.front());
  // Cesaro average of a_n over the whole run is below the early average.
  double early = 0.0, all = 0.0;
  int half = rep.iterations / 2;
  for (int i = 0; i < half; ++i) early += rep.a[i];
  for (double a : rep.a) all += a;
  CHECK(all / rep.iterations <= early / half + 1e-15);
}

TEST_CASE("damped fixed-point oracle agrees with fictitious play") {
  ParabolicProblem p = make_problem(16, 0.3, {1.0, 0.5}, {0.5, 0.25}, {0.3});

  oracle::DampedFixedPointResult fx =
      oracle::damped_fixed_point(p, 0.5, 800, 1e-10);
  REQUIRE(fx.converged);

  SUBCASE("solution pair has tiny residuals") {
    auto [rh, rf] = mfg_residual(fx.u, fx.m, p, fx.theta);
    CHECK(rf <= 1e-10);  // m is literally a forward solve from u
    CHECK(rh <= 1e-8);   // coupling drift across the last Picard update
  }

  SUBCASE("fictitious play converges to the same flow") {
    ParabolicOptions opts;
    opts.tol_a = 1e-7;
    opts.n_max = 400;
    PlayReport rep = run_parabolic(p, opts);
    REQUIRE(rep.converged);
    CHECK(sup_t_d1(rep.final_belief, fx.m, p.grid) <= 0.5 * p.grid.h);
  }

  SUBCASE("perturbing one cell of the density trips the residual") {
    DensityFlow bad = fx.m;
    int k = p.time.K / 2, cell = p.grid.cells() / 3;
    bad.slices[k].w[cell] += 0.01;
    bad.slices[k].w[p.grid.shift(cell, 0, 1)] -= 0.01;
    auto [rh_clean, rf_clean] = mfg_residual(fx.u, fx.m, p, fx.theta);
    auto [rh_bad, rf_bad] = mfg_residual(fx.u, bad, p, fx.theta);
    (void)rh_clean;
    (void)rh_bad;
    CHECK(rf_bad > 1e3 * std::max(rf_clean, 1e-12));
    CHECK(rf_bad > 10.0 * (p.grid.h + p.time.dt));
  }
}

TEST_CASE("different initial beliefs reach the same limit") {
  ParabolicProblem p = make_problem(16, 0.4, {1.0, 0.5, 0.25}, {0.5}, {0.3});
  ParabolicOptions opts;
  opts.tol_a = 1e-7;

  PlayReport from_m0 = run_parabolic(p, opts);

  ParabolicOptions spiked = opts;
  std::vector<double> w(p.grid.cells());
  for (int i = 0; i < p.grid.cells(); ++i)
    w[i] = 1.0 + 0.8 * std::cos(4.0 * M_PI * p.grid.coord(i, 0) + 1.0);
  spiked.belief0 = ProbabilityVector::from_weights(std::move(w), p.grid);
  PlayReport from_spike = run_parabolic(p, spiked);

  REQUIRE(from_m0.converged);
  REQUIRE(from_spike.converged);
  CHECK(sup_t_d1(from_m0.final_belief, from_spike.final_belief, p.grid) <=
        2.0 * p.grid.h);
}

TEST_CASE("belief-last mode also settles on constant couplings") {
  ParabolicProblem p = make_problem(16, 0.2, {0.0}, {0.0}, {0.3});
  ParabolicOptions opts;
  opts.belief_last = true;
  PlayReport rep = run_parabolic(p, opts);
  CHECK(rep.converged);
  CHECK(rep.iterations == 2);
}
