#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "wavefb/analysis.hpp"

using namespace wavefb;

namespace {

std::vector<Snapshot> simulate_linear_square(int n, double dt, double t_end,
                                             const DiscreteOperators& ops,
                                             const BoundaryFeedback& fb) {
  VolumeField u0 = ops.zero_volume_field();
  for (int i = 0; i < ops.node_count(); ++i) {
    const auto& x = ops.mesh().nodes[i];
    u0.values[i] = std::sin(M_PI * x[0]) * std::sin(M_PI * x[1]);
  }
  SolverConfig cfg;
  cfg.lambda = 1.0 / dt;
  const ResolventSolver solver(ops, fb, cfg);
  State s{u0, ops.zero_volume_field()};
  std::vector<Snapshot> snaps{{0.0, s.u, s.v}};
  const int steps = static_cast<int>(std::llround(t_end / dt));
  for (int k = 1; k <= steps; ++k) {
    s = step(solver, s, k * dt).first;
    snaps.push_back({k * dt, s.u, s.v});
  }
  return snaps;
}

}  // namespace

TEST_CASE("multiplier field on simple closed forms") {
  const DiscreteOperators ops(build_unit_square_mesh(10));
  SUBCASE("zero field") {
    const VolumeField z = ops.zero_volume_field();
    CHECK(multiplier_apply(ops, {0.3, 0.1}, z).values.norm() == 0.0);
  }
  SUBCASE("constant field keeps only the zeroth-order term") {
    VolumeField c = ops.zero_volume_field();
    c.values.setConstant(2.5);
    const VolumeField m = multiplier_apply(ops, {0.2, 0.7}, c);
    for (int i = 0; i < ops.node_count(); ++i)
      CHECK(m.values[i] == doctest::Approx(2.5).epsilon(1e-12));
  }
  SUBCASE("linear field x1 about the origin gives 3 x1") {
    VolumeField p = ops.zero_volume_field();
    for (int i = 0; i < ops.node_count(); ++i) p.values[i] = ops.mesh().nodes[i][0];
    const VolumeField m = multiplier_apply(ops, {0.0, 0.0}, p);
    for (int i = 0; i < ops.node_count(); ++i)
      CHECK(m.values[i] == doctest::Approx(3.0 * ops.mesh().nodes[i][0]).epsilon(1e-10));
  }
}

TEST_CASE("gradient recovery is exact on affine fields") {
  const DiscreteOperators ops(build_annulus_mesh(0.5, 1.0, 0.1));
  VolumeField f = ops.zero_volume_field();
  for (int i = 0; i < ops.node_count(); ++i)
    f.values[i] = 2.0 * ops.mesh().nodes[i][0] - 3.0 * ops.mesh().nodes[i][1] + 1.0;
  const auto [gx, gy] = recover_gradient(ops, f);
  CHECK((gx.array() - 2.0).abs().maxCoeff() < 1e-11);
  CHECK((gy.array() + 3.0).abs().maxCoeff() < 1e-11);
}

TEST_CASE("p_reconstruct ties the dual norm to the gradient energy") {
  const DiscreteOperators ops(build_unit_square_mesh(12));
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  VolumeField v = ops.zero_volume_field();
  for (int i = 0; i < ops.node_count(); ++i) v.values[i] = dist(rng);
  const VolumeField p = p_reconstruct(ops, v);
  CHECK(ops.trace_sup_norm(p) == 0.0);
  const double a = ops.hminus1_norm(v), b = ops.h10_seminorm(p);
  CHECK(a * a == doctest::Approx(b * b).epsilon(1e-9));
}

TEST_CASE("velocity-potential identity residual is zero on the zero trajectory") {
  const DiscreteOperators ops(build_unit_square_mesh(6));
  const BoundaryFeedback fb = BoundaryFeedback::make(ops, make_saturation(1.0));
  std::vector<Snapshot> snaps;
  for (int k = 0; k < 4; ++k)
    snaps.push_back({0.1 * k, ops.zero_volume_field(), ops.zero_volume_field()});
  for (double r : p_phi_identity_residuals(ops, fb, snaps)) CHECK(r == 0.0);
  snaps.resize(1);
  CHECK_THROWS_AS(p_phi_identity_residuals(ops, fb, snaps), std::invalid_argument);
}

TEST_CASE("velocity-potential identity residual shrinks under time refinement") {
  const DiscreteOperators ops(build_unit_square_mesh(8));
  const BoundaryFeedback fb = BoundaryFeedback::make(ops, make_identity());
  const auto coarse = simulate_linear_square(8, 0.04, 1.0, ops, fb);
  const auto fine = simulate_linear_square(8, 0.02, 1.0, ops, fb);
  const auto rc = p_phi_identity_residuals(ops, fb, coarse);
  const auto rf = p_phi_identity_residuals(ops, fb, fine);
  const double mc = *std::max_element(rc.begin(), rc.end());
  const double mf = *std::max_element(rf.begin(), rf.end());
  CHECK(mc / mf >= 1.8);
}

namespace {

// relative defect of ||p'||^2 = ||u||^2 + 2 (Phi, u) + ||Phi||^2 at
// snapshot midpoints, using the discrete time derivative of p
double squared_identity_defect(const DiscreteOperators& ops, const BoundaryFeedback& fb,
                               const std::vector<Snapshot>& snaps) {
  double worst = 0.0;
  for (std::size_t k = 1; k < snaps.size(); ++k) {
    const double dt = snaps[k].t - snaps[k - 1].t;
    const VolumeField dp{(ops.solve_A(snaps[k].v).values - ops.solve_A(snaps[k - 1].v).values) / dt};
    const VolumeField um{0.5 * (snaps[k].u.values + snaps[k - 1].u.values)};
    const VolumeField pm{0.5 * (phi(ops, fb, snaps[k].v).values +
                                phi(ops, fb, snaps[k - 1].v).values)};
    const double lhs = ops.l2_norm(dp) * ops.l2_norm(dp);
    const double rhs = ops.l2_norm(um) * ops.l2_norm(um) + 2.0 * ops.l2_inner(pm, um) +
                       ops.l2_norm(pm) * ops.l2_norm(pm);
    worst = std::max(worst, std::abs(lhs - rhs) / (std::abs(lhs) + std::abs(rhs) + 1e-30));
  }
  return worst;
}

}  // namespace

TEST_CASE("squared velocity-potential identity tightens under time refinement") {
  const DiscreteOperators ops(build_unit_square_mesh(8));
  const BoundaryFeedback fb = BoundaryFeedback::make(ops, make_identity());
  const double coarse =
      squared_identity_defect(ops, fb, simulate_linear_square(8, 0.04, 1.0, ops, fb));
  const double fine =
      squared_identity_defect(ops, fb, simulate_linear_square(8, 0.02, 1.0, ops, fb));
  CHECK(coarse / fine >= 1.8);
}

TEST_CASE("multiplier identity residual: domain checks and zero trajectory") {
  const DiscreteOperators ops(build_unit_square_mesh(6));
  const BoundaryFeedback fb = BoundaryFeedback::make(ops, make_saturation(1.0));
  std::vector<Snapshot> snaps;
  for (int k = 0; k < 6; ++k)
    snaps.push_back({0.1 * k, ops.zero_volume_field(), ops.zero_volume_field()});
  CHECK(multiplier_identity_residual(ops, fb, snaps, 0.0, 0.5, 2.0, {0.5, 0.5}) == 0.0);
  CHECK_THROWS_AS(multiplier_identity_residual(ops, fb, snaps, 0.0, 0.5, 1.5, {0.5, 0.5}),
                  std::invalid_argument);
  CHECK_THROWS_AS(multiplier_identity_residual(ops, fb, snaps, 2.0, 3.0, 2.0, {0.5, 0.5}),
                  std::invalid_argument);
}

TEST_CASE("multiplier identity residual is small on a resolved linear run") {
  const DiscreteOperators ops(build_unit_square_mesh(16));
  const BoundaryFeedback fb = BoundaryFeedback::make(ops, make_identity());
  const auto snaps = simulate_linear_square(16, 0.05, 1.5, ops, fb);
  const double res = multiplier_identity_residual(ops, fb, snaps, 0.0, 1.5, 2.0, {0.5, 0.5});
  CHECK(res < 0.15);
}

TEST_CASE("decay fit is exact on pure power laws") {
  std::vector<double> t, e, c;
  for (int k = 0; k <= 300; ++k) {
    const double tk = 1.0 + 99.0 * k / 300.0;
    t.push_back(tk);
    e.push_back(4.0 * std::pow(tk, -2.0));
    c.push_back(5.0);
  }
  const DecayFit fit = fit_decay(t, e, {1.0, 100.0});
  CHECK(std::abs(fit.alpha - 2.0) <= 1e-6);
  CHECK(fit.c == doctest::Approx(4.0).epsilon(1e-6));
  CHECK(fit.residual <= 1e-9);

  const DecayFit flat = fit_decay(t, c, {1.0, 100.0});
  CHECK(std::abs(flat.alpha) <= 1e-9);
}

TEST_CASE("decay fit input validation") {
  std::vector<double> t{1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11};
  std::vector<double> e(t.size(), 1.0);
  CHECK_THROWS_AS(fit_decay(t, e, {100.0, 200.0}), std::invalid_argument);
  e[4] = -1.0;
  CHECK_THROWS_AS(fit_decay(t, e, {1.0, 11.0}), std::invalid_argument);
}

TEST_CASE("integral-inequality checker on the exponential fixture") {
  std::vector<double> t, e;
  for (int k = 0; k <= 3000; ++k) {
    t.push_back(30.0 * k / 3000.0);
    e.push_back(std::exp(-t.back()));
  }
  const KomornikResult res = komornik_check(t, e, 1.0);
  // analytic: int_tau e^{-2s} ds = e^{-2tau}/2, so T = 1/2
  CHECK(res.T_estimate == doctest::Approx(0.5).epsilon(0.02));
  CHECK(res.conclusion_holds);
  CHECK_FALSE(res.unbounded);
}

TEST_CASE("integral-inequality checker on the power-law fixture") {
  std::vector<double> t, e;
  for (int k = 0; k <= 5000; ++k) {
    t.push_back(200.0 * k / 5000.0);
    e.push_back(std::pow(1.0 + t.back(), -2.0));
  }
  const KomornikResult res = komornik_check(t, e, 1.0);
  CHECK_FALSE(res.unbounded);
  CHECK(res.T_estimate > 0.0);
  CHECK(res.conclusion_holds);
}

TEST_CASE("integral-inequality checker flags a non-decaying trace") {
  std::vector<double> t, e;
  for (int k = 0; k <= 100; ++k) {
    t.push_back(k * 0.5);
    e.push_back(1.0);
  }
  const KomornikResult res = komornik_check(t, e, 1.0);
  CHECK(res.unbounded);
  CHECK_FALSE(res.conclusion_holds);
}

TEST_CASE("integral-inequality checker rejects increasing samples") {
  std::vector<double> t{0, 1, 2, 3}, e{1.0, 0.5, 0.8, 0.1};
  CHECK_THROWS_AS(komornik_check(t, e, 1.0), std::invalid_argument);
}

TEST_CASE("polynomial bound monitor on synthetic traces") {
  std::vector<double> t, poly, expo;
  for (int k = 1; k <= 2000; ++k) {
    t.push_back(0.05 * k);
    poly.push_back(std::pow(t.back(), -2.0));
    expo.push_back(std::exp(-t.back()));
  }
  const BoundMonitorResult a = polynomial_bound_monitor(t, poly, 2.0, 1.0);
  CHECK(a.quarter_ratio == doctest::Approx(1.0).epsilon(1e-9));
  const BoundMonitorResult b = polynomial_bound_monitor(t, expo, 2.0, 1.0);
  CHECK(b.quarter_ratio < 1.0);
  CHECK_THROWS_AS(polynomial_bound_monitor(t, poly, 2.0, 50.0), std::invalid_argument);
  CHECK_THROWS_AS(polynomial_bound_monitor(t, poly, 1.0, 1.0), std::invalid_argument);
}
