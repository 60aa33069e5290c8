#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "wavefb/stepper.hpp"

using namespace wavefb;

namespace {

VolumeField random_field(const DiscreteOperators& ops, std::mt19937& rng, double amp = 1.0) {
  std::uniform_real_distribution<double> dist(-amp, amp);
  VolumeField v = ops.zero_volume_field();
  for (int i = 0; i < ops.node_count(); ++i) v.values[i] = dist(rng);
  return v;
}

State random_strong_state(const DiscreteOperators& ops, const BoundaryFeedback& fb,
                          std::mt19937& rng, double amp = 1.0) {
  return make_strong_data(ops, fb, random_field(ops, rng, amp), random_field(ops, rng, amp));
}

double state_distance(const DiscreteOperators& ops, const State& a, const State& b) {
  const VolumeField du{a.u.values - b.u.values};
  const VolumeField dv{a.v.values - b.v.values};
  const double nu = ops.l2_norm(du), nv = ops.hminus1_norm(dv);
  return std::sqrt(nu * nu + nv * nv);
}

}  // namespace

TEST_CASE("solver configuration validation") {
  SolverConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.lambda = -1.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = SolverConfig{};
  cfg.relaxation = 1.5;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = SolverConfig{};
  cfg.max_iter = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("Theta is strongly monotone with modulus 1/lambda") {
  const DiscreteOperators ops(build_unit_square_mesh(8));
  const BoundaryFeedback fb = BoundaryFeedback::make(ops, make_saturation(0.5));
  std::mt19937 rng(17);
  const double lambda = 4.0;
  for (int trial = 0; trial < 50; ++trial) {
    const VolumeField v1 = random_field(ops, rng), v2 = random_field(ops, rng);
    const VolumeField t1 = theta_apply(ops, fb, lambda, v1);
    const VolumeField t2 = theta_apply(ops, fb, lambda, v2);
    const VolumeField dt{t1.values - t2.values};
    const VolumeField dv{v1.values - v2.values};
    const double pairing = ops.l2_inner(dt, dv);
    const double n2 = ops.l2_inner(dv, dv);
    CHECK(pairing >= n2 / lambda - 1e-10);
  }
}

TEST_CASE("the boundary feedback pairing is nonnegative") {
  const DiscreteOperators ops(build_unit_square_mesh(8));
  const BoundaryFeedback fb = BoundaryFeedback::make(ops, make_saturation(1.0));
  std::mt19937 rng(19);
  for (int trial = 0; trial < 50; ++trial) {
    const VolumeField v1 = random_field(ops, rng), v2 = random_field(ops, rng);
    const VolumeField p1 = phi(ops, fb, v1), p2 = phi(ops, fb, v2);
    const VolumeField dphi{p1.values - p2.values};
    const VolumeField dv{v1.values - v2.values};
    CHECK(ops.l2_inner(dphi, dv) >= -1e-12);
    CHECK(dissipation(ops, fb, v1) >= -1e-12);
  }
}

TEST_CASE("resolvent matches a dense oracle for linear feedback") {
  const DiscreteOperators ops(build_unit_square_mesh(6));
  const BoundaryFeedback fb = BoundaryFeedback::make(ops, make_identity());
  const int n = ops.node_count();
  const double lambda = 10.0;

  // dense matrix of the linear map Theta
  Eigen::MatrixXd T(n, n);
  for (int j = 0; j < n; ++j) {
    VolumeField e = ops.zero_volume_field();
    e.values[j] = 1.0;
    T.col(j) = theta_apply(ops, fb, lambda, e).values;
  }

  SolverConfig cfg;
  cfg.lambda = lambda;
  std::mt19937 rng(29);
  const VolumeField f1 = random_field(ops, rng), f2 = random_field(ops, rng);
  const State got = solve_resolvent(ops, fb, cfg, f1, f2);

  VolumeField rhs = ops.solve_A(f2);
  rhs.values -= f1.values / lambda;
  const Vector v_oracle = T.partialPivLu().solve(rhs.values);
  CHECK((got.v.values - v_oracle).lpNorm<Eigen::Infinity>() < 1e-9);
  const Vector u_oracle = (f1.values + v_oracle) / lambda;
  CHECK((got.u.values - u_oracle).lpNorm<Eigen::Infinity>() < 1e-9);
}

TEST_CASE("a huge saturation threshold reproduces the linear solve") {
  const DiscreteOperators ops(build_unit_square_mesh(6));
  const BoundaryFeedback lin = BoundaryFeedback::make(ops, make_identity());
  const BoundaryFeedback sat = BoundaryFeedback::make(ops, make_saturation(1e9));
  SolverConfig cfg;
  cfg.lambda = 5.0;
  std::mt19937 rng(31);
  const VolumeField f1 = random_field(ops, rng), f2 = random_field(ops, rng);
  const State a = solve_resolvent(ops, lin, cfg, f1, f2);
  const State b = solve_resolvent(ops, sat, cfg, f1, f2);
  CHECK((a.v.values - b.v.values).lpNorm<Eigen::Infinity>() < 1e-9);
}

TEST_CASE("resolvent trace condition holds by construction") {
  const DiscreteOperators ops(build_unit_square_mesh(8));
  const BoundaryFeedback fb = BoundaryFeedback::make(ops, make_saturation(0.2));
  SolverConfig cfg;
  cfg.lambda = 20.0;
  std::mt19937 rng(37);
  const VolumeField f1 = random_field(ops, rng), f2 = random_field(ops, rng);
  const State s = solve_resolvent(ops, fb, cfg, f1, f2);
  const Vector u_b = ops.gather_boundary(s.u.values);
  const Vector expected = feedback_trace(ops, fb, s.v).values;
  CHECK((u_b - expected).lpNorm<Eigen::Infinity>() < 1e-10);
  // and the state is in the generator domain
  CHECK_NOTHROW(apply_generator(ops, fb, s));
}

TEST_CASE("damped fixed point agrees with the accelerated solve") {
  const DiscreteOperators ops(build_unit_square_mesh(5));
  const BoundaryFeedback fb = BoundaryFeedback::make(ops, make_saturation(0.5));
  SolverConfig newton;
  newton.lambda = 1.0;
  SolverConfig picard = newton;
  picard.acceleration = false;
  picard.tol = 1e-9;
  picard.max_iter = 200000;
  std::mt19937 rng(41);
  const VolumeField f1 = random_field(ops, rng, 0.1), f2 = random_field(ops, rng, 0.1);
  const State a = solve_resolvent(ops, fb, newton, f1, f2);
  const State b = solve_resolvent(ops, fb, picard, f1, f2);
  CHECK((a.v.values - b.v.values).lpNorm<Eigen::Infinity>() < 1e-6);
}

TEST_CASE("implicit Euler obeys the per-step energy inequality") {
  const DiscreteOperators ops(build_unit_square_mesh(10));
  const BoundaryFeedback fb = BoundaryFeedback::make(ops, make_saturation(1.0));
  const double dt = 0.05;
  SolverConfig cfg;
  cfg.lambda = 1.0 / dt;
  const ResolventSolver solver(ops, fb, cfg);
  std::mt19937 rng(43);
  State s = random_strong_state(ops, fb, rng);
  double e_prev = energy(ops, s);
  for (int k = 1; k <= 40; ++k) {
    auto [next, rec] = step(solver, s, k * dt);
    s = std::move(next);
    CHECK(rec.energy - e_prev + dt * rec.dissipation <= 1e-12 * (1.0 + e_prev));
    CHECK(rec.energy <= e_prev + 1e-12);
    e_prev = rec.energy;
  }
}

TEST_CASE("the step map is a contraction in the energy norm") {
  const DiscreteOperators ops(build_unit_square_mesh(10));
  const BoundaryFeedback fb = BoundaryFeedback::make(ops, make_saturation(0.5));
  SolverConfig cfg;
  cfg.lambda = 10.0;
  const ResolventSolver solver(ops, fb, cfg);
  std::mt19937 rng(47);
  State a = random_strong_state(ops, fb, rng);
  State b = random_strong_state(ops, fb, rng);
  double d_prev = state_distance(ops, a, b);
  for (int k = 1; k <= 40; ++k) {
    a = step(solver, a, k * 0.1).first;
    b = step(solver, b, k * 0.1).first;
    const double d = state_distance(ops, a, b);
    CHECK(d <= d_prev + 1e-10 * (1.0 + d_prev));
    d_prev = d;
  }
}

TEST_CASE("the generator-image norm is nonincreasing along strong runs") {
  const DiscreteOperators ops(build_unit_square_mesh(10));
  const BoundaryFeedback fb = BoundaryFeedback::make(ops, make_saturation(1.0));
  SolverConfig cfg;
  cfg.lambda = 20.0;
  const ResolventSolver solver(ops, fb, cfg);
  std::mt19937 rng(53);
  State s = random_strong_state(ops, fb, rng);
  double k_prev = apply_generator(ops, fb, s).second;
  for (int k = 1; k <= 60; ++k) {
    auto [next, rec] = step(solver, s, k * 0.05);
    s = std::move(next);
    CHECK(rec.kato_norm <= k_prev + 1e-8 * (1.0 + k_prev));
    k_prev = rec.kato_norm;
  }
}

TEST_CASE("apply_generator rejects states outside the domain") {
  const DiscreteOperators ops(build_unit_square_mesh(6));
  const BoundaryFeedback fb = BoundaryFeedback::make(ops, make_saturation(1.0));
  State s{ops.zero_volume_field(), ops.zero_volume_field()};
  s.u.values.setOnes();  // boundary trace 1, feedback trace 0
  CHECK_THROWS_AS(apply_generator(ops, fb, s), std::invalid_argument);
}

TEST_CASE("midpoint scheme conserves energy without actuation") {
  Mesh mesh = build_unit_square_mesh(10);
  set_uniform_boundary_label(mesh, BoundaryLabel::Gamma1);
  const DiscreteOperators ops(mesh);
  VolumeField u0 = ops.zero_volume_field();
  for (int i = 0; i < ops.node_count(); ++i) {
    const auto& x = ops.mesh().nodes[i];
    u0.values[i] = std::sin(M_PI * x[0]) * std::sin(M_PI * x[1]);
  }
  State s{u0, ops.zero_volume_field()};
  const double e0 = energy(ops, s);
  const LinearMidpointStepper mid(ops, 0.02);
  for (int k = 0; k < 100; ++k) {
    s = mid.step(s);
    CHECK(ops.trace_sup_norm(s.u) < 1e-12);
  }
  CHECK(energy(ops, s) == doctest::Approx(e0).epsilon(1e-10));
}

TEST_CASE("measured constants match the spectral oracle") {
  const DiscreteOperators ops(build_unit_square_mesh(12));
  const BoundaryFeedback fb = BoundaryFeedback::make(ops, make_identity());
  const FeedbackConstants c = measure_feedback_constants(ops, fb);
  CHECK(c.lambda1 == doctest::Approx(2.0 * M_PI * M_PI).epsilon(0.05));
  CHECK(c.dpd_norm > 0.0);
}

TEST_CASE("nonconvergence raises the dedicated error") {
  const DiscreteOperators ops(build_unit_square_mesh(6));
  const BoundaryFeedback fb = BoundaryFeedback::make(ops, make_saturation(0.5));
  SolverConfig cfg;
  cfg.lambda = 1.0;
  cfg.acceleration = false;
  cfg.max_iter = 2;  // far too few for the damped iteration
  std::mt19937 rng(59);
  const VolumeField f1 = random_field(ops, rng), f2 = random_field(ops, rng);
  CHECK_THROWS_AS(solve_resolvent(ops, fb, cfg, f1, f2), ResolventNonconvergence);
}
