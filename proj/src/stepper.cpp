#include "wavefb/stepper.hpp"

#include <cmath>
#include <stdexcept>

namespace wavefb {

void SolverConfig::validate() const {
  if (!(lambda > 0.0)) throw std::invalid_argument("SolverConfig: lambda must be positive");
  if (!(tol > 0.0)) throw std::invalid_argument("SolverConfig: tol must be positive");
  if (!(relaxation > 0.0) || relaxation > 1.0)
    throw std::invalid_argument("SolverConfig: relaxation must be in (0, 1]");
  if (max_iter < 1) throw std::invalid_argument("SolverConfig: max_iter must be >= 1");
}

double energy(const DiscreteOperators& ops, const State& state) {
  const double nu = ops.l2_norm(state.u);
  const double nv = ops.hminus1_norm(state.v);
  return 0.5 * (nu * nu + nv * nv);
}

double dissipation(const DiscreteOperators& ops, const BoundaryFeedback& fb,
                   const VolumeField& v) {
  const Vector d = ops.dstar(v).values;
  const Vector& b = ops.boundary_lumped_mass();
  double sum = 0.0;
  for (Eigen::Index k = 0; k < d.size(); ++k)
    if (fb.gamma0_mask[k] != 0.0) sum += b[k] * fb.nonlinearity(d[k]) * d[k];
  return sum;
}

VolumeField theta_apply(const DiscreteOperators& ops, const BoundaryFeedback& fb,
                        double lambda, const VolumeField& v) {
  if (!(lambda > 0.0)) throw std::invalid_argument("theta_apply: lambda must be positive");
  VolumeField out = phi(ops, fb, v);
  out.values += v.values / lambda + lambda * ops.solve_A(v).values;
  return out;
}

std::pair<State, double> apply_generator(const DiscreteOperators& ops,
                                         const BoundaryFeedback& fb,
                                         const State& state) {
  VolumeField z = phi(ops, fb, state.v);
  z.values += state.u.values;
  const double trace_residual = ops.trace_sup_norm(z);
  if (trace_residual > 1e-8)
    throw std::invalid_argument("apply_generator: state is not in the generator domain (trace residual " +
                                std::to_string(trace_residual) + ")");
  ops.zero_trace(z);  // scrub round-off so apply_A's precondition holds exactly
  State image{{-state.v.values}, ops.apply_A(z)};
  const double nv = ops.l2_norm(state.v);
  const double nh = ops.hminus1_norm(image.v);
  return {std::move(image), std::sqrt(nv * nv + nh * nh)};
}

State make_strong_data(const DiscreteOperators& ops, const BoundaryFeedback& fb,
                       const VolumeField& w, const VolumeField& z) {
  State s{w, z};
  ops.scatter_boundary(feedback_trace(ops, fb, z).values, s.u.values);
  return s;
}

ResolventSolver::ResolventSolver(const DiscreteOperators& ops, const BoundaryFeedback& fb,
                                 const SolverConfig& cfg)
    : ops_(ops), fb_(fb), cfg_(cfg) {
  cfg_.validate();
  const double lam = cfg_.lambda;
  const SparseMatrix shifted = ops.interior_stiffness() + (lam * lam) * ops.interior_mass();
  shifted_solver_.compute(shifted);
  if (shifted_solver_.info() != Eigen::Success)
    throw std::runtime_error("ResolventSolver: shifted factorization failed");

  for (int k = 0; k < ops.boundary_count(); ++k)
    if (fb.gamma0_mask[k] != 0.0) gamma0_nodes_.push_back(k);

  // reduced coupling: gamma |-> D* (lin^-1 (D gamma)) on the actuated nodes
  const int n0 = static_cast<int>(gamma0_nodes_.size());
  coupling_.resize(n0, n0);
  for (int j = 0; j < n0; ++j) {
    BoundaryField e = ops.zero_boundary_field();
    e.values[gamma0_nodes_[j]] = 1.0;
    const VolumeField lifted = ops.dirichlet_map(e);
    const BoundaryField d = ops.dstar(apply_linear_inverse(lifted));
    for (int i = 0; i < n0; ++i) coupling_(i, j) = d.values[gamma0_nodes_[i]];
  }
}

VolumeField ResolventSolver::apply_linear_inverse(const VolumeField& b) const {
  // solves lambda^-1 v + lambda A^-1 v = b
  const double lam = cfg_.lambda;
  const Vector mb = ops_.mass() * b.values;
  const Vector pi = shifted_solver_.solve(lam * ops_.gather_interior(mb));
  VolumeField v{lam * b.values};
  Vector pfull = Vector::Zero(ops_.node_count());
  ops_.scatter_interior(pi, pfull);
  v.values -= (lam * lam) * pfull;
  return v;
}

double ResolventSolver::theta_residual(const VolumeField& v, const VolumeField& rhs) const {
  VolumeField r = theta_apply(ops_, fb_, cfg_.lambda, v);
  r.values -= rhs.values;
  return ops_.l2_norm(r) / (1.0 + ops_.l2_norm(rhs));
}

ResolventSolver::Result ResolventSolver::finalize(const VolumeField& rhs,
                                                  const VolumeField& f1,
                                                  const Eigen::VectorXd& gamma,
                                                  int iterations) const {
  VolumeField v = apply_linear_inverse(rhs);
  if (gamma.size() > 0) {
    BoundaryField gfield = ops_.zero_boundary_field();
    for (int j = 0; j < gamma.size(); ++j) gfield.values[gamma0_nodes_[j]] = gamma[j];
    v.values -= apply_linear_inverse(ops_.dirichlet_map(gfield)).values;
  }
  Result res;
  res.state.v = v;
  res.state.u.values = (f1.values + v.values) / cfg_.lambda;
  res.iterations = iterations;
  res.residual = theta_residual(v, rhs);
  if (res.residual > cfg_.tol)
    throw ResolventNonconvergence("solve_resolvent: residual " + std::to_string(res.residual) +
                                      " above tolerance after " + std::to_string(iterations) + " iterations",
                                  res.residual);
  return res;
}

ResolventSolver::Result ResolventSolver::solve_newton(const VolumeField& rhs,
                                                      const VolumeField& f1) const {
  const int n0 = static_cast<int>(gamma0_nodes_.size());
  const VolumeField v0 = apply_linear_inverse(rhs);
  if (n0 == 0) return finalize(rhs, f1, Eigen::VectorXd(), 0);

  const BoundaryField d0f = ops_.dstar(v0);
  Eigen::VectorXd d0(n0);
  for (int j = 0; j < n0; ++j) d0[j] = d0f.values[gamma0_nodes_[j]];

  const auto& g = fb_.nonlinearity;
  auto g_of = [&](const Eigen::VectorXd& d) {
    Eigen::VectorXd out(n0);
    for (int j = 0; j < n0; ++j) out[j] = g(d[j]);
    return out;
  };

  const double scale = 1.0 + d0.lpNorm<Eigen::Infinity>();
  const double ftol = 1e-3 * cfg_.tol * scale;

  Eigen::VectorXd gamma = g_of(d0);
  Eigen::VectorXd d = d0 - coupling_ * gamma;
  Eigen::VectorXd F = gamma - g_of(d);
  int it = 0;
  double fnorm = F.lpNorm<Eigen::Infinity>();
  while (fnorm > ftol && it < cfg_.max_iter) {
    ++it;
    // semi-smooth Jacobian: I + diag(g'(d)) Q, g' by central differences
    Eigen::MatrixXd J = Eigen::MatrixXd::Identity(n0, n0);
    const double eps = 1e-7 * scale;
    for (int i = 0; i < n0; ++i) {
      double gp = (g(d[i] + eps) - g(d[i] - eps)) / (2.0 * eps);
      gp = std::clamp(gp, 0.0, g.lipschitz_constant);
      J.row(i) += gp * coupling_.row(i);
    }
    const Eigen::VectorXd delta = J.partialPivLu().solve(F);
    double stepsize = 1.0;
    for (int back = 0; back < 30; ++back) {
      const Eigen::VectorXd cand = gamma - stepsize * delta;
      const Eigen::VectorXd dc = d0 - coupling_ * cand;
      const Eigen::VectorXd Fc = cand - g_of(dc);
      const double fc = Fc.lpNorm<Eigen::Infinity>();
      if (fc < fnorm || fc <= ftol) {
        gamma = cand;
        d = dc;
        F = Fc;
        fnorm = fc;
        break;
      }
      stepsize *= 0.5;
    }
  }
  if (fnorm > ftol)
    throw ResolventNonconvergence("solve_resolvent: boundary Newton stalled, |F| = " + std::to_string(fnorm),
                                  fnorm);
  return finalize(rhs, f1, gamma, it);
}

ResolventSolver::Result ResolventSolver::solve_picard(const VolumeField& rhs,
                                                      const VolumeField& f1) const {
  const double lam = cfg_.lambda;
  double alpha = picard_step_;
  if (alpha == 0.0) {
    const FeedbackConstants c = measure_feedback_constants(ops_, fb_);
    const double m = 1.0 / lam;
    const double L = 1.0 / lam + fb_.nonlinearity.lipschitz_constant * c.dpd_norm + lam / c.lambda1;
    alpha = cfg_.relaxation * m / (L * L);
    const_cast<ResolventSolver*>(this)->picard_step_ = alpha;
  }

  VolumeField v = ops_.zero_volume_field();
  const double rhs_norm = 1.0 + ops_.l2_norm(rhs);
  double res = 0.0;
  for (int it = 0; it < cfg_.max_iter; ++it) {
    VolumeField r = theta_apply(ops_, fb_, lam, v);
    r.values -= rhs.values;
    res = ops_.l2_norm(r) / rhs_norm;
    if (res <= cfg_.tol) {
      Result out;
      out.state.v = v;
      out.state.u.values = (f1.values + v.values) / lam;
      out.iterations = it;
      out.residual = res;
      return out;
    }
    v.values -= alpha * r.values;
  }
  throw ResolventNonconvergence("solve_resolvent: fixed point did not converge, residual " +
                                    std::to_string(res),
                                res);
}

ResolventSolver::Result ResolventSolver::solve(const VolumeField& f1,
                                               const VolumeField& f2) const {
  VolumeField rhs = ops_.solve_A(f2);
  rhs.values -= f1.values / cfg_.lambda;
  return cfg_.acceleration ? solve_newton(rhs, f1) : solve_picard(rhs, f1);
}

std::pair<State, StepRecord> step(const ResolventSolver& solver, const State& state,
                                  double t_next) {
  const double lam = solver.lambda();
  const VolumeField f1{lam * state.u.values};
  const VolumeField f2{lam * state.v.values};
  ResolventSolver::Result res = solver.solve(f1, f2);
  StepRecord rec;
  rec.t = t_next;
  rec.resolvent_iterations = res.iterations;
  rec.resolvent_residual = res.residual;
  rec.energy = energy(solver.ops(), res.state);
  rec.dissipation = dissipation(solver.ops(), solver.feedback(), res.state.v);
  // the new state satisfies the trace condition by construction, so the
  // generator image (and hence the Kato norm) is always defined there
  rec.kato_norm = apply_generator(solver.ops(), solver.feedback(), res.state).second;
  return {std::move(res.state), rec};
}

State solve_resolvent(const DiscreteOperators& ops, const BoundaryFeedback& fb,
                      const SolverConfig& cfg, const VolumeField& f1,
                      const VolumeField& f2) {
  return ResolventSolver(ops, fb, cfg).solve(f1, f2).state;
}

LinearMidpointStepper::LinearMidpointStepper(const DiscreteOperators& ops, double dt)
    : ops_(ops), dt_(dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("LinearMidpointStepper: dt must be positive");
  const double lam = 2.0 / dt;
  const SparseMatrix shifted = ops.interior_stiffness() + (lam * lam) * ops.interior_mass();
  shifted_solver_.compute(shifted);
  if (shifted_solver_.info() != Eigen::Success)
    throw std::runtime_error("LinearMidpointStepper: factorization failed");
}

State LinearMidpointStepper::step(const State& state) const {
  const double lam = 2.0 / dt_;
  const VolumeField au = ops_.apply_A(state.u);
  const VolumeField f1{lam * state.u.values + state.v.values};
  const VolumeField f2{lam * state.v.values - au.values};
  VolumeField rhs = ops_.solve_A(f2);
  rhs.values -= f1.values / lam;
  // linear inverse of (lambda^-1 + lambda A^-1)
  const Vector mb = ops_.mass() * rhs.values;
  const Vector pi = shifted_solver_.solve(lam * ops_.gather_interior(mb));
  Vector pfull = Vector::Zero(ops_.node_count());
  ops_.scatter_interior(pi, pfull);
  State next;
  next.v.values = lam * rhs.values - (lam * lam) * pfull;
  next.u.values = (f1.values + next.v.values) / lam;
  return next;
}

FeedbackConstants measure_feedback_constants(const DiscreteOperators& ops,
                                             const BoundaryFeedback& fb) {
  FeedbackConstants out;
  const int n = ops.node_count();

  // smallest Dirichlet eigenvalue by inverse power iteration on (K, M)
  {
    Vector x = Vector::Ones(n);
    VolumeField xf{x};
    ops.zero_trace(xf);
    double lam = 0.0;
    for (int it = 0; it < 100; ++it) {
      VolumeField y = ops.solve_A(xf);
      const double ny = ops.l2_norm(y);
      if (ny == 0.0) break;
      lam = ops.l2_inner(y, xf) / (ny * ny);
      y.values /= ny;
      xf = y;
    }
    out.lambda1 = lam;
  }

  // norm of the M-self-adjoint PSD map v -> D P D* v by power iteration
  {
    VolumeField x{Vector::Random(n)};
    double rq = 0.0;
    for (int it = 0; it < 60; ++it) {
      VolumeField y = ops.dirichlet_map({fb.gamma0_mask.cwiseProduct(ops.dstar(x).values)});
      const double num = ops.l2_inner(x, y);
      const double den = ops.l2_inner(x, x);
      rq = den > 0.0 ? num / den : 0.0;
      const double ny = ops.l2_norm(y);
      if (ny < 1e-300) break;
      y.values /= ny;
      x = y;
    }
    out.dpd_norm = std::max(rq, 0.0);
  }
  return out;
}

}  // namespace wavefb
