#pragma once

#include <Eigen/Dense>

#include "wavefb/nonlinearity.hpp"

namespace wavefb {

/// A point [u, v] of the energy space L2 x H^-1. The velocity v is
/// stored as an L2 coefficient vector; all H^-1 quantities go through
/// solve_A.
struct State {
  VolumeField u;
  VolumeField v;
};

struct SolverConfig {
  double lambda = 1.0;     ///< resolvent parameter, 1/dt for implicit Euler
  double tol = 1e-12;      ///< relative residual tolerance for the Theta equation
  int max_iter = 500;
  double relaxation = 1.0; ///< damping factor, scales the measured-optimal step
  bool acceleration = true;  ///< true: boundary-reduced Newton; false: damped fixed point

  void validate() const;
};

struct StepRecord {
  double t = 0.0;
  double energy = 0.0;
  double dissipation = 0.0;
  double kato_norm = 0.0;
  int resolvent_iterations = 0;
  double resolvent_residual = 0.0;
};

/// Thrown when the resolvent iteration fails to reach tolerance.
struct ResolventNonconvergence : std::runtime_error {
  double last_residual;
  ResolventNonconvergence(const std::string& msg, double residual)
      : std::runtime_error(msg), last_residual(residual) {}
};

/// E(u, v) = 1/2 (||u||_L2^2 + ||v||_{H^-1}^2).
double energy(const DiscreteOperators& ops, const State& state);

/// Lumped boundary quadrature of g(D*v) D*v over Gamma0; nonnegative.
double dissipation(const DiscreteOperators& ops, const BoundaryFeedback& fb,
                   const VolumeField& v);

/// Theta(v) = lambda^-1 v + D P g(D* v) + lambda A^-1 v.
VolumeField theta_apply(const DiscreteOperators& ops, const BoundaryFeedback& fb,
                        double lambda, const VolumeField& v);

/// Image of the closed-loop generator, [-v, A(u + Phi(v))], and its
/// energy-space norm. Requires the trace condition u|Gamma = -P g(D*v)
/// within 1e-8.
std::pair<State, double> apply_generator(const DiscreteOperators& ops,
                                         const BoundaryFeedback& fb,
                                         const State& state);

/// Builds a generator-domain state from arbitrary (w, z): interior dofs
/// of w kept, boundary dofs overwritten with the feedback trace of z.
State make_strong_data(const DiscreteOperators& ops, const BoundaryFeedback& fb,
                       const VolumeField& w, const VolumeField& z);

/// Solves the range-condition equation (A + lambda)[u, v] = [f1, f2] by
/// reducing the monotone Theta equation to the actuated boundary nodes.
/// Factorizations and the reduced coupling matrix are cached per
/// (operators, feedback, lambda); reuse one instance across steps.
class ResolventSolver {
 public:
  ResolventSolver(const DiscreteOperators& ops, const BoundaryFeedback& fb,
                  const SolverConfig& cfg);

  struct Result {
    State state;
    int iterations = 0;
    double residual = 0.0;
  };

  Result solve(const VolumeField& f1, const VolumeField& f2) const;

  double lambda() const { return cfg_.lambda; }
  const SolverConfig& config() const { return cfg_; }
  const DiscreteOperators& ops() const { return ops_; }
  const BoundaryFeedback& feedback() const { return fb_; }

 private:
  /// (lambda^-1 + lambda A^-1)^{-1} b via the shifted interior solve.
  VolumeField apply_linear_inverse(const VolumeField& b) const;
  Result solve_newton(const VolumeField& rhs, const VolumeField& f1) const;
  Result solve_picard(const VolumeField& rhs, const VolumeField& f1) const;
  Result finalize(const VolumeField& rhs, const VolumeField& f1,
                  const Eigen::VectorXd& gamma, int iterations) const;
  double theta_residual(const VolumeField& v, const VolumeField& rhs) const;

  const DiscreteOperators& ops_;
  const BoundaryFeedback& fb_;
  SolverConfig cfg_;
  Eigen::SimplicialLDLT<SparseMatrix> shifted_solver_;  ///< K_ii + lambda^2 M_ii
  std::vector<int> gamma0_nodes_;       ///< indices into boundary node list
  Eigen::MatrixXd coupling_;            ///< Q: gamma -> change of D*v on Gamma0
  double picard_step_ = 0.0;            ///< measured-optimal step, lazy
};

/// One implicit Euler step of the contraction semigroup, dt = 1/lambda.
std::pair<State, StepRecord> step(const ResolventSolver& solver, const State& state,
                                  double t_next);

/// Convenience one-shot resolvent solve matching the module-level API.
State solve_resolvent(const DiscreteOperators& ops, const BoundaryFeedback& fb,
                      const SolverConfig& cfg, const VolumeField& f1,
                      const VolumeField& f2);

/// Midpoint (theta = 1/2) scheme for the undamped linear system
/// (Gamma0 empty); conserves the energy-space norm. Test reference only.
class LinearMidpointStepper {
 public:
  LinearMidpointStepper(const DiscreteOperators& ops, double dt);
  State step(const State& state) const;

 private:
  const DiscreteOperators& ops_;
  double dt_;
  Eigen::SimplicialLDLT<SparseMatrix> shifted_solver_;
};

/// Constants used to size the damped fixed-point step: the operator norm
/// of D P D* and the smallest Dirichlet eigenvalue, both in the discrete
/// M-geometry.
struct FeedbackConstants {
  double dpd_norm = 0.0;
  double lambda1 = 0.0;
};
FeedbackConstants measure_feedback_constants(const DiscreteOperators& ops,
                                             const BoundaryFeedback& fb);

}  // namespace wavefb
