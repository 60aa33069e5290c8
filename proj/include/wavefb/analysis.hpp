#pragma once

#include <array>
#include <string>
#include <vector>

#include "wavefb/stepper.hpp"

namespace wavefb {

struct Snapshot {
  double t = 0.0;
  VolumeField u;
  VolumeField v;
};

struct RunMetadata {
  double r = 2.0;
  std::array<double, 2> x0{0.0, 0.0};
  std::string nonlinearity;
};

/// Time-indexed record of a simulation: per-step scalars plus periodic
/// full state snapshots.
struct Trace {
  std::vector<StepRecord> records;
  std::vector<Snapshot> snapshots;
  RunMetadata meta;
};

struct DecayFit {
  double alpha = 0.0;  ///< fitted exponent of E(t) ~ c t^-alpha
  double c = 0.0;
  std::array<double, 2> window{0.0, 0.0};
  double residual = 0.0;  ///< RMS log-log misfit
};

struct KomornikResult {
  double T_estimate = 0.0;
  bool conclusion_holds = false;
  bool unbounded = false;  ///< tail model integral diverges (hypothesis fails)
  std::string tail_model;
};

struct BoundMonitorResult {
  double max_value = 0.0;          ///< max of t^{2/(r-1)} E(t) for t >= t0
  double quarter_ratio = 0.0;      ///< max over last quarter / max over second quarter
  std::vector<double> times;
  std::vector<double> values;
};

/// p = A^-1 v, the smoother velocity transform (zero trace).
VolumeField p_reconstruct(const DiscreteOperators& ops, const VolumeField& v);

/// Nodal gradient of a P1 field by area-weighted averaging of the
/// piecewise-constant triangle gradients. Returns (d/dx, d/dy).
std::pair<Vector, Vector> recover_gradient(const DiscreteOperators& ops,
                                           const VolumeField& f);

/// Wave multiplier 2 h . grad p + p with h(x) = x - x0 (d = 2).
VolumeField multiplier_apply(const DiscreteOperators& ops,
                             const std::array<double, 2>& x0, const VolumeField& p);

/// Midpoint residuals of u + p' + Phi = 0 between consecutive snapshots,
/// relative to ||u||. Throws if fewer than two snapshots are given.
std::vector<double> p_phi_identity_residuals(const DiscreteOperators& ops,
                                             const BoundaryFeedback& fb,
                                             const std::vector<Snapshot>& snapshots);

/// Relative defect of the weighted multiplier identity over snapshot
/// times in [tau1, tau2]. Requires r >= 2.
double multiplier_identity_residual(const DiscreteOperators& ops,
                                    const BoundaryFeedback& fb,
                                    const std::vector<Snapshot>& snapshots,
                                    double tau1, double tau2, double r,
                                    const std::array<double, 2>& x0);

/// Least-squares power-law fit of E(t) over the window, in log-log
/// coordinates. Requires >= 10 positive samples in the window.
DecayFit fit_decay(const std::vector<double>& times, const std::vector<double>& energies,
                   const std::array<double, 2>& window);

/// Integral-inequality check: estimates the constant T in
/// int_tau^inf E^{gamma+1} <= T E(0)^gamma E(tau) by trapezoid plus a
/// power-law tail model, then verifies the implied pointwise bound.
KomornikResult komornik_check(const std::vector<double>& times,
                              const std::vector<double>& energies, double gamma);

/// Boundedness statistics of t^{2/(r-1)} E(t) past the transient t0.
BoundMonitorResult polynomial_bound_monitor(const std::vector<double>& times,
                                            const std::vector<double>& energies,
                                            double r, double t0);

}  // namespace wavefb
