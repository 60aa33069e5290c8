#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "wavefb/elliptic.hpp"

namespace wavefb {

/// Linear-growth sector around zero: alpha1 |s| <= |g(s)| <= alpha2 |s|
/// for |s| <= S.
struct Sector {
  double S = 0.0;
  double alpha1 = 0.0;
  double alpha2 = 0.0;
};

/// Scalar feedback map. Must vanish at zero, be nondecreasing and
/// globally Lipschitz; these are declared properties, validated by
/// sampling only.
struct Nonlinearity {
  std::function<double(double)> g;
  double lipschitz_constant = 1.0;
  std::optional<Sector> sector;
  std::string name;

  double operator()(double s) const { return g(s); }
};

Nonlinearity make_saturation(double S);
Nonlinearity make_identity();
Nonlinearity make_scaled_saturation(double S, double slope);

struct NonlinearityValidation {
  bool passed = true;
  std::vector<std::string> violations;
};

/// Samples the declared properties (zero at zero, sign, monotonicity,
/// Lipschitz bound, sector inequalities) on all grid pairs. Reports,
/// never throws.
NonlinearityValidation validate_assumptions(const Nonlinearity& nl,
                                            const std::vector<double>& grid);

/// Feedback nonlinearity together with the Gamma0 projection mask.
struct BoundaryFeedback {
  Nonlinearity nonlinearity;
  Vector gamma0_mask;  ///< 0/1 per boundary dof

  static BoundaryFeedback make(const DiscreteOperators& ops, Nonlinearity nl) {
    return {std::move(nl), ops.gamma0_mask()};
  }

  /// Applies g nodewise to a boundary field and masks to Gamma0.
  Vector masked_g(const Vector& boundary_values) const {
    Vector out(boundary_values.size());
    for (Eigen::Index k = 0; k < boundary_values.size(); ++k)
      out[k] = gamma0_mask[k] != 0.0 ? nonlinearity(boundary_values[k]) : 0.0;
    return out;
  }
};

/// Boundary trace prescribed by the feedback law: -mask .* g(D* v).
BoundaryField feedback_trace(const DiscreteOperators& ops, const BoundaryFeedback& fb,
                             const VolumeField& v);

/// Phi = harmonic extension of mask .* g(D* v); -Phi extends the
/// feedback trace into the domain.
VolumeField phi(const DiscreteOperators& ops, const BoundaryFeedback& fb,
                const VolumeField& v);

/// Parses {"type": "saturation"|"identity"|"scaled_saturation", ...}.
Nonlinearity nonlinearity_from_json(const nlohmann::json& j);

}  // namespace wavefb
