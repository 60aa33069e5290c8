#include "wavefb/nonlinearity.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace wavefb {

Nonlinearity make_saturation(double S) {
  if (!(S > 0.0)) throw std::invalid_argument("make_saturation: S must be positive");
  Nonlinearity nl;
  nl.g = [S](double s) { return std::clamp(s, -S, S); };
  nl.lipschitz_constant = 1.0;
  nl.sector = Sector{S, 1.0, 1.0};
  nl.name = "saturation";
  return nl;
}

Nonlinearity make_identity() {
  Nonlinearity nl;
  nl.g = [](double s) { return s; };
  nl.lipschitz_constant = 1.0;
  nl.sector = Sector{1.0, 1.0, 1.0};
  nl.name = "identity";
  return nl;
}

Nonlinearity make_scaled_saturation(double S, double slope) {
  if (!(S > 0.0) || !(slope > 0.0))
    throw std::invalid_argument("make_scaled_saturation: S and slope must be positive");
  Nonlinearity nl;
  nl.g = [S, slope](double s) { return slope * std::clamp(s, -S, S); };
  nl.lipschitz_constant = slope;
  nl.sector = Sector{S, slope, slope};
  nl.name = "scaled_saturation";
  return nl;
}

NonlinearityValidation validate_assumptions(const Nonlinearity& nl,
                                            const std::vector<double>& grid) {
  NonlinearityValidation rep;
  auto fail = [&rep](const std::string& msg) {
    rep.passed = false;
    rep.violations.push_back(msg);
  };

  bool has_zero = false, has_pos = false, has_neg = false;
  for (double s : grid) {
    if (s == 0.0) has_zero = true;
    if (s > 0.0) has_pos = true;
    if (s < 0.0) has_neg = true;
  }
  if (!has_zero || !has_pos || !has_neg)
    throw std::invalid_argument("validate_assumptions: grid must contain 0 and points of both signs");

  std::vector<double> sorted = grid;
  std::sort(sorted.begin(), sorted.end());

  const double tol = 1e-12;
  if (std::abs(nl(0.0)) > tol) fail("g(0) != 0");
  for (double s : sorted) {
    if (s != 0.0 && nl(s) * s < 0.0)
      fail("sign(g(s)) != sign(s) at s = " + std::to_string(s));
  }
  for (std::size_t i = 0; i + 1 < sorted.size(); ++i) {
    const double a = sorted[i], b = sorted[i + 1];
    const double ga = nl(a), gb = nl(b);
    if (gb < ga - tol) fail("not nondecreasing on [" + std::to_string(a) + ", " + std::to_string(b) + "]");
    if (std::abs(gb - ga) > nl.lipschitz_constant * std::abs(b - a) + tol)
      fail("Lipschitz bound violated on [" + std::to_string(a) + ", " + std::to_string(b) + "]");
  }
  if (nl.sector) {
    const auto& sec = *nl.sector;
    if (!(sec.S > 0.0) || sec.alpha1 > sec.alpha2) fail("ill-formed sector declaration");
    for (double s : sorted) {
      if (s == 0.0 || std::abs(s) > sec.S) continue;
      const double a = std::abs(nl(s));
      if (a < sec.alpha1 * std::abs(s) - tol)
        fail("sector lower bound fails at s = " + std::to_string(s));
      if (a > sec.alpha2 * std::abs(s) + tol)
        fail("sector upper bound fails at s = " + std::to_string(s));
    }
  }
  return rep;
}

BoundaryField feedback_trace(const DiscreteOperators& ops, const BoundaryFeedback& fb,
                             const VolumeField& v) {
  BoundaryField out{-fb.masked_g(ops.dstar(v).values)};
  return out;
}

VolumeField phi(const DiscreteOperators& ops, const BoundaryFeedback& fb,
                const VolumeField& v) {
  return ops.dirichlet_map({fb.masked_g(ops.dstar(v).values)});
}

Nonlinearity nonlinearity_from_json(const nlohmann::json& j) {
  const std::string type = j.at("type").get<std::string>();
  if (type == "saturation") return make_saturation(j.at("S").get<double>());
  if (type == "identity") return make_identity();
  if (type == "scaled_saturation")
    return make_scaled_saturation(j.at("S").get<double>(), j.at("slope").get<double>());
  throw std::invalid_argument("nonlinearity_from_json: unknown type '" + type + "'");
}

}  // namespace wavefb
