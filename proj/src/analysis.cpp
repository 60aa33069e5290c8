#include "wavefb/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace wavefb {

namespace {

struct TriGradient {
  double gx, gy, area;
};

std::vector<TriGradient> triangle_gradients(const Mesh& mesh, const Vector& f) {
  std::vector<TriGradient> out;
  out.reserve(mesh.triangles.size());
  for (const auto& tri : mesh.triangles) {
    const auto& p0 = mesh.nodes[tri[0]];
    const auto& p1 = mesh.nodes[tri[1]];
    const auto& p2 = mesh.nodes[tri[2]];
    const double det = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
    const double gx0 = (p1[1] - p2[1]) / det, gx1 = (p2[1] - p0[1]) / det, gx2 = (p0[1] - p1[1]) / det;
    const double gy0 = (p2[0] - p1[0]) / det, gy1 = (p0[0] - p2[0]) / det, gy2 = (p1[0] - p0[0]) / det;
    out.push_back({f[tri[0]] * gx0 + f[tri[1]] * gx1 + f[tri[2]] * gx2,
                   f[tri[0]] * gy0 + f[tri[1]] * gy1 + f[tri[2]] * gy2, 0.5 * det});
  }
  return out;
}

double trapezoid(const std::vector<double>& t, const std::vector<double>& f) {
  double sum = 0.0;
  for (std::size_t k = 0; k + 1 < t.size(); ++k)
    sum += 0.5 * (t[k + 1] - t[k]) * (f[k] + f[k + 1]);
  return sum;
}

}  // namespace

VolumeField p_reconstruct(const DiscreteOperators& ops, const VolumeField& v) {
  return ops.solve_A(v);
}

std::pair<Vector, Vector> recover_gradient(const DiscreteOperators& ops,
                                           const VolumeField& f) {
  const Mesh& mesh = ops.mesh();
  const int n = ops.node_count();
  Vector gx = Vector::Zero(n), gy = Vector::Zero(n), wsum = Vector::Zero(n);
  const auto grads = triangle_gradients(mesh, f.values);
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    for (int i : mesh.triangles[t]) {
      gx[i] += grads[t].area * grads[t].gx;
      gy[i] += grads[t].area * grads[t].gy;
      wsum[i] += grads[t].area;
    }
  }
  gx.array() /= wsum.array();
  gy.array() /= wsum.array();
  return {gx, gy};
}

VolumeField multiplier_apply(const DiscreteOperators& ops,
                             const std::array<double, 2>& x0, const VolumeField& p) {
  const auto [gx, gy] = recover_gradient(ops, p);
  VolumeField out = ops.zero_volume_field();
  for (int i = 0; i < ops.node_count(); ++i) {
    const auto& x = ops.mesh().nodes[i];
    out.values[i] = 2.0 * ((x[0] - x0[0]) * gx[i] + (x[1] - x0[1]) * gy[i]) + p.values[i];
  }
  return out;
}

std::vector<double> p_phi_identity_residuals(const DiscreteOperators& ops,
                                             const BoundaryFeedback& fb,
                                             const std::vector<Snapshot>& snapshots) {
  if (snapshots.size() < 2)
    throw std::invalid_argument("p_phi_identity_residuals: need at least two snapshots");
  std::vector<double> out;
  VolumeField p_prev = ops.solve_A(snapshots.front().v);
  VolumeField phi_prev = phi(ops, fb, snapshots.front().v);
  for (std::size_t k = 1; k < snapshots.size(); ++k) {
    const double dt = snapshots[k].t - snapshots[k - 1].t;
    VolumeField p_next = ops.solve_A(snapshots[k].v);
    VolumeField phi_next = phi(ops, fb, snapshots[k].v);
    VolumeField res{0.5 * (snapshots[k].u.values + snapshots[k - 1].u.values) +
                    (p_next.values - p_prev.values) / dt +
                    0.5 * (phi_next.values + phi_prev.values)};
    VolumeField umid{0.5 * (snapshots[k].u.values + snapshots[k - 1].u.values)};
    const double denom = ops.l2_norm(umid);
    out.push_back(denom > 0.0 ? ops.l2_norm(res) / denom : ops.l2_norm(res));
    p_prev = std::move(p_next);
    phi_prev = std::move(phi_next);
  }
  return out;
}

double multiplier_identity_residual(const DiscreteOperators& ops,
                                    const BoundaryFeedback& fb,
                                    const std::vector<Snapshot>& snapshots,
                                    double tau1, double tau2, double r,
                                    const std::array<double, 2>& x0) {
  if (r < 2.0) throw std::invalid_argument("multiplier_identity_residual: r must be >= 2");
  std::vector<const Snapshot*> window;
  for (const auto& s : snapshots)
    if (s.t >= tau1 - 1e-12 && s.t <= tau2 + 1e-12) window.push_back(&s);
  if (window.size() < 2)
    throw std::invalid_argument("multiplier_identity_residual: need >= 2 snapshots in [tau1, tau2]");

  const Mesh& mesh = ops.mesh();
  const int nb = ops.boundary_count();
  std::vector<int> node_to_boundary(ops.node_count(), -1);
  for (int k = 0; k < nb; ++k) node_to_boundary[ops.boundary_nodes()[k]] = k;

  std::vector<double> times, Epow_hi, bracket_integrand, volume_integrand, eprime_integrand;
  double bracket_first = 0.0, bracket_last = 0.0;

  for (std::size_t k = 0; k < window.size(); ++k) {
    const Snapshot& s = *window[k];
    const double E = energy(ops, {s.u, s.v});
    const VolumeField p = ops.solve_A(s.v);
    const VolumeField mp = multiplier_apply(ops, x0, p);
    const double uMp = ops.l2_inner(s.u, mp);

    // boundary terms, edge-based trapezoid with h.nu at edge midpoints
    const Vector dnp = ops.normal_derivative(p).values;
    const Vector gvals = fb.masked_g(ops.dstar(s.v).values);
    double b_flux = 0.0, b_feedback = 0.0;
    for (const auto& e : mesh.boundary_edges) {
      const double len = std::hypot(mesh.nodes[e.b][0] - mesh.nodes[e.a][0],
                                    mesh.nodes[e.b][1] - mesh.nodes[e.a][1]);
      const double mx = 0.5 * (mesh.nodes[e.a][0] + mesh.nodes[e.b][0]) - x0[0];
      const double my = 0.5 * (mesh.nodes[e.a][1] + mesh.nodes[e.b][1]) - x0[1];
      const double hnu = mx * e.normal[0] + my * e.normal[1];
      const int ia = node_to_boundary[e.a], ib = node_to_boundary[e.b];
      b_flux += 0.5 * len * hnu * (dnp[ia] * dnp[ia] + dnp[ib] * dnp[ib]);
      if (e.label == BoundaryLabel::Gamma0)
        b_feedback += 0.5 * len * hnu * (gvals[ia] * gvals[ia] + gvals[ib] * gvals[ib]);
    }

    // volume term (d+1) Phi u + Phi (2 h . grad u), centroid quadrature
    // for the gradient part
    const VolumeField ph = phi(ops, fb, s.v);
    double vol = 3.0 * ops.l2_inner(ph, s.u);
    const auto grads = triangle_gradients(mesh, s.u.values);
    for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
      const auto& tri = mesh.triangles[t];
      const double cx = (mesh.nodes[tri[0]][0] + mesh.nodes[tri[1]][0] + mesh.nodes[tri[2]][0]) / 3.0 - x0[0];
      const double cy = (mesh.nodes[tri[0]][1] + mesh.nodes[tri[1]][1] + mesh.nodes[tri[2]][1]) / 3.0 - x0[1];
      const double phic = (ph.values[tri[0]] + ph.values[tri[1]] + ph.values[tri[2]]) / 3.0;
      vol += grads[t].area * phic * 2.0 * (cx * grads[t].gx + cy * grads[t].gy);
    }

    const double eprime = -dissipation(ops, fb, s.v);  // the energy identity
    const double w_lo = E > 0.0 ? std::pow(E, (r - 1.0) / 2.0) : 0.0;

    times.push_back(s.t);
    Epow_hi.push_back(E > 0.0 ? std::pow(E, (r + 1.0) / 2.0) : 0.0);
    bracket_integrand.push_back(w_lo * (b_flux - b_feedback));
    volume_integrand.push_back(w_lo * vol);
    eprime_integrand.push_back(E > 0.0 ? eprime * std::pow(E, (r - 3.0) / 2.0) * uMp : 0.0);

    const double bracket = w_lo * uMp;
    if (k == 0) bracket_first = bracket;
    if (k + 1 == window.size()) bracket_last = bracket;
  }

  const double lhs = 2.0 * trapezoid(times, Epow_hi);
  const double rhs = (bracket_last - bracket_first) + trapezoid(times, bracket_integrand) -
                     trapezoid(times, volume_integrand) -
                     0.5 * (r - 1.0) * trapezoid(times, eprime_integrand);
  return std::abs(lhs - rhs) / (std::abs(lhs) + std::abs(rhs) + 1e-30);
}

DecayFit fit_decay(const std::vector<double>& times, const std::vector<double>& energies,
                   const std::array<double, 2>& window) {
  std::vector<double> lt, le;
  for (std::size_t k = 0; k < times.size(); ++k) {
    if (times[k] < window[0] || times[k] > window[1] || times[k] <= 0.0) continue;
    if (energies[k] <= 0.0)
      throw std::invalid_argument("fit_decay: nonpositive energy inside the window");
    lt.push_back(std::log(times[k]));
    le.push_back(std::log(energies[k]));
  }
  if (lt.size() < 10)
    throw std::invalid_argument("fit_decay: need at least 10 samples in the window");

  const double n = static_cast<double>(lt.size());
  double st = 0.0, se = 0.0, stt = 0.0, ste = 0.0;
  for (std::size_t k = 0; k < lt.size(); ++k) {
    st += lt[k];
    se += le[k];
    stt += lt[k] * lt[k];
    ste += lt[k] * le[k];
  }
  const double denom = n * stt - st * st;
  const double slope = (n * ste - st * se) / denom;
  const double intercept = (se - slope * st) / n;

  DecayFit fit;
  fit.alpha = -slope;
  fit.c = std::exp(intercept);
  fit.window = window;
  double ss = 0.0;
  for (std::size_t k = 0; k < lt.size(); ++k) {
    const double d = le[k] - (slope * lt[k] + intercept);
    ss += d * d;
  }
  fit.residual = std::sqrt(ss / n);
  return fit;
}

KomornikResult komornik_check(const std::vector<double>& times,
                              const std::vector<double>& energies, double gamma) {
  if (times.size() != energies.size() || times.size() < 4)
    throw std::invalid_argument("komornik_check: need matching sample arrays (>= 4 points)");
  if (!(gamma > 0.0)) throw std::invalid_argument("komornik_check: gamma must be positive");
  for (std::size_t k = 0; k + 1 < energies.size(); ++k)
    if (energies[k + 1] > energies[k] + 1e-10)
      throw std::invalid_argument("komornik_check: samples are not nonincreasing");

  KomornikResult out;
  out.tail_model = "power_law_last_quarter";

  const double t_max = times.back();
  const double E0 = energies.front();
  if (E0 <= 0.0) {
    out.T_estimate = 0.0;
    out.conclusion_holds = true;  // zero energy satisfies everything
    return out;
  }

  // tail model: power-law fit over the last quarter of samples
  const double t_quarter = times.front() + 0.75 * (t_max - times.front());
  double tail_integral = 0.0;
  {
    std::vector<double> lt, le;
    for (std::size_t k = 0; k < times.size(); ++k)
      if (times[k] >= t_quarter && times[k] > 0.0 && energies[k] > 0.0) {
        lt.push_back(std::log(times[k]));
        le.push_back(std::log(energies[k]));
      }
    if (lt.size() >= 2) {
      const double n = static_cast<double>(lt.size());
      double st = 0.0, se = 0.0, stt = 0.0, ste = 0.0;
      for (std::size_t k = 0; k < lt.size(); ++k) {
        st += lt[k];
        se += le[k];
        stt += lt[k] * lt[k];
        ste += lt[k] * le[k];
      }
      const double denom = n * stt - st * st;
      const double slope = denom != 0.0 ? (n * ste - st * se) / denom : 0.0;
      const double a = -slope;
      const double c = std::exp((se - slope * st) / n);
      const double q = a * (gamma + 1.0);
      if (q > 1.0) {
        tail_integral = std::pow(c, gamma + 1.0) * std::pow(t_max, 1.0 - q) / (q - 1.0);
      } else {
        out.unbounded = true;  // hypothesis integral diverges under the tail model
      }
    } else if (energies.back() > 0.0) {
      out.unbounded = true;
    }
  }

  if (out.unbounded) {
    out.T_estimate = std::numeric_limits<double>::infinity();
    out.conclusion_holds = false;
    return out;
  }

  // running integral of E^{gamma+1} from each tau to t_max, trapezoid
  std::vector<double> pw(times.size());
  for (std::size_t k = 0; k < times.size(); ++k) pw[k] = std::pow(energies[k], gamma + 1.0);
  std::vector<double> suffix(times.size(), tail_integral);
  for (std::size_t k = times.size() - 1; k-- > 0;)
    suffix[k] = suffix[k + 1] + 0.5 * (times[k + 1] - times[k]) * (pw[k] + pw[k + 1]);

  double T = 0.0;
  for (std::size_t k = 0; k < times.size(); ++k) {
    if (energies[k] <= 0.0) continue;
    T = std::max(T, suffix[k] / (std::pow(E0, gamma) * energies[k]));
  }
  out.T_estimate = T;

  // verify the implied bound pointwise for t >= T
  out.conclusion_holds = true;
  for (std::size_t k = 0; k < times.size(); ++k) {
    if (times[k] < T) continue;
    const double bound =
        E0 * std::pow((T + gamma * times[k]) / (T + gamma * T), -1.0 / gamma);
    if (energies[k] > bound * (1.0 + 1e-9)) {
      out.conclusion_holds = false;
      break;
    }
  }
  return out;
}

BoundMonitorResult polynomial_bound_monitor(const std::vector<double>& times,
                                            const std::vector<double>& energies,
                                            double r, double t0) {
  if (r < 2.0) throw std::invalid_argument("polynomial_bound_monitor: r must be >= 2");
  if (!(t0 > 0.0)) throw std::invalid_argument("polynomial_bound_monitor: t0 must be positive");
  if (times.empty() || times.back() < 10.0 * t0)
    throw std::invalid_argument("polynomial_bound_monitor: trace must cover a decade past t0");

  BoundMonitorResult out;
  const double expo = 2.0 / (r - 1.0);
  for (std::size_t k = 0; k < times.size(); ++k) {
    if (times[k] < t0) continue;
    out.times.push_back(times[k]);
    out.values.push_back(std::pow(times[k], expo) * energies[k]);
  }
  const double span = out.times.back() - out.times.front();
  const double q1 = out.times.front() + 0.25 * span;
  const double q2 = out.times.front() + 0.5 * span;
  const double q3 = out.times.front() + 0.75 * span;
  double max_all = 0.0, max_second = 0.0, max_last = 0.0;
  for (std::size_t k = 0; k < out.times.size(); ++k) {
    max_all = std::max(max_all, out.values[k]);
    if (out.times[k] >= q1 && out.times[k] < q2) max_second = std::max(max_second, out.values[k]);
    if (out.times[k] >= q3) max_last = std::max(max_last, out.values[k]);
  }
  out.max_value = max_all;
  out.quarter_ratio = max_second > 0.0 ? max_last / max_second : 0.0;
  return out;
}

}  // namespace wavefb
