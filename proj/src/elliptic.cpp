#include "wavefb/elliptic.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

namespace wavefb {

namespace {

// P1 element matrices with exact quadrature on a triangle with vertices
// p0, p1, p2 (CCW).
void element_matrices(const std::array<double, 2>& p0, const std::array<double, 2>& p1,
                      const std::array<double, 2>& p2, double Ke[3][3], double Me[3][3]) {
  const double x0 = p0[0], y0 = p0[1], x1 = p1[0], y1 = p1[1], x2 = p2[0], y2 = p2[1];
  const double det = (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0);
  const double area = 0.5 * det;
  // gradients of the barycentric basis functions
  const double gx[3] = {(y1 - y2) / det, (y2 - y0) / det, (y0 - y1) / det};
  const double gy[3] = {(x2 - x1) / det, (x0 - x2) / det, (x1 - x0) / det};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      Ke[i][j] = area * (gx[i] * gx[j] + gy[i] * gy[j]);
      Me[i][j] = area / 12.0 * (i == j ? 2.0 : 1.0);
    }
}

}  // namespace

DiscreteOperators::DiscreteOperators(Mesh mesh) : mesh_(std::move(mesh)) {
  mesh_.validate();
  const int n = node_count();

  boundary_nodes_ = mesh_.boundary_nodes();
  node_to_boundary_.assign(n, -1);
  for (std::size_t k = 0; k < boundary_nodes_.size(); ++k)
    node_to_boundary_[boundary_nodes_[k]] = static_cast<int>(k);
  for (int i = 0; i < n; ++i)
    if (node_to_boundary_[i] < 0) interior_nodes_.push_back(i);

  std::vector<Eigen::Triplet<double>> kt, mt;
  kt.reserve(mesh_.triangles.size() * 9);
  mt.reserve(mesh_.triangles.size() * 9);
  for (const auto& tri : mesh_.triangles) {
    double Ke[3][3], Me[3][3];
    element_matrices(mesh_.nodes[tri[0]], mesh_.nodes[tri[1]], mesh_.nodes[tri[2]], Ke, Me);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        kt.emplace_back(tri[i], tri[j], Ke[i][j]);
        mt.emplace_back(tri[i], tri[j], Me[i][j]);
      }
  }
  stiffness_.resize(n, n);
  stiffness_.setFromTriplets(kt.begin(), kt.end());
  mass_.resize(n, n);
  mass_.setFromTriplets(mt.begin(), mt.end());

  // boundary mass along the polygonal curve (1-D P1 elements)
  const int nb = boundary_count();
  boundary_lumped_mass_ = Vector::Zero(nb);
  std::vector<Eigen::Triplet<double>> bt;
  bt.reserve(mesh_.boundary_edges.size() * 4);
  for (const auto& e : mesh_.boundary_edges) {
    const double len = std::hypot(mesh_.nodes[e.b][0] - mesh_.nodes[e.a][0],
                                  mesh_.nodes[e.b][1] - mesh_.nodes[e.a][1]);
    const int ia = node_to_boundary_[e.a], ib = node_to_boundary_[e.b];
    boundary_lumped_mass_[ia] += 0.5 * len;
    boundary_lumped_mass_[ib] += 0.5 * len;
    bt.emplace_back(ia, ia, len / 3.0);
    bt.emplace_back(ib, ib, len / 3.0);
    bt.emplace_back(ia, ib, len / 6.0);
    bt.emplace_back(ib, ia, len / 6.0);
  }
  boundary_mass_.resize(nb, nb);
  boundary_mass_.setFromTriplets(bt.begin(), bt.end());

  // interior blocks
  const int ni = static_cast<int>(interior_nodes_.size());
  std::vector<int> node_to_interior(n, -1);
  for (int k = 0; k < ni; ++k) node_to_interior[interior_nodes_[k]] = k;
  std::vector<Eigen::Triplet<double>> kii, mii;
  for (int col = 0; col < stiffness_.outerSize(); ++col)
    for (SparseMatrix::InnerIterator it(stiffness_, col); it; ++it) {
      const int r = node_to_interior[it.row()], c = node_to_interior[it.col()];
      if (r >= 0 && c >= 0) kii.emplace_back(r, c, it.value());
    }
  for (int col = 0; col < mass_.outerSize(); ++col)
    for (SparseMatrix::InnerIterator it(mass_, col); it; ++it) {
      const int r = node_to_interior[it.row()], c = node_to_interior[it.col()];
      if (r >= 0 && c >= 0) mii.emplace_back(r, c, it.value());
    }
  stiffness_ii_.resize(ni, ni);
  stiffness_ii_.setFromTriplets(kii.begin(), kii.end());
  mass_ii_.resize(ni, ni);
  mass_ii_.setFromTriplets(mii.begin(), mii.end());

  stiffness_ii_solver_.compute(stiffness_ii_);
  if (stiffness_ii_solver_.info() != Eigen::Success)
    throw std::runtime_error("assemble_operators: interior stiffness factorization failed (degenerate mesh?)");
  mass_ii_solver_.compute(mass_ii_);
  if (mass_ii_solver_.info() != Eigen::Success)
    throw std::runtime_error("assemble_operators: interior mass factorization failed");
}

Vector DiscreteOperators::gamma0_mask() const {
  Vector mask = Vector::Zero(boundary_count());
  for (const auto& e : mesh_.boundary_edges)
    if (e.label == BoundaryLabel::Gamma0) {
      mask[node_to_boundary_[e.a]] = 1.0;
      mask[node_to_boundary_[e.b]] = 1.0;
    }
  return mask;
}

Vector DiscreteOperators::gather_boundary(const Vector& full) const {
  Vector out(boundary_count());
  for (int k = 0; k < boundary_count(); ++k) out[k] = full[boundary_nodes_[k]];
  return out;
}

void DiscreteOperators::scatter_boundary(const Vector& boundary, Vector& full) const {
  for (int k = 0; k < boundary_count(); ++k) full[boundary_nodes_[k]] = boundary[k];
}

Vector DiscreteOperators::gather_interior(const Vector& full) const {
  Vector out(static_cast<Eigen::Index>(interior_nodes_.size()));
  for (std::size_t k = 0; k < interior_nodes_.size(); ++k) out[static_cast<Eigen::Index>(k)] = full[interior_nodes_[k]];
  return out;
}

void DiscreteOperators::scatter_interior(const Vector& interior, Vector& full) const {
  for (std::size_t k = 0; k < interior_nodes_.size(); ++k) full[interior_nodes_[k]] = interior[static_cast<Eigen::Index>(k)];
}

VolumeField DiscreteOperators::zero_volume_field() const {
  return {Vector::Zero(node_count())};
}

BoundaryField DiscreteOperators::zero_boundary_field() const {
  return {Vector::Zero(boundary_count())};
}

void DiscreteOperators::zero_trace(VolumeField& v) const {
  for (int i : boundary_nodes_) v.values[i] = 0.0;
}

double DiscreteOperators::trace_sup_norm(const VolumeField& v) const {
  double m = 0.0;
  for (int i : boundary_nodes_) m = std::max(m, std::abs(v.values[i]));
  return m;
}

VolumeField DiscreteOperators::apply_A(const VolumeField& w) const {
  const double tr = trace_sup_norm(w);
  if (tr > 1e-10)
    throw std::invalid_argument("apply_A: input has nonzero trace (sup = " + std::to_string(tr) + ")");
  const Vector kw = stiffness_ * w.values;
  const Vector ai = mass_ii_solver_.solve(gather_interior(kw));
  VolumeField a = zero_volume_field();
  scatter_interior(ai, a.values);
  return a;
}

VolumeField DiscreteOperators::solve_A(const VolumeField& v) const {
  const Vector mv = mass_ * v.values;
  const Vector pi = stiffness_ii_solver_.solve(gather_interior(mv));
  VolumeField p = zero_volume_field();
  scatter_interior(pi, p.values);
  return p;
}

double DiscreteOperators::hminus1_norm(const VolumeField& v) const {
  const VolumeField p = solve_A(v);
  const double sq = l2_inner(v, p);
  if (sq < -1e-12)
    throw std::runtime_error("hminus1_norm: negative quadratic form value " + std::to_string(sq));
  return std::sqrt(std::max(0.0, sq));
}

VolumeField DiscreteOperators::dirichlet_map(const BoundaryField& f) const {
  VolumeField u = zero_volume_field();
  scatter_boundary(f.values, u.values);
  const Vector rhs = -(stiffness_ * u.values);
  const Vector ui = stiffness_ii_solver_.solve(gather_interior(rhs));
  scatter_interior(ui, u.values);
  return u;
}

BoundaryField DiscreteOperators::dstar(const VolumeField& w) const {
  const Vector mw = mass_ * w.values;
  const Vector s = stiffness_ii_solver_.solve(gather_interior(mw));
  Vector full = Vector::Zero(node_count());
  scatter_interior(s, full);
  const Vector ks = stiffness_ * full;  // boundary rows hold K_bi * s
  BoundaryField out = zero_boundary_field();
  out.values = (gather_boundary(mw) - gather_boundary(ks)).cwiseQuotient(boundary_lumped_mass_);
  return out;
}

BoundaryField DiscreteOperators::normal_derivative(const VolumeField& p) const {
  BoundaryField d = dstar(apply_A(p));
  d.values = -d.values;
  return d;
}

double DiscreteOperators::l2_inner(const VolumeField& a, const VolumeField& b) const {
  return a.values.dot(mass_ * b.values);
}

double DiscreteOperators::l2_norm(const VolumeField& v) const {
  return std::sqrt(std::max(0.0, l2_inner(v, v)));
}

double DiscreteOperators::h10_seminorm(const VolumeField& v) const {
  return std::sqrt(std::max(0.0, v.values.dot(stiffness_ * v.values)));
}

double DiscreteOperators::boundary_inner(const BoundaryField& a, const BoundaryField& b) const {
  return (a.values.array() * boundary_lumped_mass_.array() * b.values.array()).sum();
}

void DiscreteOperators::export_triplets(const SparseMatrix& m, const std::string& path) {
  std::ofstream out(path);
  for (int col = 0; col < m.outerSize(); ++col)
    for (SparseMatrix::InnerIterator it(m, col); it; ++it)
      out << it.row() << ' ' << it.col() << ' ' << it.value() << '\n';
}

}  // namespace wavefb
