#pragma once

#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "wavefb/mesh.hpp"

namespace wavefb {

using Vector = Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<double>;

/// Nodal coefficient vector over all mesh nodes.
struct VolumeField {
  Vector values;
};

/// Nodal coefficient vector over boundary nodes (in the order of
/// DiscreteOperators::boundary_nodes).
struct BoundaryField {
  Vector values;
};

/// Assembled P1 discrete counterparts of the Dirichlet Laplacian, its
/// inverse, the harmonic-extension (Dirichlet) map and its adjoint.
/// Immutable after assembly; all solves are read-only on the cached
/// factorizations and may run concurrently.
class DiscreteOperators {
 public:
  explicit DiscreteOperators(Mesh mesh);

  const Mesh& mesh() const { return mesh_; }
  int node_count() const { return static_cast<int>(mesh_.node_count()); }
  const std::vector<int>& interior_nodes() const { return interior_nodes_; }
  const std::vector<int>& boundary_nodes() const { return boundary_nodes_; }
  int boundary_count() const { return static_cast<int>(boundary_nodes_.size()); }

  const SparseMatrix& mass() const { return mass_; }
  const SparseMatrix& stiffness() const { return stiffness_; }
  /// Lumped boundary mass (diagonal), over boundary nodes. Used for all
  /// boundary pairings involving the nonlinearity.
  const Vector& boundary_lumped_mass() const { return boundary_lumped_mass_; }
  /// Consistent boundary mass, kept for linear boundary norms.
  const SparseMatrix& boundary_mass() const { return boundary_mass_; }

  /// 0/1 mask over boundary nodes: 1 where the node touches a Gamma0 edge.
  Vector gamma0_mask() const;

  /// Discrete A = -Laplacian with homogeneous Dirichlet conditions,
  /// applied to a zero-trace field. Returns the interior L2
  /// representative (zero boundary values, interior mass solve of the
  /// stiffness action). Throws if w has nonzero trace beyond 1e-10.
  VolumeField apply_A(const VolumeField& w) const;

  /// Discrete A^{-1}: zero-trace p with K p = M v on interior dofs.
  VolumeField solve_A(const VolumeField& v) const;

  /// ||v||_{H^-1} = sqrt((v, A^{-1} v)_{L2}).
  double hminus1_norm(const VolumeField& v) const;

  /// Harmonic extension of boundary data f.
  VolumeField dirichlet_map(const BoundaryField& f) const;

  /// Exact lumped-mass adjoint of dirichlet_map:
  /// (dstar(w), f)_Gamma = (w, dirichlet_map(f))_Omega for all f.
  BoundaryField dstar(const VolumeField& w) const;

  /// Consistent variational flux d_nu p of a zero-trace field, defined
  /// as -dstar(apply_A(p)).
  BoundaryField normal_derivative(const VolumeField& p) const;

  double l2_inner(const VolumeField& a, const VolumeField& b) const;
  double l2_norm(const VolumeField& v) const;
  double h10_seminorm(const VolumeField& v) const;
  /// Lumped L2(Gamma) inner product.
  double boundary_inner(const BoundaryField& a, const BoundaryField& b) const;

  VolumeField zero_volume_field() const;
  BoundaryField zero_boundary_field() const;
  /// Zero the boundary entries of a volume field in place.
  void zero_trace(VolumeField& v) const;
  double trace_sup_norm(const VolumeField& v) const;

  Vector gather_boundary(const Vector& full) const;
  void scatter_boundary(const Vector& boundary, Vector& full) const;
  Vector gather_interior(const Vector& full) const;
  void scatter_interior(const Vector& interior, Vector& full) const;

  const Eigen::SimplicialLDLT<SparseMatrix>& interior_stiffness_solver() const {
    return stiffness_ii_solver_;
  }
  const SparseMatrix& interior_mass() const { return mass_ii_; }
  const SparseMatrix& interior_stiffness() const { return stiffness_ii_; }

  /// "i j value" coordinate dump, 0-based, for debugging.
  static void export_triplets(const SparseMatrix& m, const std::string& path);

 private:
  Mesh mesh_;
  std::vector<int> interior_nodes_;
  std::vector<int> boundary_nodes_;
  std::vector<int> node_to_boundary_;  ///< -1 for interior nodes
  SparseMatrix mass_, stiffness_;
  SparseMatrix mass_ii_, stiffness_ii_;
  SparseMatrix boundary_mass_;
  Vector boundary_lumped_mass_;
  Eigen::SimplicialLDLT<SparseMatrix> stiffness_ii_solver_;
  Eigen::SimplicialLDLT<SparseMatrix> mass_ii_solver_;
};

/// Convenience wrapper matching the free-function spelling used elsewhere.
inline DiscreteOperators assemble_operators(const Mesh& mesh) {
  return DiscreteOperators(mesh);
}

}  // namespace wavefb
