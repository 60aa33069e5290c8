#pragma once

#include <array>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace wavefb {

/// Boundary part labels. Gamma0 is the actuated part, Gamma1 the
/// homogeneous Dirichlet part.
enum class BoundaryLabel : int { Gamma0 = 0, Gamma1 = 1 };

struct BoundaryEdge {
  int a = -1;              ///< first endpoint (node index)
  int b = -1;              ///< second endpoint (node index)
  BoundaryLabel label = BoundaryLabel::Gamma0;
  std::array<double, 2> normal{0.0, 0.0};  ///< outward unit normal
};

/// Triangulated 2-D domain with a labeled boundary partition.
/// Immutable after construction; safe for shared read-only access.
struct Mesh {
  std::vector<std::array<double, 2>> nodes;
  std::vector<std::array<int, 3>> triangles;  ///< counter-clockwise
  std::vector<BoundaryEdge> boundary_edges;

  std::size_t node_count() const { return nodes.size(); }

  double triangle_area(std::size_t t) const;
  double total_area() const;

  /// Indices of nodes lying on the boundary, sorted ascending.
  std::vector<int> boundary_nodes() const;

  /// Structural checks: CCW orientation, unit normals, labels.
  void validate() const;
};

/// Report on the geometric conditions required of the partition
/// (separated boundary parts, h . nu <= 0 on Gamma1 with h = x - x0).
struct GeometryReport {
  double min_separation = 0.0;        ///< distance between Gamma0 and Gamma1 node sets
  double max_h_dot_nu_on_gamma1 = 0.0;
  bool partition_condition_satisfied = false;
  std::vector<double> h_dot_nu_per_edge;  ///< at edge midpoints, all boundary edges
};

/// Structured triangulation of the unit square with n subdivisions per
/// side. All boundary edges are labeled Gamma0. Throws
/// std::invalid_argument if n < 2.
Mesh build_unit_square_mesh(int n);

/// Polygonal annulus with target edge length `resolution`. Inner circle
/// edges are labeled Gamma1 (normals toward the center), outer circle
/// Gamma0. Throws std::invalid_argument on degenerate radii.
Mesh build_annulus_mesh(double r_inner, double r_outer, double resolution);

/// Evaluates the geometric conditions for the multiplier analysis with
/// vertex x0. Never throws; returns a report.
GeometryReport check_geometric_assumptions(const Mesh& mesh,
                                           const std::array<double, 2>& x0);

/// Relabel every boundary edge.
void set_uniform_boundary_label(Mesh& mesh, BoundaryLabel label);

nlohmann::json mesh_to_json(const Mesh& mesh);
Mesh mesh_from_json(const nlohmann::json& j);

}  // namespace wavefb
