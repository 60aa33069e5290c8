#include "wavefb/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace wavefb {

namespace {

double signed_area(const std::array<double, 2>& p, const std::array<double, 2>& q,
                   const std::array<double, 2>& r) {
  return 0.5 * ((q[0] - p[0]) * (r[1] - p[1]) - (r[0] - p[0]) * (q[1] - p[1]));
}

}  // namespace

double Mesh::triangle_area(std::size_t t) const {
  const auto& tri = triangles[t];
  return signed_area(nodes[tri[0]], nodes[tri[1]], nodes[tri[2]]);
}

double Mesh::total_area() const {
  double area = 0.0;
  for (std::size_t t = 0; t < triangles.size(); ++t) area += triangle_area(t);
  return area;
}

std::vector<int> Mesh::boundary_nodes() const {
  std::set<int> s;
  for (const auto& e : boundary_edges) {
    s.insert(e.a);
    s.insert(e.b);
  }
  return {s.begin(), s.end()};
}

void Mesh::validate() const {
  for (std::size_t t = 0; t < triangles.size(); ++t) {
    if (triangle_area(t) <= 0.0)
      throw std::runtime_error("mesh: triangle " + std::to_string(t) +
                               " is not counter-clockwise");
  }
  for (const auto& e : boundary_edges) {
    const double len = std::hypot(e.normal[0], e.normal[1]);
    if (std::abs(len - 1.0) > 1e-12)
      throw std::runtime_error("mesh: boundary normal is not unit length");
    const double ex = nodes[e.b][0] - nodes[e.a][0];
    const double ey = nodes[e.b][1] - nodes[e.a][1];
    if (std::abs(ex * e.normal[0] + ey * e.normal[1]) > 1e-12 * std::hypot(ex, ey))
      throw std::runtime_error("mesh: boundary normal is not orthogonal to edge");
  }
}

Mesh build_unit_square_mesh(int n) {
  if (n < 2) throw std::invalid_argument("build_unit_square_mesh: n must be >= 2");
  Mesh mesh;
  const int m = n + 1;
  mesh.nodes.reserve(static_cast<std::size_t>(m) * m);
  const double h = 1.0 / n;
  for (int j = 0; j < m; ++j)
    for (int i = 0; i < m; ++i)
      mesh.nodes.push_back({i * h, j * h});

  auto id = [m](int i, int j) { return j * m + i; };
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const int p00 = id(i, j), p10 = id(i + 1, j), p01 = id(i, j + 1),
                p11 = id(i + 1, j + 1);
      mesh.triangles.push_back({p00, p10, p11});
      mesh.triangles.push_back({p00, p11, p01});
    }
  }
  for (int i = 0; i < n; ++i) {
    mesh.boundary_edges.push_back({id(i, 0), id(i + 1, 0), BoundaryLabel::Gamma0, {0.0, -1.0}});
    mesh.boundary_edges.push_back({id(i, n), id(i + 1, n), BoundaryLabel::Gamma0, {0.0, 1.0}});
    mesh.boundary_edges.push_back({id(0, i), id(0, i + 1), BoundaryLabel::Gamma0, {-1.0, 0.0}});
    mesh.boundary_edges.push_back({id(n, i), id(n, i + 1), BoundaryLabel::Gamma0, {1.0, 0.0}});
  }
  mesh.validate();
  return mesh;
}

Mesh build_annulus_mesh(double r_inner, double r_outer, double resolution) {
  if (!(r_inner > 0.0) || !(r_inner < r_outer))
    throw std::invalid_argument("build_annulus_mesh: need 0 < r_inner < r_outer");
  if (!(resolution > 0.0))
    throw std::invalid_argument("build_annulus_mesh: resolution must be positive");

  const double pi = std::acos(-1.0);
  const int nr = std::max(2, static_cast<int>(std::lround((r_outer - r_inner) / resolution)));
  const int nt = std::max(8, static_cast<int>(std::lround(2.0 * pi * r_outer / resolution)));

  Mesh mesh;
  mesh.nodes.reserve(static_cast<std::size_t>(nr + 1) * nt);
  for (int k = 0; k <= nr; ++k) {
    const double r = r_inner + (r_outer - r_inner) * k / nr;
    for (int i = 0; i < nt; ++i) {
      const double th = 2.0 * pi * i / nt;
      mesh.nodes.push_back({r * std::cos(th), r * std::sin(th)});
    }
  }
  auto id = [nt](int ring, int i) { return ring * nt + ((i % nt + nt) % nt); };
  for (int k = 0; k < nr; ++k) {
    for (int i = 0; i < nt; ++i) {
      const int p00 = id(k, i), p10 = id(k, i + 1), p01 = id(k + 1, i),
                p11 = id(k + 1, i + 1);
      // radius increases along `ring`, angle along `i`; this ordering is CCW
      mesh.triangles.push_back({p00, p11, p10});
      mesh.triangles.push_back({p00, p01, p11});
    }
  }
  auto unit_normal_of_chord = [&](int a, int b, double sign) {
    // rotate the chord a->b by -90 degrees, then orient with `sign`
    const double ex = mesh.nodes[b][0] - mesh.nodes[a][0];
    const double ey = mesh.nodes[b][1] - mesh.nodes[a][1];
    const double len = std::hypot(ex, ey);
    std::array<double, 2> n{ey / len, -ex / len};
    const double mx = 0.5 * (mesh.nodes[a][0] + mesh.nodes[b][0]);
    const double my = 0.5 * (mesh.nodes[a][1] + mesh.nodes[b][1]);
    if (sign * (n[0] * mx + n[1] * my) < 0.0) {
      n[0] = -n[0];
      n[1] = -n[1];
    }
    return n;
  };
  for (int i = 0; i < nt; ++i) {
    // inner circle: Gamma1, normal toward the center
    mesh.boundary_edges.push_back(
        {id(0, i), id(0, i + 1), BoundaryLabel::Gamma1, unit_normal_of_chord(id(0, i), id(0, i + 1), -1.0)});
    // outer circle: Gamma0, normal away from the center
    mesh.boundary_edges.push_back(
        {id(nr, i), id(nr, i + 1), BoundaryLabel::Gamma0, unit_normal_of_chord(id(nr, i), id(nr, i + 1), +1.0)});
  }
  mesh.validate();
  return mesh;
}

GeometryReport check_geometric_assumptions(const Mesh& mesh,
                                           const std::array<double, 2>& x0) {
  GeometryReport rep;
  rep.h_dot_nu_per_edge.reserve(mesh.boundary_edges.size());

  std::set<int> g0_nodes, g1_nodes;
  bool has_g1 = false;
  double max_hnu = -std::numeric_limits<double>::infinity();
  for (const auto& e : mesh.boundary_edges) {
    const double mx = 0.5 * (mesh.nodes[e.a][0] + mesh.nodes[e.b][0]);
    const double my = 0.5 * (mesh.nodes[e.a][1] + mesh.nodes[e.b][1]);
    const double hnu = (mx - x0[0]) * e.normal[0] + (my - x0[1]) * e.normal[1];
    rep.h_dot_nu_per_edge.push_back(hnu);
    if (e.label == BoundaryLabel::Gamma1) {
      has_g1 = true;
      max_hnu = std::max(max_hnu, hnu);
      g1_nodes.insert(e.a);
      g1_nodes.insert(e.b);
    } else {
      g0_nodes.insert(e.a);
      g0_nodes.insert(e.b);
    }
  }

  if (!has_g1) {
    rep.min_separation = std::numeric_limits<double>::infinity();
    rep.max_h_dot_nu_on_gamma1 = 0.0;
    rep.partition_condition_satisfied = true;
    return rep;
  }

  double min_sep = std::numeric_limits<double>::infinity();
  for (int i : g0_nodes)
    for (int j : g1_nodes)
      min_sep = std::min(min_sep, std::hypot(mesh.nodes[i][0] - mesh.nodes[j][0],
                                             mesh.nodes[i][1] - mesh.nodes[j][1]));
  rep.min_separation = g0_nodes.empty() ? std::numeric_limits<double>::infinity() : min_sep;
  rep.max_h_dot_nu_on_gamma1 = max_hnu;
  rep.partition_condition_satisfied = (rep.min_separation > 0.0) && (max_hnu <= 0.0);
  return rep;
}

void set_uniform_boundary_label(Mesh& mesh, BoundaryLabel label) {
  for (auto& e : mesh.boundary_edges) e.label = label;
}

nlohmann::json mesh_to_json(const Mesh& mesh) {
  nlohmann::json j;
  j["nodes"] = nlohmann::json::array();
  for (const auto& p : mesh.nodes) j["nodes"].push_back({p[0], p[1]});
  j["triangles"] = nlohmann::json::array();
  for (const auto& t : mesh.triangles) j["triangles"].push_back({t[0], t[1], t[2]});
  j["boundary_edges"] = nlohmann::json::array();
  for (const auto& e : mesh.boundary_edges)
    j["boundary_edges"].push_back(
        {e.a, e.b, static_cast<int>(e.label), e.normal[0], e.normal[1]});
  return j;
}

Mesh mesh_from_json(const nlohmann::json& j) {
  Mesh mesh;
  for (const auto& p : j.at("nodes"))
    mesh.nodes.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
  for (const auto& t : j.at("triangles"))
    mesh.triangles.push_back({t.at(0).get<int>(), t.at(1).get<int>(), t.at(2).get<int>()});
  for (const auto& e : j.at("boundary_edges")) {
    BoundaryEdge be;
    be.a = e.at(0).get<int>();
    be.b = e.at(1).get<int>();
    be.label = static_cast<BoundaryLabel>(e.at(2).get<int>());
    be.normal = {e.at(3).get<double>(), e.at(4).get<double>()};
    mesh.boundary_edges.push_back(be);
  }
  mesh.validate();
  return mesh;
}

}  // namespace wavefb
