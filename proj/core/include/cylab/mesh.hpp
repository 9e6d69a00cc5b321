#pragma once

#include <Eigen/Core>

#include <array>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

// Structured conforming triangulations of the two computational domains:
// the truncated strip (cylinder chart) and the disk/annulus with geometric
// radial grading (ball chart).  Meshes are immutable once built and safe to
// share across threads.

namespace cylab::mesh {

enum class EdgeTag { dirichlet, neumann, inner_hole };
const char* to_string(EdgeTag tag);

struct BoundaryEdge {
  int v0;
  int v1;
  EdgeTag tag;
};

/// Product-grid layout of a strip mesh; kept for O(1) point location.
struct StripLayout {
  std::vector<double> xs;
  std::vector<double> ys;
};

/// Polar product-grid layout of a disk/annulus mesh.
struct PolarLayout {
  std::vector<double> radii;
  int sectors = 0;
};

struct Mesh {
  std::vector<Eigen::Vector2d> vertices;
  std::vector<std::array<int, 3>> triangles;
  std::vector<BoundaryEdge> boundary_edges;
  /// Vertex involution realizing the mirror symmetry across y = 0; empty when
  /// the mesh is not mirror-symmetric.  Mirror vertices match exactly.
  std::vector<int> symmetry_map;
  std::variant<std::monostate, StripLayout, PolarLayout> layout;

  int vertex_count() const { return static_cast<int>(vertices.size()); }
  int triangle_count() const { return static_cast<int>(triangles.size()); }
  bool has_symmetry() const { return !symmetry_map.empty(); }
  double triangle_area(int t) const;

  /// Checks conformity, orientation, tag totality and symmetry exactness.
  /// Throws std::runtime_error on the first violated invariant.
  void validate() const;
};

struct StripOptions {
  double height_min = 0.0;
  double height_max = 1.0;
  double h = 0.1;  ///< target spacing, in (0, 0.5]
  EdgeTag base_tag = EdgeTag::dirichlet;
  EdgeTag lid_tag = EdgeTag::dirichlet;
  /// Height spans of the lateral boundary carrying Dirichlet data; lateral
  /// edges outside every span are tagged neumann.
  std::vector<std::pair<double, double>> lateral_dirichlet_spans;
  std::vector<double> snap_heights;  ///< extra mesh rows
  std::vector<double> snap_cross;    ///< extra mesh columns in (-1, 1)
};

/// Regular grid on (-1,1) x (height_min, height_max), each cell split into
/// two triangles.
std::shared_ptr<const Mesh> make_strip(const StripOptions& opts);
std::shared_ptr<const Mesh> make_strip(double height, double h);

struct DiskOptions {
  double r_outer = 1.0;
  double r_inner = 0.0;          ///< 0 requests a punctured disk
  double puncture_delta = 1e-6;  ///< hole radius relative to r_outer when punctured
  int rings = 0;                 ///< 0 = derive from grading_ratio
  double grading_ratio = 1.5;    ///< max ratio between adjacent ring radii
  int sectors = 64;              ///< must be even
  EdgeTag inner_tag = EdgeTag::inner_hole;
  EdgeTag outer_tag = EdgeTag::dirichlet;
  std::vector<double> snap_radii;
};

/// Polar product grid with geometric radial grading toward the center,
/// mirror-symmetric across the y = 0 axis (exactly, by construction).
std::shared_ptr<const Mesh> make_disk_annulus(const DiskOptions& opts);

/// Nested quadrisection: every triangle is split into four via edge
/// midpoints, so the coarse P1 space is a subspace of the refined one.
/// Boundary tags are inherited and mirror symmetry is preserved exactly.
std::shared_ptr<const Mesh> refine(const Mesh& m);

struct CellGeometry {
  std::array<Eigen::Vector2d, 3> grad;  ///< constant gradients of the nodal basis
  double area;
  Eigen::Vector2d barycenter;
};
using GradientTables = std::vector<CellGeometry>;

/// Per-triangle constant basis gradients, areas and barycenters.  For any
/// nodal linear function a x + b y + c the reconstructed gradient is (a, b)
/// exactly per triangle.
GradientTables assemble_gradient_tables(const Mesh& m);

enum class QuadratureRule { barycenter, three_point };

struct QuadPoint {
  Eigen::Vector2d pos;
  double weight;
  std::array<double, 3> shape;  ///< nodal basis values at pos
};

/// Quadrature points on triangle t: the one-point barycenter rule (default in
/// assembly) or the degree-2 exact three-point edge-midpoint rule.
void quadrature_points(const Mesh& m, int t, QuadratureRule rule, std::vector<QuadPoint>& out);

/// Nodal values of a piecewise-linear function on a mesh.
struct DiscreteField {
  std::shared_ptr<const Mesh> mesh;
  Eigen::VectorXd values;

  DiscreteField() = default;
  DiscreteField(std::shared_ptr<const Mesh> mesh_, Eigen::VectorXd values_);
};

struct Location {
  int triangle;
  std::array<double, 3> barycentric;
};

/// Point location with barycentric tolerance `tol`; uses the structured
/// layout when available and falls back to a full scan.  Returns nullopt for
/// points outside the mesh.
std::optional<Location> locate(const Mesh& m, const Eigen::Vector2d& pt, double tol = 1e-9);

/// P1 interpolation at a point; refuses extrapolation (throws
/// std::domain_error when the point lies outside the mesh).
double interpolate(const DiscreteField& f, const Eigen::Vector2d& pt, double tol = 1e-9);

/// Writes vertices.csv (id,x,y), triangles.csv (v0,v1,v2), edges.csv (v0,v1,tag).
void write_mesh_csv(const Mesh& m, const std::filesystem::path& dir);

}  // namespace cylab::mesh
