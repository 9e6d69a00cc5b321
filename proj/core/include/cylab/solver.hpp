#pragma once

#include <Eigen/Core>

#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "cylab/geometry.hpp"
#include "cylab/mesh.hpp"
#include "cylab/operators.hpp"

namespace cylab::solver {

/// Flux field in the chart the mesh lives in: flux(pos, q, eps), with an
/// optional analytic tangent, a frozen-coefficient matrix for the Picard
/// fallback, and the variational density when the flux is a gradient map.
struct FluxField {
  std::function<Eigen::Vector2d(const Eigen::Vector2d&, const Eigen::Vector2d&, double)> flux;
  std::function<Eigen::Matrix2d(const Eigen::Vector2d&, const Eigen::Vector2d&, double)> tangent;
  std::function<Eigen::Matrix2d(const Eigen::Vector2d&, const Eigen::Vector2d&, double)> picard;
  std::function<double(const Eigen::Vector2d&, const Eigen::Vector2d&)> energy_density;
  bool spd_tangent = true;          ///< tangent matrices are symmetric positive definite
  bool linear = false;              ///< flux linear in q; a single Newton step solves
  bool mirror_equivariant = false;  ///< commutes with the reflection across y = 0
};

FluxField make_cylinder_field(const operators::CoefficientMap& map);
FluxField make_ball_field(const operators::TransformedMap& map);
/// Weighted p-Laplace flux |pos|^{p-n} |q|^{p-2} q used by the capacities.
FluxField make_weighted_plaplace_field(double p, int n = 2);

/// Optional zero-order term: adds the integral of w(pos) |v|^p / p to the
/// minimized energy.
struct ZeroOrderTerm {
  std::function<double(const Eigen::Vector2d&)> weight;
  double p = 2.0;
};

struct MixedProblem {
  std::shared_ptr<const mesh::Mesh> mesh;
  FluxField field;
  /// Per-vertex Dirichlet data; vertices without a value are free unknowns
  /// (the natural, zero-conormal condition).
  std::vector<std::optional<double>> dirichlet;
  std::vector<double> epsilon_schedule = default_epsilon_schedule();
  double tol = 1e-10;
  int max_iter = 50;
  bool exploit_symmetry = true;
  std::optional<ZeroOrderTerm> zero_order;

  static std::vector<double> default_epsilon_schedule();
};

struct SolveReport {
  mesh::DiscreteField field;
  /// Norm of the assembled residual over the free unknowns, relative to the
  /// initial residual (floored at one).  converged implies <= tol.
  double residual_norm = 0.0;
  int iterations = 0;
  std::optional<double> energy;
  bool converged = false;
};

/// Damped Newton with epsilon continuation on the regularized flux, CG with
/// diagonal preconditioning (1e-12 relative) for SPD tangents and sparse LU
/// otherwise, residual-norm backtracking, and a damped Picard fallback.
/// Dirichlet values are attained exactly at tagged vertices.  For a
/// mirror-symmetric mesh, data and flux the output is exactly symmetric: the
/// solve runs on the symmetry-reduced unknowns.  Returns converged = false
/// after max_iter; throws on structural errors (no Dirichlet vertex, or a
/// singular step surviving the Picard fallback).
SolveReport solve(const MixedProblem& problem);

/// Dirichlet assignments for all vertices incident to a dirichlet-tagged
/// boundary edge, evaluated at representative coordinates so mirror-symmetric
/// meshes receive bitwise symmetric data.
std::vector<std::optional<double>> dirichlet_from_tags(
    const mesh::Mesh& m, const std::function<double(const Eigen::Vector2d&)>& data);

/// Interpolates a ball-chart field at the images of the strip vertices.
/// Refuses extrapolation outside the ball mesh.
mesh::DiscreteField pull_back(std::shared_ptr<const mesh::Mesh> strip,
                              const mesh::DiscreteField& ball_field,
                              const geometry::TransformParams& params);

/// Interpolates a strip-chart field at the preimages of the ball vertices,
/// using the mirror extension for the lower half-ball.
mesh::DiscreteField push_forward(std::shared_ptr<const mesh::Mesh> ball,
                                 const mesh::DiscreteField& strip_field,
                                 const geometry::TransformParams& params);

/// Annulus whose rings are exactly the images of the strip's mesh rows.
std::shared_ptr<const mesh::Mesh> make_matched_annulus(
    const mesh::Mesh& strip, const geometry::TransformParams& params, int sectors,
    mesh::EdgeTag inner_tag = mesh::EdgeTag::inner_hole);

/// ( integral of |v|^p e^{-p kappa x_n} + |grad v|^p )^{1/p} on the strip.
double lkappa_norm(const mesh::DiscreteField& strip_field, double kappa, double p);

/// Nodewise ordering check for two solves on the same mesh with ordered data:
/// returns whether u1 <= u2 + slack everywhere, slack = 1e-8 + allowance.
bool comparison_check(const SolveReport& u1, const SolveReport& u2, double allowance = 1e-6);

}  // namespace cylab::solver
