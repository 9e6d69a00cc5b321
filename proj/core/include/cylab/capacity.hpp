#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cylab/mesh.hpp"
#include "cylab/solver.hpp"

namespace cylab::capacity {

/// One piece of the closed Dirichlet set: the base disk of the cylinder, a
/// lateral-boundary strip between two heights, or a (possibly partial)
/// cross-sectional slab.
struct Block {
  enum class Kind { base, lateral, slab };
  Kind kind = Kind::base;
  double t0 = 0.0;
  double t1 = 0.0;
  double cross_fraction = 1.0;  ///< slab only, in (0, 1]

  void validate() const;
};

/// Finite machine description of a closed subset of the cylinder closure.
struct BlockSet {
  std::vector<Block> blocks;

  bool contains_base() const;
  void validate() const;
  double max_height() const;  ///< sup of t1 over lateral/slab blocks (0 when none)
  /// Lateral/slab blocks intersected with [lo, hi]; pieces narrower than
  /// min_width are dropped and reported by the caller as unresolved.
  std::vector<Block> clip(double lo, double hi, double min_width = 1e-9) const;
};

struct CapacityEstimate {
  double value = 0.0;             ///< the discrete infimum (equals minimizer_energy)
  double minimizer_energy = 0.0;
  double mesh_h = 0.0;
  std::optional<double> refined_value;  ///< one nested refinement, when requested
  int iterations = 0;
  bool converged = false;
  bool unresolved_blocks = false;  ///< sub-tolerance blocks were dropped
};

struct CapacityOptions {
  int sectors = 64;
  double grading_ratio = 1.2;  ///< radial grading of the ball meshes
  double h = 0.1;              ///< strip spacing for the Neumann capacity
  double tol = 1e-10;
  int max_iter = 60;
  bool refine_once = false;
  int threads = 0;  ///< grid-level parallelism; 0 = THREADS env or hardware
};

/// Weighted condenser capacity: inf of the |xi|^{p-n}-weighted p-energy over
/// v = 1 on the closed ball of radius rho, v = 0 outside radius r.
CapacityEstimate condenser_capacity_ball(double rho, double r, double p, int n,
                                         const CapacityOptions& opts = {});

/// Weighted Sobolev capacity of the closed ball of radius rho; admissible
/// fields are supported in the disk of radius support_radius.
CapacityEstimate sobolev_capacity_ball(double rho, double p, int n,
                                       const CapacityOptions& opts = {},
                                       double support_radius = 1.0);

/// Weighted Sobolev capacity of the ball image of a block set.
CapacityEstimate sobolev_capacity(const BlockSet& K, double kappa, double p, int n,
                                  const CapacityOptions& opts = {});

/// Variational capacity of K relative to the cylinder truncated below height
/// t-1: inf of the unweighted p-energy over v >= 1 on K and v = 0 at heights
/// <= t-1, with the lateral boundary left free.
CapacityEstimate neumann_capacity(const BlockSet& K, double t, double p,
                                  const CapacityOptions& opts = {});

/// cap(F intersected with the window [t, 2t])^{1/(p-1)}; zero when the
/// intersection is empty.
double wiener_integrand(const BlockSet& F, double t, double p, const CapacityOptions& opts = {});

enum class Regularity { regular, irregular, inconclusive };
const char* to_string(Regularity r);

struct WienerRow {
  double t = 0.0;
  double capacity = 0.0;
  double integrand = 0.0;
  double partial_integral = 0.0;
};

struct RegularityReport {
  Regularity verdict = Regularity::inconclusive;
  std::vector<WienerRow> rows;
  double fitted_c = 0.0;  ///< tail fit integrand(t) ~ c t^{-beta}
  double fitted_beta = 0.0;
  bool tail_vanishes = false;
  std::string detail;
};

/// Geometric grid 2^{k/2}, k = 0..8.
std::vector<double> default_t_grid();

/// Finite-evidence classifier for the divergence of the capacity integral:
/// computes the integrand on the grid and the trapezoidal partial integrals,
/// then fits the tail as c t^{-beta}.  Verdict: regular when beta <= 0.9 and
/// c > 0; irregular when beta >= 1.5 or the tail integrand falls below 1e-10;
/// inconclusive otherwise.  Deterministic given (F, p, t_grid).  Grid points
/// may be evaluated concurrently; results merge in grid order.
RegularityReport classify_regularity(const BlockSet& F, double p,
                                     const std::vector<double>& t_grid,
                                     const CapacityOptions& opts = {});

}  // namespace cylab::capacity
