#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cylab/geometry.hpp"

namespace cylab::mesh {
struct Mesh;
struct DiscreteField;
}  // namespace cylab::mesh

namespace cylab::operators {

enum class MapKind { p_laplace, exp_dir, custom };

/// Flux map A(x, q) on the cylinder satisfying the ellipticity structure
/// conditions with exponent p > 1 and constants 0 < alpha1 <= alpha2:
/// coercivity A.q >= alpha1 |q|^p, growth |A| <= alpha2 |q|^{p-1},
/// (p-1)-homogeneity in q and strict monotonicity.  Immutable after
/// construction; evaluation is pure and thread-safe.
class CoefficientMap {
 public:
  using CustomFlux =
      std::function<Eigen::VectorXd(const geometry::CylinderPoint&, const Eigen::VectorXd&)>;

  static CoefficientMap p_laplace(double p);

  /// A(x, q) = exp((q/|q|) . q0) q with p = 2.  Rejects |q0| >= 1/sqrt(2);
  /// below that bound strict monotonicity is unconditional.
  static CoefficientMap exp_dir(Eigen::VectorXd q0);

  /// User-supplied flux.  alpha1/alpha2 are the caller's claim and are only
  /// checked empirically by verify_axioms.  `odd_symmetric` declares
  /// A(x,-q) = -A(x,q), which extends the homogeneity certification to
  /// negative scalings.
  static CoefficientMap custom(double p, double alpha1, double alpha2, CustomFlux flux,
                               bool odd_symmetric = false);

  MapKind kind() const { return kind_; }
  double p() const { return p_; }
  double alpha1() const { return alpha1_; }
  double alpha2() const { return alpha2_; }
  bool odd_symmetric() const { return odd_; }
  const Eigen::VectorXd& q0() const { return q0_; }

  /// Exact flux; total in q with A(x, 0) = 0.
  Eigen::VectorXd eval(const geometry::CylinderPoint& x, const Eigen::VectorXd& q) const;

  // 2D assembly interface.  `eps` is the regularization parameter of the
  // Newton continuation; eps = 0 gives the exact flux.
  Eigen::Vector2d flux2(const Eigen::Vector2d& x, const Eigen::Vector2d& q, double eps) const;
  bool has_analytic_tangent() const { return kind_ == MapKind::p_laplace; }
  Eigen::Matrix2d tangent2(const Eigen::Vector2d& x, const Eigen::Vector2d& q, double eps) const;
  /// Frozen scalar coefficient for the damped Picard fallback.
  double picard_coef2(const Eigen::Vector2d& x, const Eigen::Vector2d& q, double eps) const;
  /// Unregularized variational density, when the flux is a gradient field.
  std::optional<double> energy_density2(const Eigen::Vector2d& x, const Eigen::Vector2d& q) const;

 private:
  CoefficientMap() = default;
  MapKind kind_ = MapKind::p_laplace;
  double p_ = 2.0;
  double alpha1_ = 1.0;
  double alpha2_ = 1.0;
  bool odd_ = true;
  Eigen::VectorXd q0_;
  CustomFlux custom_;
};

/// Radial weight |xi|^{p-n} attached to the transformed operator.
struct Weight {
  double p = 2.0;
  int n = 2;

  double at_radius(double r) const;
  double operator()(const Eigen::VectorXd& xi) const;
};

inline double weight_at(const Weight& w, const geometry::BallPoint& xi) { return w(xi.xi); }

/// Pushforward B(xi, q) = |J(x)|^{-1} dT(x) A(x, dT*(x) q) of a coefficient
/// map under the cylinder-to-ball change of variables, with the optional
/// mirror extension B(xi, q) = P B(P xi, P q) to the lower half-ball.
/// Satisfies weighted ellipticity with the weight |xi|^{p-n} and inherits
/// homogeneity and monotonicity.  Differentials are recomputed from closed
/// forms on every call.
class TransformedMap {
 public:
  TransformedMap(CoefficientMap base, geometry::TransformParams params, bool reflected);

  const CoefficientMap& base() const { return base_; }
  const geometry::TransformParams& params() const { return params_; }
  bool reflected() const { return reflected_; }
  Weight weight() const { return Weight{base_.p(), params_.n}; }

  /// Exact flux.  Rejects xi = 0 and, unless reflected, xi_n < 0.
  Eigen::VectorXd eval(const geometry::BallPoint& xi, const Eigen::VectorXd& q) const;

  // 2D assembly interface (params.n == 2 only).
  Eigen::Vector2d flux2(const Eigen::Vector2d& xi, const Eigen::Vector2d& q, double eps) const;
  bool has_analytic_tangent() const { return base_.has_analytic_tangent(); }
  Eigen::Matrix2d tangent2(const Eigen::Vector2d& xi, const Eigen::Vector2d& q, double eps) const;
  /// Frozen-coefficient matrix for the Picard fallback; keeps the anisotropy.
  Eigen::Matrix2d picard_matrix2(const Eigen::Vector2d& xi, const Eigen::Vector2d& q,
                                 double eps) const;
  std::optional<double> energy_density2(const Eigen::Vector2d& xi, const Eigen::Vector2d& q) const;

 private:
  CoefficientMap base_;
  geometry::TransformParams params_;
  bool reflected_ = true;
};

struct AxiomViolation {
  std::string axiom;
  double value = 0.0;
};

/// Result of a randomized certification run.  Violations are data, not
/// failures: an empty list certifies the sampled axioms.
struct AxiomReport {
  long samples = 0;
  double empirical_alpha1 = 0.0;      ///< min A.q / |q|^p (weighted for B)
  double empirical_alpha2 = 0.0;      ///< max |A| / |q|^{p-1} (weighted for B)
  double min_monotonicity_gap = 0.0;  ///< min (A(q1)-A(q2)).(q1-q2) over sampled pairs
  double max_homogeneity_rel_err = 0.0;
  std::vector<double> lambdas_tested;
  std::vector<AxiomViolation> violations;  ///< capped at 16 entries
  long violation_count = 0;

  bool ok() const { return violation_count == 0; }
};

AxiomReport verify_axioms(const CoefficientMap& map, int sample_count, std::uint64_t seed,
                          int dim = 2);
AxiomReport verify_axioms(const TransformedMap& map, int sample_count, std::uint64_t seed);

struct AngularReport {
  long samples = 0;
  double min_margin = 0.0;  ///< min of ratio - threshold over sampled direction pairs
  long violation_count = 0;

  bool ok() const { return violation_count == 0; }
};

/// Checks the acute-angle ratio condition for the exp_dir family:
/// a(t')/a(t) > (1 - sin alpha)/(1 + sin alpha) whenever t . t' = cos alpha > 0.
AngularReport verify_angular_condition(const Eigen::VectorXd& q0, int sample_count,
                                       std::uint64_t seed);

struct EnergyComparison {
  double gradient_cylinder = 0.0;  ///< integral of |grad u|^p over the strip
  double gradient_ball = 0.0;      ///< integral of |grad u~|^p w over the image
  double order0_cylinder = 0.0;    ///< integral of |u|^p e^{-p kappa x_n}
  double order0_ball = 0.0;        ///< integral of |u~|^p w
};

/// Evaluates the comparable energy pairs on both charts: the strip integrals
/// by quadrature on the strip mesh, the ball integrals by quadrature of the
/// pushforward interpolant on the annulus mesh.
EnergyComparison compare_energy_norms(const mesh::Mesh& strip, const mesh::DiscreteField& u,
                                      const mesh::Mesh& annulus, double p,
                                      const geometry::TransformParams& params);

}  // namespace cylab::operators
