#pragma once

#include <Eigen/Core>
#include <Eigen/LU>

#include <cmath>
#include <stdexcept>

// Change of variables between the closed half-cylinder  B' x [0,inf)  and the
// punctured closed upper unit half-ball, together with its differential,
// Jacobian, the reflection across the equatorial hyperplane and the
// height/radius correspondence.  All maps are pure functions on immutable
// values and safe to call concurrently.

namespace cylab::geometry {

/// Parameters of the change of variables.
struct TransformParams {
  double kappa = 1.0;  ///< radial decay rate: |T(x)| = exp(-kappa * x_n)
  int n = 2;           ///< ambient dimension, >= 2

  TransformParams() = default;
  TransformParams(double kappa_, int n_) : kappa(kappa_), n(n_) {
    if (!(kappa > 0.0) || !std::isfinite(kappa))
      throw std::invalid_argument("TransformParams: kappa must be finite and > 0");
    if (n < 2) throw std::invalid_argument("TransformParams: n must be >= 2");
  }
};

/// Point x = (x', x_n) of the closed half-cylinder: |x'| <= 1, finite axial
/// coordinate.  `cross` has length n-1.
struct CylinderPoint {
  Eigen::VectorXd cross;
  double height = 0.0;

  CylinderPoint() = default;
  CylinderPoint(Eigen::VectorXd cross_, double height_)
      : cross(std::move(cross_)), height(height_) {
    if (!cross.allFinite() || !std::isfinite(height))
      throw std::invalid_argument("CylinderPoint: coordinates must be finite");
    if (cross.norm() > 1.0 + 1e-12)
      throw std::invalid_argument("CylinderPoint: |x'| must be <= 1");
  }
};

/// Point of the (possibly reflected) closed unit ball.  The origin is never a
/// valid image point; constructing it is allowed only for intermediate
/// arithmetic, and the maps below reject it explicitly.
struct BallPoint {
  Eigen::VectorXd xi;

  BallPoint() = default;
  explicit BallPoint(Eigen::VectorXd xi_) : xi(std::move(xi_)) {
    if (!xi.allFinite())
      throw std::invalid_argument("BallPoint: coordinates must be finite");
  }
};

namespace detail {

// xi = e^{-kappa h} * (2 x' / (1+|x'|^2), (1-|x'|^2)/(1+|x'|^2))
template <class DerivedC, class DerivedX>
void forward_into(const Eigen::MatrixBase<DerivedC>& cross, double height, double kappa,
                  Eigen::MatrixBase<DerivedX>& xi) {
  const auto m = cross.size();
  const double s = cross.squaredNorm();
  const double denom = 1.0 + s;
  const double decay = std::exp(-kappa * height);
  xi.derived().resize(m + 1);
  xi.head(m) = (2.0 * decay / denom) * cross;
  xi(m) = decay * (1.0 - s) / denom;
}

// x' = xi' / (|xi| + xi_n),  x_n = -log|xi| / kappa
template <class DerivedX, class DerivedC>
double inverse_into(const Eigen::MatrixBase<DerivedX>& xi, double kappa,
                    Eigen::MatrixBase<DerivedC>& cross) {
  const auto m = xi.size() - 1;
  const double r = xi.norm();
  if (!(r > 0.0))
    throw std::domain_error("inverse transform: xi = 0 has no preimage");
  cross.derived().resize(m);
  cross = xi.head(m) / (r + xi(m));
  return -std::log(r) / kappa;
}

// Closed-form differential at x.  Rows are components of the image point,
// columns are partial derivatives in (x'_1..x'_{n-1}, x_n).  Returns the
// signed Jacobian determinant  -kappa e^{-n kappa x_n} (2/(1+|x'|^2))^{n-1}.
template <class DerivedC, class DerivedM>
double differential_into(const Eigen::MatrixBase<DerivedC>& cross, double height,
                         double kappa, Eigen::MatrixBase<DerivedM>& out) {
  const auto m = cross.size();
  const double s = cross.squaredNorm();
  const double denom = 1.0 + s;
  const double decay = std::exp(-kappa * height);
  const double a = 2.0 * decay / denom;
  const double b = 4.0 * decay / (denom * denom);

  out.derived().resize(m + 1, m + 1);
  for (Eigen::Index j = 0; j < m; ++j) {
    for (Eigen::Index i = 0; i < m; ++i)
      out(i, j) = (i == j ? a : 0.0) - b * cross(i) * cross(j);
    out(m, j) = -b * cross(j);
  }
  for (Eigen::Index i = 0; i < m; ++i) out(i, m) = -kappa * a * cross(i);
  out(m, m) = -kappa * decay * (1.0 - s) / denom;

  double jac = -kappa;
  for (Eigen::Index k = 0; k < m + 1; ++k) jac *= decay;
  for (Eigen::Index k = 0; k < m; ++k) jac *= 2.0 / denom;
  return jac;
}

}  // namespace detail

/// Sends the cylinder point (x', x_n) to the half-ball point of radius
/// exp(-kappa x_n).  Total on |x'| <= 1; smooth up to the closure.
inline BallPoint forward(const CylinderPoint& x, const TransformParams& params) {
  if (x.cross.size() + 1 != params.n)
    throw std::invalid_argument("forward: dimension mismatch");
  Eigen::VectorXd xi;
  detail::forward_into(x.cross, x.height, params.kappa, xi);
  return BallPoint{std::move(xi)};
}

/// Inverse of `forward`.  Rejects xi = 0 (the image of the point at infinity).
inline CylinderPoint inverse(const BallPoint& xi, const TransformParams& params) {
  if (xi.xi.size() != params.n)
    throw std::invalid_argument("inverse: dimension mismatch");
  Eigen::VectorXd cross;
  const double height = detail::inverse_into(xi.xi, params.kappa, cross);
  CylinderPoint x;
  x.cross = std::move(cross);
  x.height = height;
  return x;
}

struct Differential {
  Eigen::MatrixXd matrix;  ///< closed-form entries of the differential at x
  double jacobian = 0.0;   ///< signed determinant (negative for every n)
};

/// Closed-form differential and Jacobian determinant at x.
inline Differential differential(const CylinderPoint& x, const TransformParams& params) {
  if (x.cross.size() + 1 != params.n)
    throw std::invalid_argument("differential: dimension mismatch");
  Differential d;
  d.jacobian = detail::differential_into(x.cross, x.height, params.kappa, d.matrix);
  return d;
}

/// Reflection across the equatorial hyperplane: (xi', xi_n) -> (xi', -xi_n).
/// An exact isometric involution.
inline BallPoint reflect(const BallPoint& p) {
  BallPoint q = p;
  q.xi(q.xi.size() - 1) = -q.xi(q.xi.size() - 1);
  return q;
}

/// Ball radius corresponding to cylinder height t >= 0.
inline double radius_for_height(double t, double kappa) {
  if (!(t >= 0.0) || !std::isfinite(t))
    throw std::invalid_argument("radius_for_height: t must be finite and >= 0");
  return std::exp(-kappa * t);
}

/// Cylinder height corresponding to ball radius r in (0, 1].
inline double height_for_radius(double r, double kappa) {
  if (!(r > 0.0) || r > 1.0)
    throw std::invalid_argument("height_for_radius: r must be in (0, 1]");
  return -std::log(r) / kappa;
}

}  // namespace cylab::geometry
