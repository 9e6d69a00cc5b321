#include "cylab/operators.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "cylab/mesh.hpp"
#include "cylab/rng.hpp"

namespace cylab::operators {

namespace {

constexpr double kRelSlack = 1e-9;  // floating-point slack for axiom checks

struct Chart2 {
  Eigen::Matrix2d dT;
  double jac_abs;
  Eigen::Vector2d x;  // (cross coordinate, height)
};

Chart2 chart2_at(const Eigen::Vector2d& xi_upper, double kappa) {
  Eigen::Matrix<double, 1, 1> cross;
  const double height = geometry::detail::inverse_into(xi_upper, kappa, cross);
  Chart2 c;
  const double jac = geometry::detail::differential_into(cross, height, kappa, c.dT);
  c.jac_abs = std::abs(jac);
  c.x = {cross(0), height};
  return c;
}

Eigen::Matrix2d mirror_conjugate(const Eigen::Matrix2d& m) {
  Eigen::Matrix2d out = m;
  out(0, 1) = -out(0, 1);
  out(1, 0) = -out(1, 0);
  return out;
}

}  // namespace

CoefficientMap CoefficientMap::p_laplace(double p) {
  if (!(p > 1.0) || !std::isfinite(p))
    throw std::invalid_argument("p_laplace: exponent must satisfy p > 1");
  CoefficientMap m;
  m.kind_ = MapKind::p_laplace;
  m.p_ = p;
  m.alpha1_ = m.alpha2_ = 1.0;
  m.odd_ = true;
  return m;
}

CoefficientMap CoefficientMap::exp_dir(Eigen::VectorXd q0) {
  const double norm = q0.norm();
  if (!(norm < 1.0 / std::sqrt(2.0)))
    throw std::invalid_argument("exp_dir: |q0| must be < 1/sqrt(2)");
  CoefficientMap m;
  m.kind_ = MapKind::exp_dir;
  m.p_ = 2.0;
  m.alpha1_ = std::exp(-norm);
  m.alpha2_ = std::exp(norm);
  m.odd_ = (norm == 0.0);
  m.q0_ = std::move(q0);
  return m;
}

CoefficientMap CoefficientMap::custom(double p, double alpha1, double alpha2, CustomFlux flux,
                                      bool odd_symmetric) {
  if (!(p > 1.0)) throw std::invalid_argument("custom map: exponent must satisfy p > 1");
  if (!(alpha1 > 0.0) || !(alpha1 <= alpha2))
    throw std::invalid_argument("custom map: need 0 < alpha1 <= alpha2");
  if (!flux) throw std::invalid_argument("custom map: null flux");
  CoefficientMap m;
  m.kind_ = MapKind::custom;
  m.p_ = p;
  m.alpha1_ = alpha1;
  m.alpha2_ = alpha2;
  m.odd_ = odd_symmetric;
  m.custom_ = std::move(flux);
  return m;
}

Eigen::VectorXd CoefficientMap::eval(const geometry::CylinderPoint& x,
                                     const Eigen::VectorXd& q) const {
  switch (kind_) {
    case MapKind::p_laplace: {
      const double q2 = q.squaredNorm();
      if (q2 == 0.0) return Eigen::VectorXd::Zero(q.size());
      return std::pow(q2, 0.5 * (p_ - 2.0)) * q;
    }
    case MapKind::exp_dir: {
      const double qn = q.norm();
      if (qn == 0.0) return Eigen::VectorXd::Zero(q.size());
      if (q.size() != q0_.size())
        throw std::invalid_argument("exp_dir: dimension mismatch between q and q0");
      return std::exp(q.dot(q0_) / qn) * q;
    }
    case MapKind::custom:
      return custom_(x, q);
  }
  throw std::logic_error("unreachable map kind");
}

Eigen::Vector2d CoefficientMap::flux2(const Eigen::Vector2d& x, const Eigen::Vector2d& q,
                                      double eps) const {
  switch (kind_) {
    case MapKind::p_laplace: {
      const double t = eps * eps + q.squaredNorm();
      if (t == 0.0) return Eigen::Vector2d::Zero();
      return std::pow(t, 0.5 * (p_ - 2.0)) * q;
    }
    case MapKind::exp_dir: {
      const double t = eps * eps + q.squaredNorm();
      if (t == 0.0) return Eigen::Vector2d::Zero();
      return std::exp(q.dot(q0_.head<2>()) / std::sqrt(t)) * q;
    }
    case MapKind::custom: {
      geometry::CylinderPoint cx(Eigen::VectorXd::Constant(1, x.x()), x.y());
      return custom_(cx, q);
    }
  }
  throw std::logic_error("unreachable map kind");
}

Eigen::Matrix2d CoefficientMap::tangent2(const Eigen::Vector2d& /*x*/, const Eigen::Vector2d& q,
                                         double eps) const {
  if (kind_ != MapKind::p_laplace)
    throw std::logic_error("tangent2: analytic tangent only for the p-Laplace map");
  const double t = eps * eps + q.squaredNorm();
  if (t == 0.0) {
    // Unregularized limit at q = 0: the identity for p = 2, zero for p > 2.
    if (p_ == 2.0) return Eigen::Matrix2d::Identity();
    return Eigen::Matrix2d::Zero();
  }
  const double s = std::pow(t, 0.5 * (p_ - 2.0));
  return s * (Eigen::Matrix2d::Identity() + ((p_ - 2.0) / t) * (q * q.transpose()));
}

double CoefficientMap::picard_coef2(const Eigen::Vector2d& x, const Eigen::Vector2d& q,
                                    double eps) const {
  switch (kind_) {
    case MapKind::p_laplace: {
      const double t = eps * eps + q.squaredNorm();
      return t == 0.0 ? 1.0 : std::pow(t, 0.5 * (p_ - 2.0));
    }
    case MapKind::exp_dir: {
      const double t = eps * eps + q.squaredNorm();
      return t == 0.0 ? 1.0 : std::exp(q.dot(q0_.head<2>()) / std::sqrt(t));
    }
    case MapKind::custom: {
      const double qn = q.norm();
      if (qn < 1e-14) return 1.0;
      return flux2(x, q, eps).norm() / qn;
    }
  }
  throw std::logic_error("unreachable map kind");
}

std::optional<double> CoefficientMap::energy_density2(const Eigen::Vector2d& /*x*/,
                                                      const Eigen::Vector2d& q) const {
  if (kind_ != MapKind::p_laplace) return std::nullopt;
  return std::pow(q.squaredNorm(), 0.5 * p_) / p_;
}

double Weight::at_radius(double r) const {
  if (!(r > 0.0)) throw std::domain_error("weight: undefined at the origin");
  return std::pow(r, p - n);
}

double Weight::operator()(const Eigen::VectorXd& xi) const { return at_radius(xi.norm()); }

TransformedMap::TransformedMap(CoefficientMap base, geometry::TransformParams params,
                               bool reflected)
    : base_(std::move(base)), params_(params), reflected_(reflected) {
  if (base_.kind() == MapKind::exp_dir && base_.q0().size() != params_.n)
    throw std::invalid_argument("TransformedMap: exp_dir direction dimension must equal n");
}

Eigen::VectorXd TransformedMap::eval(const geometry::BallPoint& xi_in,
                                     const Eigen::VectorXd& q_in) const {
  const int n = params_.n;
  if (xi_in.xi.size() != n || q_in.size() != n)
    throw std::invalid_argument("transformed map: dimension mismatch");
  Eigen::VectorXd xi = xi_in.xi;
  Eigen::VectorXd q = q_in;
  if (!(xi.norm() > 0.0)) throw std::domain_error("transformed map: xi = 0 rejected");
  const bool flip = xi(n - 1) < 0.0;
  if (flip) {
    if (!reflected_)
      throw std::domain_error("transformed map: xi_n < 0 requires the reflected extension");
    xi(n - 1) = -xi(n - 1);
    q(n - 1) = -q(n - 1);
  }
  Eigen::VectorXd cross;
  const double height = geometry::detail::inverse_into(xi, params_.kappa, cross);
  Eigen::MatrixXd dT;
  const double jac = geometry::detail::differential_into(cross, height, params_.kappa, dT);
  geometry::CylinderPoint x;
  x.cross = std::move(cross);
  x.height = height;
  Eigen::VectorXd out = dT * base_.eval(x, dT.transpose() * q) / std::abs(jac);
  if (flip) out(n - 1) = -out(n - 1);
  return out;
}

Eigen::Vector2d TransformedMap::flux2(const Eigen::Vector2d& xi, const Eigen::Vector2d& q,
                                      double eps) const {
  if (params_.n != 2) throw std::logic_error("flux2: 2D chart only");
  if (xi.y() < 0.0) {
    if (!reflected_)
      throw std::domain_error("transformed map: xi_n < 0 requires the reflected extension");
    const Eigen::Vector2d f =
        flux2(Eigen::Vector2d(xi.x(), -xi.y()), Eigen::Vector2d(q.x(), -q.y()), eps);
    return {f.x(), -f.y()};
  }
  if (!(xi.squaredNorm() > 0.0)) throw std::domain_error("transformed map: xi = 0 rejected");
  const Chart2 c = chart2_at(xi, params_.kappa);
  const Eigen::Vector2d qx = c.dT.transpose() * q;
  return c.dT * base_.flux2(c.x, qx, eps) / c.jac_abs;
}

Eigen::Matrix2d TransformedMap::tangent2(const Eigen::Vector2d& xi, const Eigen::Vector2d& q,
                                         double eps) const {
  if (xi.y() < 0.0) {
    return mirror_conjugate(
        tangent2(Eigen::Vector2d(xi.x(), -xi.y()), Eigen::Vector2d(q.x(), -q.y()), eps));
  }
  const Chart2 c = chart2_at(xi, params_.kappa);
  const Eigen::Vector2d qx = c.dT.transpose() * q;
  return c.dT * base_.tangent2(c.x, qx, eps) * c.dT.transpose() / c.jac_abs;
}

Eigen::Matrix2d TransformedMap::picard_matrix2(const Eigen::Vector2d& xi, const Eigen::Vector2d& q,
                                               double eps) const {
  if (xi.y() < 0.0) {
    return mirror_conjugate(
        picard_matrix2(Eigen::Vector2d(xi.x(), -xi.y()), Eigen::Vector2d(q.x(), -q.y()), eps));
  }
  const Chart2 c = chart2_at(xi, params_.kappa);
  const Eigen::Vector2d qx = c.dT.transpose() * q;
  const double coef = base_.picard_coef2(c.x, qx, eps);
  return coef * (c.dT * c.dT.transpose()) / c.jac_abs;
}

std::optional<double> TransformedMap::energy_density2(const Eigen::Vector2d& xi,
                                                      const Eigen::Vector2d& q) const {
  if (!base_.has_analytic_tangent()) return std::nullopt;
  const Eigen::Vector2d xi_up(xi.x(), std::abs(xi.y()));
  const Eigen::Vector2d q_up(q.x(), xi.y() < 0.0 ? -q.y() : q.y());
  const Chart2 c = chart2_at(xi_up, params_.kappa);
  const Eigen::Vector2d qx = c.dT.transpose() * q_up;
  const double p = base_.p();
  return std::pow(qx.squaredNorm(), 0.5 * p) / (p * c.jac_abs);
}

namespace {

struct Extremes {
  double coercivity_min = std::numeric_limits<double>::infinity();
  double growth_max = 0.0;
  double monotonicity_min = std::numeric_limits<double>::infinity();
  double homogeneity_max = 0.0;
};

void add_violation(AxiomReport& rep, const char* axiom, double value) {
  rep.violation_count++;
  if (rep.violations.size() < 16) rep.violations.push_back({axiom, value});
}

void check_homogeneity(AxiomReport& rep, Extremes& ext, double p,
                       const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& flux,
                       const Eigen::VectorXd& q, const Eigen::VectorXd& a) {
  for (double lam : rep.lambdas_tested) {
    const Eigen::VectorXd lhs = flux(lam * q);
    const Eigen::VectorXd rhs = lam * std::pow(std::abs(lam), p - 2.0) * a;
    const double rel = (lhs - rhs).norm() / std::max(rhs.norm(), 1e-300);
    ext.homogeneity_max = std::max(ext.homogeneity_max, rel);
    if (!(rel <= 1e-12)) add_violation(rep, "homogeneity", rel);
  }
}

void finalize(AxiomReport& rep, const Extremes& ext) {
  rep.empirical_alpha1 = ext.coercivity_min;
  rep.empirical_alpha2 = ext.growth_max;
  rep.min_monotonicity_gap = ext.monotonicity_min;
  rep.max_homogeneity_rel_err = ext.homogeneity_max;
}

}  // namespace

AxiomReport verify_axioms(const CoefficientMap& map, int sample_count, std::uint64_t seed,
                          int dim) {
  if (sample_count < 1) throw std::invalid_argument("verify_axioms: sample_count must be >= 1");
  if (map.kind() == MapKind::exp_dir) dim = static_cast<int>(map.q0().size());
  if (dim < 2) throw std::invalid_argument("verify_axioms: dimension must be >= 2");

  rng::Sampler rs(seed);
  AxiomReport rep;
  rep.samples = sample_count;
  rep.lambdas_tested = {0.5, 3.0};
  if (map.odd_symmetric()) {
    rep.lambdas_tested.push_back(-1.0);
    rep.lambdas_tested.push_back(-2.0);
  }
  Extremes ext;
  const double p = map.p();

  for (int k = 0; k < sample_count; ++k) {
    geometry::CylinderPoint x(rs.in_unit_ball(dim - 1), rs.uniform(0.0, 4.0));
    const Eigen::VectorXd q1 = rs.vector(dim);
    const Eigen::VectorXd q2 = rs.vector(dim);
    const Eigen::VectorXd a1 = map.eval(x, q1);
    const Eigen::VectorXd a2 = map.eval(x, q2);

    const double qn = q1.norm();
    const double coer = a1.dot(q1) / std::pow(qn, p);
    const double grow = a1.norm() / std::pow(qn, p - 1.0);
    ext.coercivity_min = std::min(ext.coercivity_min, coer);
    ext.growth_max = std::max(ext.growth_max, grow);
    if (!(coer >= map.alpha1() * (1.0 - kRelSlack))) add_violation(rep, "coercivity", coer);
    if (!(grow <= map.alpha2() * (1.0 + kRelSlack))) add_violation(rep, "growth", grow);

    const double gap = (a1 - a2).dot(q1 - q2);
    ext.monotonicity_min = std::min(ext.monotonicity_min, gap);
    if (!(gap > 0.0)) add_violation(rep, "monotonicity", gap);

    check_homogeneity(rep, ext, p, [&](const Eigen::VectorXd& q) { return map.eval(x, q); }, q1,
                      a1);
  }
  finalize(rep, ext);
  return rep;
}

AxiomReport verify_axioms(const TransformedMap& map, int sample_count, std::uint64_t seed) {
  if (sample_count < 1) throw std::invalid_argument("verify_axioms: sample_count must be >= 1");
  const int n = map.params().n;
  rng::Sampler rs(seed);
  AxiomReport rep;
  rep.samples = sample_count;
  rep.lambdas_tested = {0.5, 3.0};
  if (map.base().odd_symmetric()) {
    rep.lambdas_tested.push_back(-1.0);
    rep.lambdas_tested.push_back(-2.0);
  }
  Extremes ext;
  const Weight w = map.weight();
  const double p = map.base().p();

  for (int k = 0; k < sample_count; ++k) {
    const double radius = std::exp(rs.uniform(std::log(0.1), 0.0));
    Eigen::VectorXd xi = radius * rs.direction(n);
    if (!map.reflected()) xi(n - 1) = std::abs(xi(n - 1));
    const geometry::BallPoint bp{xi};
    const double weight = w(xi);

    const Eigen::VectorXd q1 = rs.vector(n);
    const Eigen::VectorXd q2 = rs.vector(n);
    const Eigen::VectorXd b1 = map.eval(bp, q1);
    const Eigen::VectorXd b2 = map.eval(bp, q2);

    const double qn = q1.norm();
    const double coer = b1.dot(q1) / (weight * std::pow(qn, p));
    const double grow = b1.norm() / (weight * std::pow(qn, p - 1.0));
    ext.coercivity_min = std::min(ext.coercivity_min, coer);
    ext.growth_max = std::max(ext.growth_max, grow);
    if (!(coer > 0.0) || !std::isfinite(coer)) add_violation(rep, "weighted coercivity", coer);
    if (!std::isfinite(grow)) add_violation(rep, "weighted growth", grow);

    const double gap = (b1 - b2).dot(q1 - q2);
    ext.monotonicity_min = std::min(ext.monotonicity_min, gap);
    if (!(gap > 0.0)) add_violation(rep, "monotonicity", gap);

    check_homogeneity(rep, ext, p, [&](const Eigen::VectorXd& q) { return map.eval(bp, q); }, q1,
                      b1);
  }
  finalize(rep, ext);
  return rep;
}

AngularReport verify_angular_condition(const Eigen::VectorXd& q0, int sample_count,
                                       std::uint64_t seed) {
  if (!(q0.norm() < 1.0 / std::sqrt(2.0)))
    throw std::invalid_argument("verify_angular_condition: |q0| must be < 1/sqrt(2)");
  const int dim = static_cast<int>(q0.size());
  rng::Sampler rs(seed);
  AngularReport rep;
  rep.samples = sample_count;
  rep.min_margin = std::numeric_limits<double>::infinity();

  for (int k = 0; k < sample_count; ++k) {
    Eigen::VectorXd theta = rs.direction(dim);
    Eigen::VectorXd theta2 = rs.direction(dim);
    while (theta.dot(theta2) <= 1e-12) theta2 = rs.direction(dim);
    const double cos_a = std::min(1.0, theta.dot(theta2));
    const double sin_a = std::sqrt(std::max(0.0, 1.0 - cos_a * cos_a));
    const double ratio = std::exp((theta2 - theta).dot(q0));
    const double threshold = (1.0 - sin_a) / (1.0 + sin_a);
    const double margin = ratio - threshold;
    rep.min_margin = std::min(rep.min_margin, margin);
    if (!(margin > 0.0)) rep.violation_count++;
  }
  return rep;
}

EnergyComparison compare_energy_norms(const mesh::Mesh& strip, const mesh::DiscreteField& u,
                                      const mesh::Mesh& annulus, double p,
                                      const geometry::TransformParams& params) {
  if (u.mesh.get() != &strip) throw std::invalid_argument("compare_energy_norms: field/mesh mismatch");
  const double kappa = params.kappa;
  EnergyComparison cmp;

  const auto strip_tables = assemble_gradient_tables(strip);
  std::vector<mesh::QuadPoint> qp;
  for (int t = 0; t < strip.triangle_count(); ++t) {
    const auto& cell = strip_tables[t];
    const auto& tri = strip.triangles[t];
    Eigen::Vector2d grad = Eigen::Vector2d::Zero();
    for (int i = 0; i < 3; ++i) grad += u.values[tri[i]] * cell.grad[i];
    cmp.gradient_cylinder += cell.area * std::pow(grad.squaredNorm(), 0.5 * p);
    mesh::quadrature_points(strip, t, mesh::QuadratureRule::three_point, qp);
    for (const auto& point : qp) {
      double val = 0.0;
      for (int i = 0; i < 3; ++i) val += point.shape[i] * u.values[tri[i]];
      cmp.order0_cylinder +=
          point.weight * std::pow(std::abs(val), p) * std::exp(-p * kappa * point.pos.y());
    }
  }

  // Pushforward of the nodal values onto the annulus, then quadrature there.
  Eigen::VectorXd tilde(annulus.vertex_count());
  for (int v = 0; v < annulus.vertex_count(); ++v) {
    const Eigen::Vector2d& xi = annulus.vertices[v];
    Eigen::Matrix<double, 1, 1> cross;
    Eigen::Vector2d xi_up(xi.x(), std::abs(xi.y()));
    const double height = geometry::detail::inverse_into(xi_up, kappa, cross);
    const Eigen::Vector2d x(std::clamp(cross(0), -1.0, 1.0), height);
    tilde[v] = mesh::interpolate(u, x, 1e-6);
  }

  const Weight w{p, params.n};
  const auto ball_tables = assemble_gradient_tables(annulus);
  for (int t = 0; t < annulus.triangle_count(); ++t) {
    const auto& cell = ball_tables[t];
    const auto& tri = annulus.triangles[t];
    Eigen::Vector2d grad = Eigen::Vector2d::Zero();
    for (int i = 0; i < 3; ++i) grad += tilde[tri[i]] * cell.grad[i];
    cmp.gradient_ball += cell.area * w.at_radius(cell.barycenter.norm()) *
                         std::pow(grad.squaredNorm(), 0.5 * p);
    mesh::quadrature_points(annulus, t, mesh::QuadratureRule::three_point, qp);
    for (const auto& point : qp) {
      double val = 0.0;
      for (int i = 0; i < 3; ++i) val += point.shape[i] * tilde[tri[i]];
      cmp.order0_ball += point.weight * std::pow(std::abs(val), p) * w.at_radius(point.pos.norm());
    }
  }
  return cmp;
}

}  // namespace cylab::operators
