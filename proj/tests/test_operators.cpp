#include <doctest.h>

#include <cmath>

#include "cylab/mesh.hpp"
#include "cylab/operators.hpp"
#include "cylab/rng.hpp"
#include "cylab/solver.hpp"

using namespace cylab;
using operators::CoefficientMap;
using operators::TransformedMap;

namespace {

geometry::CylinderPoint origin2() {
  return geometry::CylinderPoint(Eigen::VectorXd::Zero(1), 0.0);
}

Eigen::VectorXd vec2(double a, double b) {
  Eigen::VectorXd v(2);
  v << a, b;
  return v;
}

}  // namespace

TEST_CASE("p-Laplace flux: examples and zero limit") {
  const CoefficientMap map = CoefficientMap::p_laplace(3.0);
  const Eigen::VectorXd a = map.eval(origin2(), vec2(2.0, 0.0));
  CHECK(a(0) == doctest::Approx(4.0).epsilon(1e-15));
  CHECK(a(1) == doctest::Approx(0.0));

  const CoefficientMap id = CoefficientMap::p_laplace(2.0);
  const Eigen::VectorXd b = id.eval(origin2(), vec2(0.3, -0.7));
  CHECK(b(0) == 0.3);
  CHECK(b(1) == -0.7);

  for (const double p : {1.5, 2.0, 3.0}) {
    const CoefficientMap m = CoefficientMap::p_laplace(p);
    CHECK(m.eval(origin2(), vec2(0.0, 0.0)).norm() == 0.0);
  }
  CHECK_THROWS_AS(CoefficientMap::p_laplace(1.0), std::invalid_argument);
}

TEST_CASE("exp_dir flux: direct formula evaluation") {
  const CoefficientMap map = CoefficientMap::exp_dir(vec2(0.5, 0.0));
  const Eigen::VectorXd a = map.eval(origin2(), vec2(0.0, 1.0));
  CHECK(a(0) == doctest::Approx(0.0));
  CHECK(a(1) == doctest::Approx(1.0).epsilon(1e-15));

  const Eigen::VectorXd b = map.eval(origin2(), vec2(1.0, 0.0));
  CHECK(b(0) == doctest::Approx(std::exp(0.5)).epsilon(1e-15));
  CHECK(b(1) == doctest::Approx(0.0));

  CHECK(map.eval(origin2(), vec2(0.0, 0.0)).norm() == 0.0);
}

TEST_CASE("exp_dir: admissibility bound is enforced at construction") {
  CHECK_THROWS_AS(CoefficientMap::exp_dir(vec2(0.75, 0.0)), std::invalid_argument);
  CHECK_THROWS_AS(CoefficientMap::exp_dir(vec2(1.0 / std::sqrt(2.0), 0.0)),
                  std::invalid_argument);
  CHECK_NOTHROW(CoefficientMap::exp_dir(vec2(0.7, 0.0)));
}

TEST_CASE("axioms: p-Laplace with p = 2 has unit constants") {
  const auto rep = operators::verify_axioms(CoefficientMap::p_laplace(2.0), 10000, 1);
  CHECK(rep.ok());
  CHECK(rep.empirical_alpha1 == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(rep.empirical_alpha2 == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(rep.min_monotonicity_gap > 0.0);
  CHECK(rep.lambdas_tested.size() == 4);  // odd-symmetric: negative scalings included
}

TEST_CASE("axioms: built-in families certify with zero violations") {
  for (const double p : {1.5, 3.0}) {
    const auto rep = operators::verify_axioms(CoefficientMap::p_laplace(p), 2000, 2);
    CHECK(rep.ok());
  }
  for (const double s : {0.0, 0.5, 0.7}) {
    const auto rep =
        operators::verify_axioms(CoefficientMap::exp_dir(vec2(s, 0.0)), 2000, 3);
    CHECK(rep.ok());
    CHECK(rep.empirical_alpha1 >= std::exp(-s) - 1e-9);
    CHECK(rep.empirical_alpha2 <= std::exp(s) + 1e-9);
  }
}

TEST_CASE("monotonicity gap: direct arithmetic for exp_dir") {
  const CoefficientMap map = CoefficientMap::exp_dir(vec2(0.5, 0.0));
  const Eigen::VectorXd q1 = vec2(1.0, 0.0);
  const Eigen::VectorXd q2 = vec2(0.0, 1.0);
  const double gap =
      (map.eval(origin2(), q1) - map.eval(origin2(), q2)).dot(q1 - q2);
  CHECK(gap == doctest::Approx(std::exp(0.5) + 1.0).epsilon(1e-14));
  CHECK(gap > 0.0);
}

TEST_CASE("homogeneity: odd maps certify negative scalings, exp_dir is positive-only") {
  const auto plap = operators::verify_axioms(CoefficientMap::p_laplace(3.0), 500, 4);
  CHECK(plap.ok());
  CHECK(plap.max_homogeneity_rel_err <= 1e-12);
  CHECK(plap.lambdas_tested.size() == 4);

  const CoefficientMap ed = CoefficientMap::exp_dir(vec2(0.5, 0.0));
  const auto rep = operators::verify_axioms(ed, 500, 5);
  CHECK(rep.ok());
  CHECK(rep.lambdas_tested.size() == 2);  // positive scalings only
  // The negative scaling genuinely fails for a nonzero direction vector:
  // A(-q) = e^{-theta.q0}(-q) while -A(q) = -e^{theta.q0} q.
  const Eigen::VectorXd q = vec2(1.0, 0.0);
  const Eigen::VectorXd lhs = ed.eval(origin2(), -q);
  const Eigen::VectorXd rhs = -ed.eval(origin2(), q);
  CHECK((lhs - rhs).norm() / rhs.norm() > 0.5);
}

TEST_CASE("custom maps: empirical constants are reported, not trusted") {
  // A scaled p-Laplace flux with a deliberately loose claim: the report's
  // empirical constants expose the true ones.
  const auto flux = [](const geometry::CylinderPoint&, const Eigen::VectorXd& q) {
    return Eigen::VectorXd(1.5 * q);
  };
  const CoefficientMap map = CoefficientMap::custom(2.0, 1.0, 2.0, flux, true);
  const auto rep = operators::verify_axioms(map, 2000, 77);
  CHECK(rep.ok());
  CHECK(rep.empirical_alpha1 == doctest::Approx(1.5).epsilon(1e-12));
  CHECK(rep.empirical_alpha2 == doctest::Approx(1.5).epsilon(1e-12));
  CHECK(rep.lambdas_tested.size() == 4);
}

TEST_CASE("transformed map: zero flux, reflection equivariance, domain checks") {
  const TransformedMap tmap(CoefficientMap::p_laplace(2.5), geometry::TransformParams(1.0, 2),
                            true);
  const geometry::BallPoint xi{Eigen::Vector2d(0.3, 0.4)};
  CHECK(tmap.eval(xi, vec2(0.0, 0.0)).norm() == 0.0);

  rng::Sampler rs(17);
  for (int k = 0; k < 200; ++k) {
    const double radius = std::exp(rs.uniform(std::log(0.1), 0.0));
    const Eigen::VectorXd point = radius * rs.direction(2);
    const Eigen::VectorXd q = rs.vector(2);
    const geometry::BallPoint bp{point};
    const geometry::BallPoint mirrored = geometry::reflect(bp);
    Eigen::VectorXd mq = q;
    mq(1) = -mq(1);
    const Eigen::VectorXd lhs = tmap.eval(mirrored, mq);
    Eigen::VectorXd rhs = tmap.eval(bp, q);
    rhs(1) = -rhs(1);
    CHECK(lhs(0) == rhs(0));
    CHECK(lhs(1) == rhs(1));
  }

  CHECK_THROWS_AS(tmap.eval(geometry::BallPoint{Eigen::Vector2d(0.0, 0.0)}, vec2(1.0, 0.0)),
                  std::domain_error);
  const TransformedMap upper_only(CoefficientMap::p_laplace(2.0),
                                  geometry::TransformParams(1.0, 2), false);
  CHECK_THROWS_AS(upper_only.eval(geometry::BallPoint{Eigen::Vector2d(0.1, -0.2)}, vec2(1.0, 0.0)),
                  std::domain_error);
}

TEST_CASE("transformed map: weighted axioms certify with zero violations") {
  const TransformedMap tmap(CoefficientMap::p_laplace(2.0), geometry::TransformParams(1.0, 2),
                            true);
  const auto rep = operators::verify_axioms(tmap, 10000, 6);
  CHECK(rep.ok());
  CHECK(rep.empirical_alpha1 > 0.0);
  CHECK(std::isfinite(rep.empirical_alpha2));
  CHECK(rep.max_homogeneity_rel_err <= 1e-12);
}

TEST_CASE("transformed map: doubling the gradient scales the flux by 2^{p-1}") {
  const double p = 2.5;
  const TransformedMap tmap(CoefficientMap::p_laplace(p), geometry::TransformParams(1.0, 2),
                            true);
  rng::Sampler rs(21);
  for (int k = 0; k < 100; ++k) {
    const Eigen::VectorXd xi = 0.5 * rs.direction(2);
    const Eigen::VectorXd q = rs.vector(2);
    const Eigen::VectorXd doubled = tmap.eval(geometry::BallPoint{xi}, 2.0 * q);
    const Eigen::VectorXd scaled = std::pow(2.0, p - 1.0) * tmap.eval(geometry::BallPoint{xi}, q);
    CHECK((doubled - scaled).norm() <= 1e-12 * scaled.norm());
  }
}

TEST_CASE("transformed map: dimension-generic certification in three dimensions") {
  const TransformedMap tmap(CoefficientMap::p_laplace(2.5), geometry::TransformParams(0.8, 3),
                            true);
  const auto rep = operators::verify_axioms(tmap, 2000, 33);
  CHECK(rep.ok());
  CHECK(rep.empirical_alpha1 > 0.0);
}

TEST_CASE("angular condition: worked example and certification runs") {
  // theta.theta' = cos 60, ratio a(theta')/a(theta) = e^{-1/4}.
  const double ratio = std::exp((0.5 - 1.0) * 0.5);
  const double sin60 = std::sqrt(3.0) / 2.0;
  const double threshold = (1.0 - sin60) / (1.0 + sin60);
  CHECK(ratio == doctest::Approx(0.7788).epsilon(1e-4));
  CHECK(threshold == doctest::Approx(0.0718).epsilon(1e-3));
  CHECK(ratio > threshold);

  const auto zero = operators::verify_angular_condition(vec2(0.0, 0.0), 1000, 7);
  CHECK(zero.ok());
  CHECK(zero.min_margin > 0.0);

  const auto rep = operators::verify_angular_condition(vec2(0.4, 0.3), 100000, 8);
  CHECK(rep.samples == 100000);
  CHECK(rep.ok());
}

TEST_CASE("weight: powers of the radius") {
  const operators::Weight unit{2.0, 2};
  CHECK(unit(vec2(0.3, -0.1)) == 1.0);
  const operators::Weight w{3.0, 2};
  CHECK(w.at_radius(0.5) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK_THROWS_AS(w(vec2(0.0, 0.0)), std::domain_error);
}

TEST_CASE("2D flux path agrees with the generic evaluation") {
  rng::Sampler rs(9);
  const CoefficientMap maps[] = {CoefficientMap::p_laplace(1.5),
                                 CoefficientMap::exp_dir(vec2(0.3, 0.2))};
  for (const auto& map : maps) {
    for (int k = 0; k < 100; ++k) {
      const Eigen::VectorXd q = rs.vector(2);
      const Eigen::VectorXd generic = map.eval(origin2(), q);
      const Eigen::Vector2d fast = map.flux2(Eigen::Vector2d(0.0, 0.0), q.head<2>(), 0.0);
      CHECK((generic.head<2>() - fast).norm() <= 1e-14 * (1.0 + fast.norm()));
    }
  }
}

TEST_CASE("tangent at zero gradient: identity for p = 2, zero for p > 2") {
  const Eigen::Vector2d origin = Eigen::Vector2d::Zero();
  const auto laplace = CoefficientMap::p_laplace(2.0);
  CHECK((laplace.tangent2(origin, origin, 0.0) - Eigen::Matrix2d::Identity()).norm() == 0.0);
  const auto cubic = CoefficientMap::p_laplace(3.0);
  CHECK(cubic.tangent2(origin, origin, 0.0).norm() == 0.0);
  CHECK(cubic.tangent2(origin, origin, 1e-4).norm() > 0.0);
}

TEST_CASE("weighted ellipticity constant: fitted on one sample set, asserted on another") {
  const TransformedMap tmap(CoefficientMap::p_laplace(1.5), geometry::TransformParams(1.0, 2),
                            true);
  const auto fit = operators::verify_axioms(tmap, 5000, 100);
  REQUIRE(fit.ok());
  const double c_fitted = fit.empirical_alpha1;
  CHECK(c_fitted > 0.0);
  const auto check = operators::verify_axioms(tmap, 5000, 200);
  CHECK(check.empirical_alpha1 >= 0.5 * c_fitted);  // one global constant, margin 2x
  CHECK(check.empirical_alpha2 <= 2.0 * fit.empirical_alpha2);
}

TEST_CASE("analytic tangent matches finite differences") {
  const CoefficientMap map = CoefficientMap::p_laplace(3.0);
  rng::Sampler rs(13);
  for (int k = 0; k < 50; ++k) {
    const Eigen::VectorXd q = rs.vector(2, 1e-1, 1e1);
    const Eigen::Vector2d q2 = q.head<2>();
    const Eigen::Matrix2d exact = map.tangent2(Eigen::Vector2d::Zero(), q2, 1e-4);
    Eigen::Matrix2d fd;
    const double step = 1e-7 * (1.0 + q2.norm());
    for (int c = 0; c < 2; ++c) {
      Eigen::Vector2d lo = q2, hi = q2;
      lo(c) -= step;
      hi(c) += step;
      fd.col(c) = (map.flux2(Eigen::Vector2d::Zero(), hi, 1e-4) -
                   map.flux2(Eigen::Vector2d::Zero(), lo, 1e-4)) /
                  (2.0 * step);
    }
    CHECK((exact - fd).norm() <= 1e-5 * exact.norm());
  }
}

TEST_CASE("energy comparability on both charts") {
  const geometry::TransformParams params(1.0, 2);
  const auto strip = mesh::make_strip(1.0, 0.1);

  // Constant field: both gradient energies vanish.
  {
    const mesh::DiscreteField constant(strip,
                                       Eigen::VectorXd::Constant(strip->vertex_count(), 2.5));
    const auto annulus = solver::make_matched_annulus(*strip, params, 64);
    const auto cmp = operators::compare_energy_norms(*strip, constant, *annulus, 2.0, params);
    CHECK(cmp.gradient_cylinder == 0.0);
    CHECK(cmp.gradient_ball <= 1e-20);  // interpolation rounding only
    CHECK(cmp.order0_cylinder > 0.0);
    CHECK(cmp.order0_ball > 0.0);
  }

  // Linear field: the energy pairs stay comparable and the ratios are stable
  // under refinement.
  double ratios[2][2];
  int level = 0;
  for (const double h : {0.1, 0.05}) {
    const auto m = mesh::make_strip(1.0, h);
    Eigen::VectorXd values(m->vertex_count());
    for (int v = 0; v < m->vertex_count(); ++v) values[v] = m->vertices[v].y();
    const mesh::DiscreteField u(m, values);
    const auto annulus =
        solver::make_matched_annulus(*m, params, static_cast<int>(std::lround(4.0 / h)));
    const auto cmp = operators::compare_energy_norms(*m, u, *annulus, 2.0, params);
    CHECK(cmp.gradient_cylinder == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(cmp.gradient_ball > 0.0);
    ratios[level][0] = cmp.gradient_cylinder / cmp.gradient_ball;
    ratios[level][1] = cmp.order0_cylinder / cmp.order0_ball;
    ++level;
  }
  for (int i = 0; i < 2; ++i) {
    CHECK(ratios[0][i] > 0.0);
    CHECK(std::abs(ratios[1][i] / ratios[0][i] - 1.0) < 0.10);
  }
}
