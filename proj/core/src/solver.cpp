#include "cylab/solver.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cylab::solver {

namespace {

using SparseMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

Eigen::Matrix2d fd_tangent(const FluxField& field, const Eigen::Vector2d& pos,
                           const Eigen::Vector2d& q, double eps) {
  Eigen::Matrix2d out;
  const double step = 1e-7 * (1.0 + q.norm());
  for (int c = 0; c < 2; ++c) {
    Eigen::Vector2d lo = q, hi = q;
    lo(c) -= step;
    hi(c) += step;
    out.col(c) = (field.flux(pos, hi, eps) - field.flux(pos, lo, eps)) / (2.0 * step);
  }
  return out;
}

// Zero-order density derivative (eps-regularized for p < 2):
// d/dv (1/p)(eps^2+v^2)^{p/2} = (eps^2+v^2)^{(p-2)/2} v.
double mass_flux(double v, double p, double eps) {
  const double t = eps * eps + v * v;
  return t == 0.0 ? 0.0 : std::pow(t, 0.5 * (p - 2.0)) * v;
}

double mass_tangent(double v, double p, double eps) {
  const double t = eps * eps + v * v;
  if (t == 0.0) return 0.0;
  return std::pow(t, 0.5 * p - 2.0) * (eps * eps + (p - 1.0) * v * v);
}

struct System {
  const mesh::Mesh& m;
  const MixedProblem& prob;
  mesh::GradientTables tables;
  bool reduced = false;
  std::vector<int> rep;                // vertex -> orbit representative
  std::vector<int> unknown_of_vertex;  // vertex -> unknown index or -1 (pinned)
  std::vector<int> vertex_of_unknown;
  Eigen::VectorXd u;  // full nodal iterate; expansion invariant u[v] = u[rep[v]]

  explicit System(const MixedProblem& p_) : m(*p_.mesh), prob(p_) {
    tables = mesh::assemble_gradient_tables(m);
    const int nv = m.vertex_count();
    if (static_cast<int>(prob.dirichlet.size()) != nv)
      throw std::invalid_argument("solve: dirichlet vector size does not match vertex count");

    reduced = m.has_symmetry() && prob.exploit_symmetry && prob.field.mirror_equivariant &&
              symmetric_data();
    rep.resize(nv);
    for (int v = 0; v < nv; ++v)
      rep[v] = reduced ? std::min(v, m.symmetry_map[v]) : v;

    unknown_of_vertex.assign(nv, -1);
    int pinned = 0;
    for (int v = 0; v < nv; ++v) {
      if (prob.dirichlet[v]) {
        ++pinned;
        continue;
      }
      if (rep[v] != v) continue;
      unknown_of_vertex[v] = static_cast<int>(vertex_of_unknown.size());
      vertex_of_unknown.push_back(v);
    }
    for (int v = 0; v < nv; ++v)
      if (!prob.dirichlet[v] && rep[v] != v) unknown_of_vertex[v] = unknown_of_vertex[rep[v]];
    if (pinned == 0)
      throw std::invalid_argument("solve: at least one Dirichlet vertex is required");
  }

  bool symmetric_data() const {
    for (int v = 0; v < m.vertex_count(); ++v) {
      const int w = m.symmetry_map[v];
      const auto& dv = prob.dirichlet[v];
      const auto& dw = prob.dirichlet[w];
      if (dv.has_value() != dw.has_value()) return false;
      if (dv && *dv != *dw) return false;
    }
    return true;
  }

  int unknown_count() const { return static_cast<int>(vertex_of_unknown.size()); }

  void set_unknowns(const Eigen::VectorXd& x) {
    for (int v = 0; v < m.vertex_count(); ++v)
      if (unknown_of_vertex[v] >= 0) u[v] = x[unknown_of_vertex[v]];
  }

  Eigen::VectorXd get_unknowns() const {
    Eigen::VectorXd x(unknown_count());
    for (int i = 0; i < unknown_count(); ++i) x[i] = u[vertex_of_unknown[i]];
    return x;
  }

  // Initial iterate: Dirichlet data extended by the mean, then smoothed with
  // five Jacobi averaging passes over the free vertices.
  void initialize() {
    const int nv = m.vertex_count();
    u.setZero(nv);
    double mean = 0.0;
    int count = 0;
    for (int v = 0; v < nv; ++v) {
      if (prob.dirichlet[v]) {
        u[v] = *prob.dirichlet[v];
        mean += u[v];
        ++count;
      }
    }
    mean /= count;
    for (int v = 0; v < nv; ++v)
      if (!prob.dirichlet[v]) u[v] = mean;

    std::vector<std::vector<int>> adj(nv);
    for (const auto& tri : m.triangles) {
      for (int e = 0; e < 3; ++e) {
        adj[tri[e]].push_back(tri[(e + 1) % 3]);
        adj[tri[e]].push_back(tri[(e + 2) % 3]);
      }
    }
    for (auto& list : adj) {
      std::sort(list.begin(), list.end());
      list.erase(std::unique(list.begin(), list.end()), list.end());
    }
    Eigen::VectorXd next = u;
    for (int pass = 0; pass < 5; ++pass) {
      for (int v = 0; v < nv; ++v) {
        if (prob.dirichlet[v] || adj[v].empty()) continue;
        double sum = 0.0;
        for (int w : adj[v]) sum += u[w];
        next[v] = sum / static_cast<double>(adj[v].size());
      }
      u.swap(next);
      next = u;
    }
    // Re-impose the expansion invariant bitwise.
    for (int v = 0; v < nv; ++v)
      if (!prob.dirichlet[v]) u[v] = u[rep[v]];
  }

  Eigen::Vector2d cell_gradient(int t, const Eigen::VectorXd& nodal) const {
    const auto& tri = m.triangles[t];
    const auto& cell = tables[t];
    Eigen::Vector2d g = Eigen::Vector2d::Zero();
    for (int i = 0; i < 3; ++i) g += nodal[tri[i]] * cell.grad[i];
    return g;
  }

  Eigen::VectorXd residual(const Eigen::VectorXd& nodal, double eps) const {
    Eigen::VectorXd r = Eigen::VectorXd::Zero(unknown_count());
    for (int t = 0; t < m.triangle_count(); ++t) {
      const auto& tri = m.triangles[t];
      const auto& cell = tables[t];
      const Eigen::Vector2d q = cell_gradient(t, nodal);
      const Eigen::Vector2d f = prob.field.flux(cell.barycenter, q, eps);
      for (int i = 0; i < 3; ++i) {
        const int idx = unknown_of_vertex[tri[i]];
        if (idx >= 0) r[idx] += cell.area * f.dot(cell.grad[i]);
      }
      if (prob.zero_order) {
        const double vbar = (nodal[tri[0]] + nodal[tri[1]] + nodal[tri[2]]) / 3.0;
        const double w = prob.zero_order->weight(cell.barycenter);
        const double mf = mass_flux(vbar, prob.zero_order->p, eps);
        for (int i = 0; i < 3; ++i) {
          const int idx = unknown_of_vertex[tri[i]];
          if (idx >= 0) r[idx] += cell.area * w * mf / 3.0;
        }
      }
    }
    return r;
  }

  enum class MatrixKind { newton, picard };

  // Assembles the tangent (or frozen Picard) matrix on the unknowns and the
  // right-hand side correction coming from pinned columns (Picard only).
  void assemble_matrix(const Eigen::VectorXd& nodal, double eps, MatrixKind kind, SparseMat& mat,
                       Eigen::VectorXd* picard_rhs) const {
    std::vector<Triplet> triplets;
    triplets.reserve(static_cast<std::size_t>(m.triangle_count()) * 9);
    if (picard_rhs) picard_rhs->setZero(unknown_count());

    for (int t = 0; t < m.triangle_count(); ++t) {
      const auto& tri = m.triangles[t];
      const auto& cell = tables[t];
      const Eigen::Vector2d q = cell_gradient(t, nodal);
      Eigen::Matrix2d dq;
      if (kind == MatrixKind::picard) {
        dq = prob.field.picard(cell.barycenter, q, eps);
      } else if (prob.field.tangent) {
        dq = prob.field.tangent(cell.barycenter, q, eps);
      } else {
        dq = fd_tangent(prob.field, cell.barycenter, q, eps);
      }
      double mass = 0.0;
      if (prob.zero_order) {
        const double vbar = (nodal[tri[0]] + nodal[tri[1]] + nodal[tri[2]]) / 3.0;
        const double w = prob.zero_order->weight(cell.barycenter);
        mass = cell.area * w * mass_tangent(vbar, prob.zero_order->p, eps) / 9.0;
      }
      for (int i = 0; i < 3; ++i) {
        const int ui = unknown_of_vertex[tri[i]];
        if (ui < 0) continue;
        for (int j = 0; j < 3; ++j) {
          const double val = cell.area * cell.grad[i].dot(dq * cell.grad[j]) + mass;
          const int uj = unknown_of_vertex[tri[j]];
          if (uj >= 0) {
            triplets.emplace_back(ui, uj, val);
          } else if (picard_rhs) {
            (*picard_rhs)[ui] -= val * nodal[tri[j]];
          }
        }
      }
    }
    mat.resize(unknown_count(), unknown_count());
    mat.setFromTriplets(triplets.begin(), triplets.end());
  }

  // Solves mat * x = rhs; SPD systems use CG with diagonal preconditioning at
  // 1e-12 relative tolerance, with a direct Cholesky retry; nonsymmetric
  // tangents (finite-difference Jacobians) use sparse LU.
  bool linear_solve(const SparseMat& mat, const Eigen::VectorXd& rhs, Eigen::VectorXd& x) const {
    if (prob.field.spd_tangent) {
      Eigen::ConjugateGradient<SparseMat, Eigen::Lower | Eigen::Upper> cg;
      cg.setTolerance(1e-12);
      cg.setMaxIterations(40L * std::max(100, unknown_count()));
      cg.compute(mat);
      x = cg.solve(rhs);
      if (cg.info() == Eigen::Success && x.allFinite()) return true;
      Eigen::SimplicialLDLT<SparseMat> ldlt(mat);
      if (ldlt.info() == Eigen::Success) {
        x = ldlt.solve(rhs);
        return x.allFinite();
      }
      return false;
    }
    Eigen::SparseLU<SparseMat> lu(mat);
    if (lu.info() != Eigen::Success) return false;
    x = lu.solve(rhs);
    return x.allFinite();
  }

  double energy(const Eigen::VectorXd& nodal) const {
    double total = 0.0;
    for (int t = 0; t < m.triangle_count(); ++t) {
      const auto& cell = tables[t];
      total += cell.area * prob.field.energy_density(cell.barycenter, cell_gradient(t, nodal));
      if (prob.zero_order) {
        const auto& tri = m.triangles[t];
        const double vbar = (nodal[tri[0]] + nodal[tri[1]] + nodal[tri[2]]) / 3.0;
        total += cell.area * prob.zero_order->weight(cell.barycenter) *
                 std::pow(std::abs(vbar), prob.zero_order->p) / prob.zero_order->p;
      }
    }
    return total;
  }
};

}  // namespace

std::vector<double> MixedProblem::default_epsilon_schedule() {
  return {1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8};
}

SolveReport solve(const MixedProblem& problem) {
  if (!problem.mesh) throw std::invalid_argument("solve: null mesh");
  if (!(problem.tol > 0.0)) throw std::invalid_argument("solve: tol must be > 0");
  if (problem.max_iter < 1) throw std::invalid_argument("solve: max_iter must be >= 1");

  std::vector<double> schedule = problem.epsilon_schedule;
  if (problem.field.linear) {
    schedule = {0.0};
  } else {
    if (schedule.empty()) throw std::invalid_argument("solve: empty epsilon schedule");
    for (std::size_t i = 1; i < schedule.size(); ++i)
      if (!(schedule[i] < schedule[i - 1]))
        throw std::invalid_argument("solve: epsilon schedule must be strictly decreasing");
    if (!(schedule.back() <= 1e-8))
      throw std::invalid_argument("solve: epsilon schedule must end at or below 1e-8");
    if (!(schedule.back() > 0.0))
      throw std::invalid_argument("solve: nonlinear epsilon schedule must stay positive");
  }

  System sys(problem);
  sys.initialize();

  SolveReport report;
  report.iterations = 0;

  // Residual norms are measured relative to the initial residual (floored at
  // one), so the tolerance is meaningful across data scales.
  const double scale =
      std::max(1.0, sys.residual(sys.u, schedule.front()).norm());

  const double final_eps = schedule.back();
  for (std::size_t stage = 0; stage < schedule.size(); ++stage) {
    const double eps = schedule[stage];
    const bool last = (stage + 1 == schedule.size());
    const double stage_tol = (last ? problem.tol : std::max(problem.tol, 1e-2 * eps)) * scale;

    Eigen::VectorXd r = sys.residual(sys.u, eps);
    double rnorm = r.norm();
    int iter = 0;
    while (rnorm > stage_tol && iter < problem.max_iter) {
      SparseMat mat;
      Eigen::VectorXd delta;
      bool have_step = false;
      sys.assemble_matrix(sys.u, eps, System::MatrixKind::newton, mat, nullptr);
      have_step = sys.linear_solve(mat, -r, delta);

      const Eigen::VectorXd x0 = sys.get_unknowns();
      const auto try_step = [&](const Eigen::VectorXd& dir, double& accepted_norm) {
        double lambda = 1.0;
        for (int halving = 0; halving <= 20; ++halving) {
          sys.set_unknowns(x0 + lambda * dir);
          const Eigen::VectorXd r_try = sys.residual(sys.u, eps);
          const double rn_try = r_try.norm();
          if (rn_try <= (1.0 - 1e-4 * lambda) * rnorm && std::isfinite(rn_try)) {
            accepted_norm = rn_try;
            return true;
          }
          lambda *= 0.5;
        }
        sys.set_unknowns(x0);
        return false;
      };

      double new_norm = rnorm;
      bool progressed = have_step && try_step(delta, new_norm);
      if (!progressed) {
        // Damped Picard fallback on the frozen-coefficient matrix.
        Eigen::VectorXd rhs;
        sys.assemble_matrix(sys.u, eps, System::MatrixKind::picard, mat, &rhs);
        Eigen::VectorXd fixed_point;
        if (!sys.linear_solve(mat, rhs, fixed_point)) {
          if (!have_step)
            throw std::runtime_error("solve: singular Newton step and Picard fallback failed");
          break;
        }
        const Eigen::VectorXd dir = fixed_point - x0;
        progressed = try_step(dir, new_norm);
        if (!progressed) break;  // stage stalled; continuation proceeds
      }
      r = sys.residual(sys.u, eps);
      rnorm = r.norm();
      ++iter;
      ++report.iterations;
    }
  }

  const double final_norm = sys.residual(sys.u, final_eps).norm() / scale;
  report.residual_norm = final_norm;
  report.converged = final_norm <= problem.tol;
  report.field = mesh::DiscreteField(problem.mesh, sys.u);
  if (problem.field.energy_density) report.energy = sys.energy(sys.u);
  return report;
}

FluxField make_cylinder_field(const operators::CoefficientMap& map) {
  FluxField f;
  f.flux = [map](const Eigen::Vector2d& pos, const Eigen::Vector2d& q, double eps) {
    return map.flux2(pos, q, eps);
  };
  if (map.has_analytic_tangent()) {
    f.tangent = [map](const Eigen::Vector2d& pos, const Eigen::Vector2d& q, double eps) {
      return map.tangent2(pos, q, eps);
    };
  }
  f.picard = [map](const Eigen::Vector2d& pos, const Eigen::Vector2d& q, double eps) {
    return map.picard_coef2(pos, q, eps) * Eigen::Matrix2d::Identity();
  };
  if (map.kind() == operators::MapKind::p_laplace) {
    f.energy_density = [map](const Eigen::Vector2d& pos, const Eigen::Vector2d& q) {
      return *map.energy_density2(pos, q);
    };
  }
  f.spd_tangent = map.has_analytic_tangent();
  f.linear = map.kind() == operators::MapKind::p_laplace && map.p() == 2.0;
  f.mirror_equivariant = false;
  return f;
}

FluxField make_ball_field(const operators::TransformedMap& map) {
  if (map.params().n != 2)
    throw std::invalid_argument("make_ball_field: the discretized solver is two-dimensional");
  FluxField f;
  f.flux = [map](const Eigen::Vector2d& pos, const Eigen::Vector2d& q, double eps) {
    return map.flux2(pos, q, eps);
  };
  if (map.has_analytic_tangent()) {
    f.tangent = [map](const Eigen::Vector2d& pos, const Eigen::Vector2d& q, double eps) {
      return map.tangent2(pos, q, eps);
    };
  }
  f.picard = [map](const Eigen::Vector2d& pos, const Eigen::Vector2d& q, double eps) {
    return map.picard_matrix2(pos, q, eps);
  };
  if (map.has_analytic_tangent()) {
    f.energy_density = [map](const Eigen::Vector2d& pos, const Eigen::Vector2d& q) {
      return *map.energy_density2(pos, q);
    };
  }
  f.spd_tangent = map.has_analytic_tangent();
  f.linear = map.base().kind() == operators::MapKind::p_laplace && map.base().p() == 2.0;
  f.mirror_equivariant = map.reflected();
  return f;
}

FluxField make_weighted_plaplace_field(double p, int n) {
  if (!(p > 1.0)) throw std::invalid_argument("weighted p-Laplace field: p must be > 1");
  const operators::Weight w{p, n};
  const operators::CoefficientMap plap = operators::CoefficientMap::p_laplace(p);
  FluxField f;
  f.flux = [w, plap](const Eigen::Vector2d& pos, const Eigen::Vector2d& q, double eps) {
    return w.at_radius(pos.norm()) * plap.flux2(pos, q, eps);
  };
  f.tangent = [w, plap](const Eigen::Vector2d& pos, const Eigen::Vector2d& q, double eps) {
    return w.at_radius(pos.norm()) * plap.tangent2(pos, q, eps);
  };
  f.picard = [w, plap](const Eigen::Vector2d& pos, const Eigen::Vector2d& q, double eps) {
    return (w.at_radius(pos.norm()) * plap.picard_coef2(pos, q, eps)) *
           Eigen::Matrix2d::Identity();
  };
  f.energy_density = [w, p](const Eigen::Vector2d& pos, const Eigen::Vector2d& q) {
    return w.at_radius(pos.norm()) * std::pow(q.squaredNorm(), 0.5 * p) / p;
  };
  f.spd_tangent = true;
  f.linear = (p == 2.0);
  f.mirror_equivariant = true;
  return f;
}

std::vector<std::optional<double>> dirichlet_from_tags(
    const mesh::Mesh& m, const std::function<double(const Eigen::Vector2d&)>& data) {
  std::vector<std::optional<double>> out(m.vertex_count());
  std::vector<char> tagged(m.vertex_count(), 0);
  for (const auto& be : m.boundary_edges) {
    if (be.tag == mesh::EdgeTag::dirichlet) {
      tagged[be.v0] = 1;
      tagged[be.v1] = 1;
    }
  }
  for (int v = 0; v < m.vertex_count(); ++v) {
    if (!tagged[v]) continue;
    const int r = m.has_symmetry() ? std::min(v, m.symmetry_map[v]) : v;
    out[v] = data(m.vertices[r]);
  }
  return out;
}

mesh::DiscreteField pull_back(std::shared_ptr<const mesh::Mesh> strip,
                              const mesh::DiscreteField& ball_field,
                              const geometry::TransformParams& params) {
  // Images on the outer circle bulge past the inscribed polygon by the chord
  // defect; the barycentric tolerance must absorb that (clamped interpolation
  // projects such points onto the boundary chord).
  const double tol = 0.25;
  Eigen::VectorXd values(strip->vertex_count());
  for (int v = 0; v < strip->vertex_count(); ++v) {
    const Eigen::Vector2d& x = strip->vertices[v];
    Eigen::Vector2d xi;
    Eigen::Matrix<double, 1, 1> cross;
    cross(0) = std::clamp(x.x(), -1.0, 1.0);
    geometry::detail::forward_into(cross, x.y(), params.kappa, xi);
    values[v] = mesh::interpolate(ball_field, xi, tol);
  }
  return mesh::DiscreteField(std::move(strip), std::move(values));
}

mesh::DiscreteField push_forward(std::shared_ptr<const mesh::Mesh> ball,
                                 const mesh::DiscreteField& strip_field,
                                 const geometry::TransformParams& params) {
  Eigen::VectorXd values(ball->vertex_count());
  for (int v = 0; v < ball->vertex_count(); ++v) {
    const Eigen::Vector2d& xi = ball->vertices[v];
    if (!(xi.norm() > 0.0))
      throw std::domain_error("push_forward: the origin has no preimage");
    const Eigen::Vector2d xi_up(xi.x(), std::abs(xi.y()));
    Eigen::Matrix<double, 1, 1> cross;
    const double height = geometry::detail::inverse_into(xi_up, params.kappa, cross);
    const Eigen::Vector2d x(std::clamp(cross(0), -1.0, 1.0), height);
    values[v] = mesh::interpolate(strip_field, x, 1e-6);
  }
  return mesh::DiscreteField(std::move(ball), std::move(values));
}

std::shared_ptr<const mesh::Mesh> make_matched_annulus(const mesh::Mesh& strip,
                                                       const geometry::TransformParams& params,
                                                       int sectors, mesh::EdgeTag inner_tag) {
  const auto* layout = std::get_if<mesh::StripLayout>(&strip.layout);
  if (!layout) throw std::invalid_argument("make_matched_annulus: strip layout required");
  mesh::DiskOptions opts;
  opts.r_outer = geometry::radius_for_height(layout->ys.front(), params.kappa);
  opts.r_inner = geometry::radius_for_height(layout->ys.back(), params.kappa);
  opts.rings = static_cast<int>(layout->ys.size()) - 1;
  opts.grading_ratio = 16.0;  // rings are pinned by snap radii below
  opts.sectors = sectors;
  opts.inner_tag = inner_tag;
  opts.outer_tag = mesh::EdgeTag::dirichlet;
  for (std::size_t j = 1; j + 1 < layout->ys.size(); ++j)
    opts.snap_radii.push_back(geometry::radius_for_height(layout->ys[j], params.kappa));
  return mesh::make_disk_annulus(opts);
}

double lkappa_norm(const mesh::DiscreteField& field, double kappa, double p) {
  const mesh::Mesh& m = *field.mesh;
  const auto tables = mesh::assemble_gradient_tables(m);
  std::vector<mesh::QuadPoint> qp;
  double total = 0.0;
  for (int t = 0; t < m.triangle_count(); ++t) {
    const auto& tri = m.triangles[t];
    const auto& cell = tables[t];
    Eigen::Vector2d grad = Eigen::Vector2d::Zero();
    for (int i = 0; i < 3; ++i) grad += field.values[tri[i]] * cell.grad[i];
    total += cell.area * std::pow(grad.squaredNorm(), 0.5 * p);
    mesh::quadrature_points(m, t, mesh::QuadratureRule::three_point, qp);
    for (const auto& point : qp) {
      double val = 0.0;
      for (int i = 0; i < 3; ++i) val += point.shape[i] * field.values[tri[i]];
      total += point.weight * std::pow(std::abs(val), p) * std::exp(-p * kappa * point.pos.y());
    }
  }
  return std::pow(total, 1.0 / p);
}

bool comparison_check(const SolveReport& u1, const SolveReport& u2, double allowance) {
  const mesh::Mesh& a = *u1.field.mesh;
  const mesh::Mesh& b = *u2.field.mesh;
  bool same = a.vertex_count() == b.vertex_count();
  for (int v = 0; same && v < a.vertex_count(); ++v) same = a.vertices[v] == b.vertices[v];
  if (!same) throw std::invalid_argument("comparison_check: fields live on different meshes");
  const double slack = 1e-8 + allowance;
  for (int v = 0; v < u1.field.values.size(); ++v)
    if (u1.field.values[v] > u2.field.values[v] + slack) return false;
  return true;
}

}  // namespace cylab::solver
