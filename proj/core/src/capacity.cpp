#include "cylab/capacity.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <future>
#include <limits>
#include <stdexcept>
#include <thread>

#include "cylab/geometry.hpp"

namespace cylab::capacity {

namespace {

int worker_count(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

// Geometric cluster of axis points approaching `edge` from one side, starting
// at distance `scale` and growing until `limit`.
void graded_points(double edge, double direction, double scale, double limit,
                   std::vector<double>& out) {
  if (!(scale > 0.0) || !(scale < limit)) return;
  for (double s = scale; s < limit; s *= 2.0) out.push_back(edge + direction * s);
}

// Pins v = 1 on the vertices of the K blocks (cylinder chart) and v = 0 on
// the bottom row.
std::vector<std::optional<double>> pin_neumann(const mesh::Mesh& m, const std::vector<Block>& k_blocks,
                                               double floor_height) {
  std::vector<std::optional<double>> dirichlet(m.vertex_count());
  const double tol = 1e-9;
  for (int v = 0; v < m.vertex_count(); ++v) {
    const Eigen::Vector2d& x = m.vertices[v];
    if (x.y() <= floor_height + tol) {
      dirichlet[v] = 0.0;
      continue;
    }
    for (const Block& b : k_blocks) {
      if (x.y() < b.t0 - tol || x.y() > b.t1 + tol) continue;
      const bool inside = b.kind == Block::Kind::lateral
                              ? std::abs(x.x()) >= 1.0 - tol
                              : std::abs(x.x()) <= b.cross_fraction + tol;
      if (inside) {
        dirichlet[v] = 1.0;
        break;
      }
    }
  }
  return dirichlet;
}

double unweighted_energy(const mesh::Mesh& m, const Eigen::VectorXd& values, double p) {
  const auto tables = mesh::assemble_gradient_tables(m);
  double total = 0.0;
  for (int t = 0; t < m.triangle_count(); ++t) {
    const auto& tri = m.triangles[t];
    Eigen::Vector2d grad = Eigen::Vector2d::Zero();
    for (int i = 0; i < 3; ++i) grad += values[tri[i]] * tables[t].grad[i];
    total += tables[t].area * std::pow(grad.squaredNorm(), 0.5 * p);
  }
  return total;
}

double weighted_energy(const mesh::Mesh& m, const Eigen::VectorXd& values, double p, int n,
                       bool with_mass) {
  const operators::Weight w{p, n};
  const auto tables = mesh::assemble_gradient_tables(m);
  double total = 0.0;
  for (int t = 0; t < m.triangle_count(); ++t) {
    const auto& tri = m.triangles[t];
    Eigen::Vector2d grad = Eigen::Vector2d::Zero();
    for (int i = 0; i < 3; ++i) grad += values[tri[i]] * tables[t].grad[i];
    const double weight = w.at_radius(tables[t].barycenter.norm());
    double density = std::pow(grad.squaredNorm(), 0.5 * p);
    if (with_mass) {
      const double vbar = (values[tri[0]] + values[tri[1]] + values[tri[2]]) / 3.0;
      density += std::pow(std::abs(vbar), p);
    }
    total += tables[t].area * weight * density;
  }
  return total;
}

struct BallSolve {
  solver::SolveReport report;
  double value = 0.0;
};

BallSolve solve_ball_capacity(const std::shared_ptr<const mesh::Mesh>& m,
                              const std::vector<std::optional<double>>& dirichlet, double p, int n,
                              bool with_mass, const CapacityOptions& opts) {
  solver::MixedProblem problem;
  problem.mesh = m;
  problem.field = solver::make_weighted_plaplace_field(p, n);
  problem.dirichlet = dirichlet;
  problem.tol = opts.tol;
  problem.max_iter = opts.max_iter;
  if (with_mass) {
    const operators::Weight w{p, n};
    problem.zero_order =
        solver::ZeroOrderTerm{[w](const Eigen::Vector2d& pos) { return w.at_radius(pos.norm()); }, p};
  }
  BallSolve out;
  out.report = solver::solve(problem);
  out.value = weighted_energy(*m, out.report.field.values, p, n, with_mass);
  return out;
}

std::vector<std::optional<double>> pin_by_radius(const mesh::Mesh& m, double inner_radius,
                                                 double outer_radius) {
  std::vector<std::optional<double>> dirichlet(m.vertex_count());
  const double tol = 1e-9 * outer_radius;
  for (int v = 0; v < m.vertex_count(); ++v) {
    const double r = m.vertices[v].norm();
    if (r <= inner_radius + tol)
      dirichlet[v] = 1.0;
    else if (r >= outer_radius - tol)
      dirichlet[v] = 0.0;
  }
  return dirichlet;
}

}  // namespace

void Block::validate() const {
  if (kind == Block::Kind::base) return;
  if (!(t0 <= t1) || !std::isfinite(t0) || !std::isfinite(t1))
    throw std::invalid_argument("block: need finite t0 <= t1");
  if (!(t0 >= 0.0)) throw std::invalid_argument("block: t0 must be >= 0");
  if (kind == Block::Kind::slab && !(cross_fraction > 0.0 && cross_fraction <= 1.0))
    throw std::invalid_argument("block: cross_fraction must be in (0, 1]");
}

bool BlockSet::contains_base() const {
  for (const Block& b : blocks)
    if (b.kind == Block::Kind::base) return true;
  return false;
}

void BlockSet::validate() const {
  for (const Block& b : blocks) b.validate();
}

double BlockSet::max_height() const {
  double top = 0.0;
  for (const Block& b : blocks)
    if (b.kind != Block::Kind::base) top = std::max(top, b.t1);
  return top;
}

std::vector<Block> BlockSet::clip(double lo, double hi, double min_width) const {
  std::vector<Block> out;
  for (const Block& b : blocks) {
    if (b.kind == Block::Kind::base) continue;
    Block c = b;
    c.t0 = std::max(b.t0, lo);
    c.t1 = std::min(b.t1, hi);
    if (c.t1 - c.t0 >= min_width) out.push_back(c);
  }
  return out;
}

CapacityEstimate condenser_capacity_ball(double rho, double r, double p, int n,
                                         const CapacityOptions& opts) {
  if (!(rho > 0.0) || !(rho < r))
    throw std::invalid_argument("condenser capacity: need 0 < rho < r");
  if (!(r <= 1.0)) throw std::invalid_argument("condenser capacity: need r <= 1");

  mesh::DiskOptions dopts;
  dopts.r_outer = r;
  dopts.r_inner = rho;
  dopts.grading_ratio = opts.grading_ratio;
  dopts.sectors = opts.sectors;
  dopts.inner_tag = mesh::EdgeTag::dirichlet;
  dopts.outer_tag = mesh::EdgeTag::dirichlet;
  auto m = mesh::make_disk_annulus(dopts);

  const auto run = [&](const std::shared_ptr<const mesh::Mesh>& mm) {
    return solve_ball_capacity(mm, pin_by_radius(*mm, rho, r), p, n, false, opts);
  };
  BallSolve coarse = run(m);

  CapacityEstimate est;
  est.value = est.minimizer_energy = coarse.value;
  est.iterations = coarse.report.iterations;
  est.converged = coarse.report.converged;
  const auto* layout = std::get_if<mesh::PolarLayout>(&m->layout);
  double max_gap = 0.0;
  for (std::size_t i = 1; i < layout->radii.size(); ++i)
    max_gap = std::max(max_gap, layout->radii[i] - layout->radii[i - 1]);
  est.mesh_h = max_gap;

  if (opts.refine_once) {
    BallSolve fine = run(mesh::refine(*m));
    est.refined_value = fine.value;
    if (!(fine.value <= est.value + 1e-12))
      throw std::runtime_error("condenser capacity: refinement increased the infimum estimate");
  }
  return est;
}

CapacityEstimate sobolev_capacity_ball(double rho, double p, int n, const CapacityOptions& opts,
                                       double support_radius) {
  if (rho <= 0.0) return CapacityEstimate{0.0, 0.0, 0.0, std::nullopt, 0, true, false};
  if (!(rho < support_radius))
    throw std::invalid_argument("sobolev capacity: rho must be < support radius");

  mesh::DiskOptions dopts;
  dopts.r_outer = support_radius;
  dopts.r_inner = 0.0;
  dopts.puncture_delta = 1e-6;
  dopts.grading_ratio = opts.grading_ratio;
  dopts.sectors = opts.sectors;
  dopts.snap_radii = {rho};
  auto m = mesh::make_disk_annulus(dopts);

  const auto run = [&](const std::shared_ptr<const mesh::Mesh>& mm) {
    return solve_ball_capacity(mm, pin_by_radius(*mm, rho, support_radius), p, n, true, opts);
  };
  BallSolve coarse = run(m);

  CapacityEstimate est;
  est.value = est.minimizer_energy = coarse.value;
  est.iterations = coarse.report.iterations;
  est.converged = coarse.report.converged;
  est.mesh_h = support_radius * 2.0 * M_PI / opts.sectors;
  if (opts.refine_once) {
    BallSolve fine = run(mesh::refine(*m));
    est.refined_value = fine.value;
    if (!(fine.value <= est.value + 1e-12))
      throw std::runtime_error("sobolev capacity: refinement increased the infimum estimate");
  }
  return est;
}

CapacityEstimate sobolev_capacity(const BlockSet& K, double kappa, double p, int n,
                                  const CapacityOptions& opts) {
  K.validate();
  if (K.blocks.empty()) return CapacityEstimate{0.0, 0.0, 0.0, std::nullopt, 0, true, false};

  const bool has_base = K.contains_base();
  const double support_radius = has_base ? 2.0 : 1.0;

  mesh::DiskOptions dopts;
  dopts.r_outer = support_radius;
  dopts.r_inner = 0.0;
  dopts.puncture_delta = 1e-6 / support_radius;  // keep the hole at 1e-6 absolute
  dopts.grading_ratio = opts.grading_ratio;
  dopts.sectors = opts.sectors;
  if (has_base) dopts.snap_radii.push_back(1.0);
  for (const Block& b : K.blocks) {
    if (b.kind == Block::Kind::base) continue;
    dopts.snap_radii.push_back(geometry::radius_for_height(b.t1, kappa));
    dopts.snap_radii.push_back(geometry::radius_for_height(b.t0, kappa));
  }
  auto m = mesh::make_disk_annulus(dopts);

  const double tol = 1e-9;
  std::vector<std::optional<double>> dirichlet(m->vertex_count());
  for (int v = 0; v < m->vertex_count(); ++v) {
    const Eigen::Vector2d& xi = m->vertices[v];
    const double r = xi.norm();
    if (r >= support_radius * (1.0 - tol)) {
      dirichlet[v] = 0.0;
      continue;
    }
    for (const Block& b : K.blocks) {
      bool inside = false;
      if (b.kind == Block::Kind::base) {
        inside = r >= 1.0 - tol;
      } else {
        const double r_lo = geometry::radius_for_height(b.t1, kappa);
        const double r_hi = geometry::radius_for_height(b.t0, kappa);
        if (r >= r_lo - tol && r <= r_hi + tol) {
          if (b.kind == Block::Kind::lateral) {
            inside = std::abs(xi.y()) <= tol;
          } else {
            const double cross = std::abs(xi.x()) / (r + std::abs(xi.y()));
            inside = cross <= b.cross_fraction + tol;
          }
        }
      }
      if (inside) {
        dirichlet[v] = 1.0;
        break;
      }
    }
  }

  BallSolve run = solve_ball_capacity(m, dirichlet, p, n, true, opts);
  CapacityEstimate est;
  est.value = est.minimizer_energy = run.value;
  est.iterations = run.report.iterations;
  est.converged = run.report.converged;
  est.mesh_h = support_radius * 2.0 * M_PI / opts.sectors;
  return est;
}

CapacityEstimate neumann_capacity(const BlockSet& K, double t, double p,
                                  const CapacityOptions& opts) {
  if (!(t >= 1.0)) throw std::invalid_argument("neumann capacity: t must be >= 1");
  K.validate();
  const double floor_height = t - 1.0;
  for (const Block& b : K.blocks) {
    if (b.kind == Block::Kind::base || !(b.t0 > floor_height) || !std::isfinite(b.t1))
      throw std::invalid_argument("neumann capacity: K must be a compact subset above height t-1");
  }
  if (K.blocks.empty()) return CapacityEstimate{0.0, 0.0, opts.h, std::nullopt, 0, true, false};

  // The minimizer is constant above the top of K, so the strip is truncated
  // one unit above it with a free lid.
  const double top = K.max_height() + 1.0;

  mesh::StripOptions sopts;
  sopts.height_min = floor_height;
  sopts.height_max = top;
  sopts.h = opts.h;
  sopts.base_tag = mesh::EdgeTag::dirichlet;
  sopts.lid_tag = mesh::EdgeTag::neumann;
  for (const Block& b : K.blocks) {
    sopts.snap_heights.push_back(b.t0);
    sopts.snap_heights.push_back(b.t1);
    const double width = b.t1 - b.t0;
    if (width < opts.h) {
      // Geometric row clusters resolve the potential of a thin block at its
      // own scale on both sides.
      graded_points(b.t0, -1.0, width, opts.h, sopts.snap_heights);
      graded_points(b.t1, +1.0, width, opts.h, sopts.snap_heights);
      if (b.kind == Block::Kind::lateral) {
        graded_points(1.0, -1.0, width, 0.5, sopts.snap_cross);
        graded_points(-1.0, +1.0, width, 0.5, sopts.snap_cross);
      }
    }
    if (b.kind == Block::Kind::slab && b.cross_fraction < 1.0) {
      sopts.snap_cross.push_back(b.cross_fraction);
      sopts.snap_cross.push_back(-b.cross_fraction);
    }
  }
  auto m = mesh::make_strip(sopts);

  solver::MixedProblem problem;
  problem.mesh = m;
  problem.field = solver::make_cylinder_field(operators::CoefficientMap::p_laplace(p));
  problem.dirichlet = pin_neumann(*m, K.blocks, floor_height);
  problem.tol = opts.tol;
  problem.max_iter = opts.max_iter;

  bool any_pinned_one = false;
  for (const auto& d : problem.dirichlet)
    if (d && *d == 1.0) any_pinned_one = true;
  if (!any_pinned_one) {
    CapacityEstimate est{0.0, 0.0, opts.h, std::nullopt, 0, true, false};
    est.unresolved_blocks = true;
    return est;
  }

  solver::SolveReport report = solver::solve(problem);
  CapacityEstimate est;
  est.value = est.minimizer_energy = unweighted_energy(*m, report.field.values, p);
  est.iterations = report.iterations;
  est.converged = report.converged;
  est.mesh_h = opts.h;
  if (opts.refine_once) {
    auto fine = mesh::refine(*m);
    solver::MixedProblem fine_problem = problem;
    fine_problem.mesh = fine;
    fine_problem.dirichlet = pin_neumann(*fine, K.blocks, floor_height);
    solver::SolveReport fine_report = solver::solve(fine_problem);
    est.refined_value = unweighted_energy(*fine, fine_report.field.values, p);
    if (!(*est.refined_value <= est.value + 1e-12))
      throw std::runtime_error("neumann capacity: refinement increased the infimum estimate");
  }
  return est;
}

double wiener_integrand(const BlockSet& F, double t, double p, const CapacityOptions& opts) {
  if (!(t >= 1.0)) throw std::invalid_argument("wiener integrand: t must be >= 1");
  BlockSet window;
  window.blocks = F.clip(t, 2.0 * t);
  if (window.blocks.empty()) return 0.0;
  const CapacityEstimate cap = neumann_capacity(window, t, p, opts);
  return std::pow(cap.value, 1.0 / (p - 1.0));
}

const char* to_string(Regularity r) {
  switch (r) {
    case Regularity::regular: return "Regular";
    case Regularity::irregular: return "Irregular";
    case Regularity::inconclusive: return "Inconclusive";
  }
  return "?";
}

std::vector<double> default_t_grid() {
  std::vector<double> grid(9);
  for (int k = 0; k <= 8; ++k) grid[k] = std::exp2(0.5 * k);
  return grid;
}

RegularityReport classify_regularity(const BlockSet& F, double p,
                                     const std::vector<double>& t_grid,
                                     const CapacityOptions& opts) {
  if (t_grid.size() < 4) throw std::invalid_argument("classify_regularity: need >= 4 grid points");
  for (std::size_t i = 1; i < t_grid.size(); ++i)
    if (!(t_grid[i] > t_grid[i - 1]))
      throw std::invalid_argument("classify_regularity: t_grid must be increasing");
  if (!(t_grid.back() >= 4.0 * t_grid.front()))
    throw std::invalid_argument("classify_regularity: t_grid must span a factor of >= 4");

  RegularityReport rep;
  rep.rows.resize(t_grid.size());

  const int workers = worker_count(opts.threads);
  std::vector<std::future<std::pair<double, double>>> futures(t_grid.size());
  const auto eval = [&](double t) -> std::pair<double, double> {
    BlockSet window;
    window.blocks = F.clip(t, 2.0 * t);
    if (window.blocks.empty()) return {0.0, 0.0};
    const CapacityEstimate cap = neumann_capacity(window, t, p, opts);
    return {cap.value, std::pow(cap.value, 1.0 / (p - 1.0))};
  };
  if (workers > 1) {
    for (std::size_t i = 0; i < t_grid.size(); ++i)
      futures[i] = std::async(std::launch::async, eval, t_grid[i]);
    for (std::size_t i = 0; i < t_grid.size(); ++i) {
      const auto [cap, integrand] = futures[i].get();
      rep.rows[i] = {t_grid[i], cap, integrand, 0.0};
    }
  } else {
    for (std::size_t i = 0; i < t_grid.size(); ++i) {
      const auto [cap, integrand] = eval(t_grid[i]);
      rep.rows[i] = {t_grid[i], cap, integrand, 0.0};
    }
  }

  double partial = 0.0;
  for (std::size_t i = 1; i < rep.rows.size(); ++i) {
    partial += 0.5 * (rep.rows[i].integrand + rep.rows[i - 1].integrand) *
               (rep.rows[i].t - rep.rows[i - 1].t);
    rep.rows[i].partial_integral = partial;
  }

  // Tail fit over the upper half of the grid: integrand(t) ~ c t^{-beta}.
  const std::size_t tail_start = rep.rows.size() / 2;
  double tail_max = 0.0;
  for (std::size_t i = tail_start; i < rep.rows.size(); ++i)
    tail_max = std::max(tail_max, rep.rows[i].integrand);
  if (tail_max < 1e-10) {
    rep.tail_vanishes = true;
    rep.verdict = Regularity::irregular;
    rep.detail = "tail integrand below 1e-10";
    return rep;
  }

  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  int count = 0;
  for (std::size_t i = tail_start; i < rep.rows.size(); ++i) {
    if (rep.rows[i].integrand <= 1e-12) continue;
    const double x = std::log(rep.rows[i].t);
    const double y = std::log(rep.rows[i].integrand);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++count;
  }
  if (count < 2) {
    rep.verdict = Regularity::inconclusive;
    rep.detail = "insufficient usable tail points";
    return rep;
  }
  const double denom = count * sxx - sx * sx;
  const double slope = (count * sxy - sx * sy) / denom;
  const double intercept = (sy - slope * sx) / count;
  rep.fitted_beta = -slope;
  rep.fitted_c = std::exp(intercept);

  if (rep.fitted_beta <= 0.9 && rep.fitted_c > 0.0) {
    rep.verdict = Regularity::regular;
    rep.detail = "tail decays slower than 1/t";
  } else if (rep.fitted_beta >= 1.5) {
    rep.verdict = Regularity::irregular;
    rep.detail = "tail integrable with margin";
  } else {
    rep.verdict = Regularity::inconclusive;
    rep.detail = "tail exponent in the borderline band (0.9, 1.5)";
  }
  return rep;
}

}  // namespace cylab::capacity
