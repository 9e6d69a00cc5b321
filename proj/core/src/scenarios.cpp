#include "cylab/scenarios.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>
#include <unordered_map>

#include "cylab/geometry.hpp"
#include "cylab/ioutil.hpp"
#include "cylab/solver.hpp"
#include "cylab/trichotomy.hpp"

namespace cylab::scenarios {

namespace {

using report::Json;

operators::CoefficientMap make_map(const spec::ProblemSpec& ps) {
  if (ps.map.kind == operators::MapKind::exp_dir) {
    if (ps.p != 2.0) throw spec::SpecError("p", "must be 2 for the exp_dir map");
    Eigen::VectorXd q0(ps.map.q0.size());
    for (std::size_t i = 0; i < ps.map.q0.size(); ++i) q0[i] = ps.map.q0[i];
    return operators::CoefficientMap::exp_dir(q0);
  }
  return operators::CoefficientMap::p_laplace(ps.p);
}

std::function<double(const Eigen::Vector2d&)> cylinder_data(const spec::ProblemSpec& ps) {
  switch (ps.dirichlet_data.kind) {
    case spec::DataKind::constant: {
      const double c = ps.dirichlet_data.c;
      return [c](const Eigen::Vector2d&) { return c; };
    }
    case spec::DataKind::linear: {
      const double a = ps.dirichlet_data.a, b = ps.dirichlet_data.b;
      return [a, b](const Eigen::Vector2d& x) { return a * x.y() + b; };
    }
    case spec::DataKind::sine_exp:
      return [](const Eigen::Vector2d& x) {
        return std::exp(0.5 * M_PI * x.y()) * std::sin(0.5 * M_PI * x.x());
      };
    case spec::DataKind::nodal:
      throw spec::SpecError("dirichlet_data.kind", "nodal data requires a cylinder solve");
  }
  throw std::logic_error("unreachable data kind");
}

std::unordered_map<int, double> read_nodal_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw spec::SpecError("dirichlet_data.file", "cannot open " + path.string());
  std::unordered_map<int, double> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || std::isalpha(static_cast<unsigned char>(line[0]))) continue;
    std::istringstream row(line);
    int id;
    char comma;
    double value;
    if (row >> id >> comma >> value) out[id] = value;
  }
  return out;
}

void write_solution_csv(const std::filesystem::path& path, const mesh::Mesh& m,
                        const Eigen::VectorXd& values) {
  std::ofstream out(path, std::ios::binary);
  out << "vertex_id,x,y,value\n";
  for (int v = 0; v < m.vertex_count(); ++v)
    out << v << ',' << io::fmt17(m.vertices[v].x()) << ',' << io::fmt17(m.vertices[v].y()) << ','
        << io::fmt17(values[v]) << '\n';
}

void write_sections_csv(const std::filesystem::path& path,
                        const std::vector<trichotomy::SectionStats>& stats) {
  std::ofstream out(path, std::ios::binary);
  out << "tau,min,max,mean\n";
  for (const auto& s : stats)
    out << io::fmt17(s.tau) << ',' << io::fmt17(s.min) << ',' << io::fmt17(s.max) << ','
        << io::fmt17(s.mean) << '\n';
}

std::vector<trichotomy::SectionStats> read_sections_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw spec::SpecError("(sections)", "cannot open " + path.string());
  std::vector<trichotomy::SectionStats> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || std::isalpha(static_cast<unsigned char>(line[0]))) continue;
    std::istringstream row(line);
    trichotomy::SectionStats s;
    char c;
    if (row >> s.tau >> c >> s.min >> c >> s.max >> c >> s.mean) out.push_back(s);
  }
  if (out.empty()) throw spec::SpecError("(sections)", "no data rows in " + path.string());
  return out;
}

void write_wiener_csv(const std::filesystem::path& path,
                      const std::vector<capacity::WienerRow>& rows) {
  std::ofstream out(path, std::ios::binary);
  out << "t,capacity,integrand,partial_integral\n";
  for (const auto& r : rows)
    out << io::fmt17(r.t) << ',' << io::fmt17(r.capacity) << ',' << io::fmt17(r.integrand) << ','
        << io::fmt17(r.partial_integral) << '\n';
}

Json axiom_json(const operators::AxiomReport& rep) {
  Json j = Json::object();
  j.set("samples", Json::integer(rep.samples));
  j.set("violations", Json::integer(rep.violation_count));
  j.set("empirical_alpha1", Json::number(rep.empirical_alpha1));
  j.set("empirical_alpha2", Json::number(rep.empirical_alpha2));
  j.set("min_monotonicity_gap", Json::number(rep.min_monotonicity_gap));
  j.set("max_homogeneity_rel_err", Json::number(rep.max_homogeneity_rel_err));
  Json lambdas = Json::array();
  for (double v : rep.lambdas_tested) lambdas.push(Json::number(v));
  j.set("lambdas_tested", std::move(lambdas));
  return j;
}

Json trichotomy_json(const trichotomy::TrichotomyReport& rep) {
  Json j = Json::object();
  j.set("verdict", Json::string(trichotomy::to_string(rep.verdict)));
  switch (rep.verdict) {
    case trichotomy::Verdict::limit:
      j.set("u_inf", Json::number(rep.u_inf));
      j.set("alpha", Json::number(rep.alpha));
      j.set("alpha_sentinel", Json::boolean(rep.alpha_sentinel));
      if (std::isfinite(rep.alpha_unclamped))
        j.set("alpha_unclamped", Json::number(rep.alpha_unclamped));
      break;
    case trichotomy::Verdict::linear_growth:
      j.set("sign", Json::integer(rep.sign));
      j.set("slope_low", Json::number(rep.slope_low));
      j.set("slope_high", Json::number(rep.slope_high));
      j.set("intercept_low", Json::number(rep.intercept_low));
      j.set("intercept_high", Json::number(rep.intercept_high));
      break;
    case trichotomy::Verdict::sign_changing:
      j.set("growth_rate", Json::number(rep.growth_rate));
      break;
    case trichotomy::Verdict::failed:
      j.set("failure_reason", Json::string(rep.failure_reason));
      break;
  }
  Json fits = Json::object();
  const auto fit_json = [](const trichotomy::LineFit& f) {
    Json out = Json::object();
    out.set("slope", Json::number(f.slope));
    out.set("intercept", Json::number(f.intercept));
    out.set("rel_residual", Json::number(f.rel_residual));
    return out;
  };
  fits.set("min", fit_json(rep.fit_min));
  fits.set("max", fit_json(rep.fit_max));
  fits.set("mean", fit_json(rep.fit_mean));
  j.set("fits", std::move(fits));
  j.set("osc_first", Json::number(rep.osc_first));
  j.set("osc_last", Json::number(rep.osc_last));
  j.set("scale", Json::number(rep.scale));
  Json window = Json::array();
  window.push(Json::number(rep.tau_lo));
  window.push(Json::number(rep.tau_hi));
  j.set("tau_window", std::move(window));
  return j;
}

Json report_header(const std::string& command, const spec::ProblemSpec& ps) {
  Json root = Json::object();
  root.set("version", Json::integer(1));
  root.set("command", Json::string(command));
  root.set("spec", spec::echo_spec(ps));
  return root;
}

void finalize_report(Json& root, const std::filesystem::path& out) {
  report::write_text(out / "report.json", root.dump());
}

struct BuiltProblem {
  solver::MixedProblem problem;
  std::shared_ptr<const mesh::Mesh> mesh;
};

BuiltProblem build_cylinder_problem(const spec::ProblemSpec& ps) {
  mesh::StripOptions sopts;
  sopts.height_max = ps.domain.height;
  sopts.h = ps.mesh.h;
  sopts.base_tag = mesh::EdgeTag::dirichlet;
  sopts.lid_tag = ps.domain.lid == spec::LidCondition::dirichlet ? mesh::EdgeTag::dirichlet
                                                                 : mesh::EdgeTag::neumann;
  for (const auto& b : ps.dirichlet_set.blocks) {
    if (b.kind == capacity::Block::Kind::lateral) {
      sopts.lateral_dirichlet_spans.emplace_back(b.t0, b.t1);
      sopts.snap_heights.push_back(b.t0);
      sopts.snap_heights.push_back(b.t1);
    } else if (b.kind == capacity::Block::Kind::slab) {
      sopts.snap_heights.push_back(b.t0);
      sopts.snap_heights.push_back(b.t1);
      if (b.cross_fraction < 1.0) {
        sopts.snap_cross.push_back(b.cross_fraction);
        sopts.snap_cross.push_back(-b.cross_fraction);
      }
    }
  }
  BuiltProblem built;
  built.mesh = mesh::make_strip(sopts);

  std::vector<std::optional<double>> dirichlet;
  if (ps.dirichlet_data.kind == spec::DataKind::nodal) {
    const auto nodal = read_nodal_file(ps.dirichlet_data.file);
    dirichlet.assign(built.mesh->vertex_count(), std::nullopt);
    std::vector<char> tagged(built.mesh->vertex_count(), 0);
    for (const auto& be : built.mesh->boundary_edges)
      if (be.tag == mesh::EdgeTag::dirichlet) tagged[be.v0] = tagged[be.v1] = 1;
    for (int v = 0; v < built.mesh->vertex_count(); ++v) {
      if (!tagged[v]) continue;
      const auto it = nodal.find(v);
      if (it == nodal.end())
        throw spec::SpecError("dirichlet_data.file",
                              "missing value for Dirichlet vertex " + std::to_string(v));
      dirichlet[v] = it->second;
    }
  } else {
    const auto f = cylinder_data(ps);
    dirichlet = solver::dirichlet_from_tags(*built.mesh, f);
    // Slab blocks pin interior vertices as well.
    const double tol = 1e-9;
    for (const auto& b : ps.dirichlet_set.blocks) {
      if (b.kind != capacity::Block::Kind::slab) continue;
      for (int v = 0; v < built.mesh->vertex_count(); ++v) {
        const Eigen::Vector2d& x = built.mesh->vertices[v];
        if (x.y() >= b.t0 - tol && x.y() <= b.t1 + tol &&
            std::abs(x.x()) <= b.cross_fraction + tol)
          dirichlet[v] = f(x);
      }
    }
  }

  built.problem.mesh = built.mesh;
  built.problem.field = solver::make_cylinder_field(make_map(ps));
  built.problem.dirichlet = std::move(dirichlet);
  built.problem.tol = ps.solver.tol;
  built.problem.max_iter = ps.solver.max_iter;
  if (!ps.solver.epsilon_schedule.empty())
    built.problem.epsilon_schedule = ps.solver.epsilon_schedule;
  return built;
}

BuiltProblem build_ball_problem(const spec::ProblemSpec& ps) {
  const geometry::TransformParams params(ps.kappa, 2);
  mesh::DiskOptions dopts;
  dopts.r_outer = 1.0;
  dopts.r_inner = 0.0;
  dopts.puncture_delta = ps.domain.puncture_delta;
  dopts.rings = ps.mesh.rings;
  dopts.grading_ratio = std::min(1.5, std::exp(ps.kappa * ps.mesh.h));
  dopts.sectors = ps.mesh.sectors;
  dopts.inner_tag = ps.domain.inner == spec::InnerCondition::dirichlet
                        ? mesh::EdgeTag::dirichlet
                        : mesh::EdgeTag::inner_hole;
  dopts.outer_tag = mesh::EdgeTag::dirichlet;
  for (const auto& b : ps.dirichlet_set.blocks) {
    if (b.kind == capacity::Block::Kind::base) continue;
    dopts.snap_radii.push_back(geometry::radius_for_height(b.t1, ps.kappa));
    dopts.snap_radii.push_back(geometry::radius_for_height(b.t0, ps.kappa));
  }

  BuiltProblem built;
  built.mesh = mesh::make_disk_annulus(dopts);

  const auto f_cyl = cylinder_data(ps);
  const auto f_ball = [f_cyl, params](const Eigen::Vector2d& xi) {
    const Eigen::Vector2d xi_up(xi.x(), std::abs(xi.y()));
    Eigen::Matrix<double, 1, 1> cross;
    const double height = geometry::detail::inverse_into(xi_up, params.kappa, cross);
    return f_cyl(Eigen::Vector2d(std::clamp(cross(0), -1.0, 1.0), height));
  };
  auto dirichlet = solver::dirichlet_from_tags(*built.mesh, f_ball);

  const double tol = 1e-9;
  for (const auto& b : ps.dirichlet_set.blocks) {
    if (b.kind == capacity::Block::Kind::base) continue;  // the outer circle, already tagged
    const double r_lo = geometry::radius_for_height(b.t1, ps.kappa);
    const double r_hi = geometry::radius_for_height(b.t0, ps.kappa);
    for (int v = 0; v < built.mesh->vertex_count(); ++v) {
      const Eigen::Vector2d& xi = built.mesh->vertices[v];
      const double r = xi.norm();
      if (r < r_lo - tol || r > r_hi + tol) continue;
      bool inside = false;
      if (b.kind == capacity::Block::Kind::lateral) {
        inside = std::abs(xi.y()) <= tol;
      } else {
        inside = std::abs(xi.x()) / (r + std::abs(xi.y())) <= b.cross_fraction + tol;
      }
      if (inside) {
        const int rep = built.mesh->has_symmetry()
                            ? std::min(v, built.mesh->symmetry_map[v])
                            : v;
        dirichlet[v] = f_ball(built.mesh->vertices[rep]);
      }
    }
  }

  built.problem.mesh = built.mesh;
  built.problem.field =
      solver::make_ball_field(operators::TransformedMap(make_map(ps), params, true));
  built.problem.dirichlet = std::move(dirichlet);
  built.problem.tol = ps.solver.tol;
  built.problem.max_iter = ps.solver.max_iter;
  if (!ps.solver.epsilon_schedule.empty())
    built.problem.epsilon_schedule = ps.solver.epsilon_schedule;
  return built;
}

int run_solve(const spec::ProblemSpec& ps, const std::filesystem::path& out,
              const RunOptions& opts) {
  if (ps.n != 2) throw spec::SpecError("n", "the discretized solver requires n = 2");
  if (!ps.dirichlet_set.contains_base())
    throw spec::SpecError("dirichlet_set", "must contain the base block");

  const BuiltProblem built = ps.domain.kind == spec::DomainKind::cylinder
                                 ? build_cylinder_problem(ps)
                                 : build_ball_problem(ps);
  const solver::SolveReport rep = solver::solve(built.problem);

  write_solution_csv(out / "solution.csv", *built.mesh, rep.field.values);
  Json root = report_header("solve", ps);
  Json mesh_info = Json::object();
  mesh_info.set("vertices", Json::integer(built.mesh->vertex_count()));
  mesh_info.set("triangles", Json::integer(built.mesh->triangle_count()));
  root.set("mesh", std::move(mesh_info));

  Json solve_info = Json::object();
  solve_info.set("converged", Json::boolean(rep.converged));
  solve_info.set("iterations", Json::integer(rep.iterations));
  solve_info.set("residual_norm", Json::number(rep.residual_norm));
  if (rep.energy) solve_info.set("energy", Json::number(*rep.energy));
  root.set("solve", std::move(solve_info));

  Json outputs = Json::object();
  outputs.set("solution", Json::string("solution.csv"));
  if (ps.domain.kind == spec::DomainKind::cylinder) {
    const auto stats = trichotomy::section_stats(rep.field, trichotomy::section_heights(*built.mesh));
    write_sections_csv(out / "sections.csv", stats);
    outputs.set("sections", Json::string("sections.csv"));
  }
  if (opts.dump_mesh) {
    mesh::write_mesh_csv(*built.mesh, out);
    outputs.set("mesh", Json::string("vertices.csv, triangles.csv, edges.csv"));
  }
  root.set("outputs", std::move(outputs));
  finalize_report(root, out);
  return rep.converged ? 0 : 3;
}

capacity::CapacityOptions capacity_options(const spec::ProblemSpec& ps) {
  capacity::CapacityOptions copts;
  copts.sectors = ps.mesh.sectors;
  copts.h = ps.mesh.h;
  copts.tol = ps.solver.tol;
  copts.max_iter = ps.solver.max_iter;
  copts.grading_ratio = 1.2;
  return copts;
}

int run_capacity(const spec::ProblemSpec& ps, const std::filesystem::path& out) {
  if (ps.n != 2) throw spec::SpecError("n", "the discretized solver requires n = 2");
  if (!ps.capacity) throw spec::SpecError("capacity", "required for the capacity command");
  capacity::CapacityOptions copts = capacity_options(ps);
  copts.refine_once = ps.capacity->refine;

  capacity::CapacityEstimate est;
  switch (ps.capacity->kind) {
    case spec::CapacityKind::condenser:
      est = capacity::condenser_capacity_ball(ps.capacity->rho, ps.capacity->r, ps.p, ps.n, copts);
      break;
    case spec::CapacityKind::sobolev:
      est = capacity::sobolev_capacity(ps.dirichlet_set, ps.kappa, ps.p, ps.n, copts);
      break;
    case spec::CapacityKind::neumann:
      est = capacity::neumann_capacity(ps.dirichlet_set, ps.capacity->t, ps.p, copts);
      break;
  }

  Json root = report_header("capacity", ps);
  Json cap = Json::object();
  cap.set("kind", Json::string(spec::to_string(ps.capacity->kind)));
  cap.set("value", Json::number(est.value));
  cap.set("minimizer_energy", Json::number(est.minimizer_energy));
  cap.set("mesh_h", Json::number(est.mesh_h));
  if (est.refined_value) cap.set("refined_value", Json::number(*est.refined_value));
  cap.set("iterations", Json::integer(est.iterations));
  cap.set("converged", Json::boolean(est.converged));
  cap.set("unresolved_blocks", Json::boolean(est.unresolved_blocks));
  root.set("capacity", std::move(cap));
  finalize_report(root, out);
  return est.converged ? 0 : 3;
}

int run_wiener(const spec::ProblemSpec& ps, const std::filesystem::path& out) {
  if (ps.n != 2) throw spec::SpecError("n", "the discretized solver requires n = 2");
  const std::vector<double> grid = (ps.wiener && !ps.wiener->t_grid.empty())
                                       ? ps.wiener->t_grid
                                       : capacity::default_t_grid();
  const capacity::RegularityReport rep =
      capacity::classify_regularity(ps.dirichlet_set, ps.p, grid, capacity_options(ps));

  write_wiener_csv(out / "wiener.csv", rep.rows);
  Json root = report_header("wiener", ps);
  Json w = Json::object();
  w.set("verdict", Json::string(capacity::to_string(rep.verdict)));
  w.set("fitted_c", Json::number(rep.fitted_c));
  w.set("fitted_beta", Json::number(rep.fitted_beta));
  w.set("tail_vanishes", Json::boolean(rep.tail_vanishes));
  w.set("detail", Json::string(rep.detail));
  Json rows = Json::array();
  for (const auto& r : rep.rows) {
    Json row = Json::object();
    row.set("t", Json::number(r.t));
    row.set("capacity", Json::number(r.capacity));
    row.set("integrand", Json::number(r.integrand));
    row.set("partial_integral", Json::number(r.partial_integral));
    rows.push(std::move(row));
  }
  w.set("rows", std::move(rows));
  root.set("wiener", std::move(w));
  Json outputs = Json::object();
  outputs.set("wiener", Json::string("wiener.csv"));
  root.set("outputs", std::move(outputs));
  finalize_report(root, out);
  return 0;
}

int run_classify(const spec::ProblemSpec& ps, const std::filesystem::path& out,
                 const RunOptions& opts) {
  const std::filesystem::path sections_path =
      opts.sections_file.empty() ? out / "sections.csv" : std::filesystem::path(opts.sections_file);
  const auto stats = read_sections_csv(sections_path);
  trichotomy::ClassifyOptions copts;
  copts.kappa = ps.kappa;
  trichotomy::TrichotomyReport rep;
  try {
    rep = trichotomy::classify(stats, copts);
  } catch (const std::invalid_argument& e) {
    // Malformed section input is a validation failure, not a verdict.
    throw spec::SpecError("(sections)", e.what());
  }

  Json root = report_header("classify", ps);
  root.set("trichotomy", trichotomy_json(rep));
  finalize_report(root, out);
  return 0;
}

int run_verify_map(const spec::ProblemSpec& ps, const std::filesystem::path& out) {
  const operators::CoefficientMap map = make_map(ps);
  constexpr int kSamples = 10000;
  const operators::AxiomReport rep_a = operators::verify_axioms(map, kSamples, ps.seed, ps.n);
  const operators::TransformedMap tmap(map, geometry::TransformParams(ps.kappa, ps.n), true);
  const operators::AxiomReport rep_b = operators::verify_axioms(tmap, kSamples, ps.seed + 1);

  Json root = report_header("verify-map", ps);
  Json axioms = Json::object();
  axioms.set("map", axiom_json(rep_a));
  axioms.set("transformed", axiom_json(rep_b));
  if (map.kind() == operators::MapKind::exp_dir) {
    Eigen::VectorXd q0(ps.map.q0.size());
    for (std::size_t i = 0; i < ps.map.q0.size(); ++i) q0[i] = ps.map.q0[i];
    const operators::AngularReport ang =
        operators::verify_angular_condition(q0, kSamples, ps.seed + 2);
    Json a = Json::object();
    a.set("samples", Json::integer(ang.samples));
    a.set("violations", Json::integer(ang.violation_count));
    a.set("min_margin", Json::number(ang.min_margin));
    axioms.set("angular", std::move(a));
  }
  root.set("axioms", std::move(axioms));
  finalize_report(root, out);
  return 0;
}

}  // namespace

int run_command(const std::string& command, const spec::ProblemSpec& ps,
                const std::filesystem::path& out, const RunOptions& opts) {
  std::filesystem::create_directories(out);
  if (command == "solve") return run_solve(ps, out, opts);
  if (command == "capacity") return run_capacity(ps, out);
  if (command == "wiener") return run_wiener(ps, out);
  if (command == "classify") return run_classify(ps, out, opts);
  if (command == "verify-map") return run_verify_map(ps, out);
  throw spec::SpecError("(command)", "unknown command '" + command + "'");
}

}  // namespace cylab::scenarios
