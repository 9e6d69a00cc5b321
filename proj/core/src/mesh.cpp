#include "cylab/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <stdexcept>
#include <unordered_map>

#include "cylab/ioutil.hpp"

namespace cylab::mesh {

namespace {

constexpr double kMinArea = 1e-14;

double signed_area(const Eigen::Vector2d& a, const Eigen::Vector2d& b, const Eigen::Vector2d& c) {
  return 0.5 * ((b.x() - a.x()) * (c.y() - a.y()) - (c.x() - a.x()) * (b.y() - a.y()));
}

// Uniform subdivision of [lo, hi] at spacing ~h plus snap points, merged with
// a minimal separation so no degenerate row/column survives.
std::vector<double> build_axis(double lo, double hi, double h, const std::vector<double>& snaps) {
  if (!(hi > lo)) throw std::invalid_argument("mesh axis: empty interval");
  if (!(h > 0.0) || h > 0.5) throw std::invalid_argument("mesh axis: h must be in (0, 0.5]");
  const int nseg = std::max(1, static_cast<int>(std::lround((hi - lo) / h)));
  std::vector<double> pts(nseg + 1);
  for (int i = 0; i <= nseg; ++i) pts[i] = lo + (hi - lo) * i / nseg;
  const double min_gap = 1e-9 * std::max(1.0, std::abs(hi) + std::abs(lo));
  for (double s : snaps) {
    if (s > lo + min_gap && s < hi - min_gap) pts.push_back(s);
  }
  std::sort(pts.begin(), pts.end());
  std::vector<double> out;
  out.reserve(pts.size());
  out.push_back(pts.front());
  for (std::size_t i = 1; i + 1 < pts.size(); ++i) {
    if (pts[i] - out.back() >= min_gap && hi - pts[i] >= min_gap) out.push_back(pts[i]);
  }
  out.push_back(hi);
  return out;
}

std::int64_t edge_key(int a, int b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::int64_t>(a) << 32) | static_cast<std::uint32_t>(b);
}

}  // namespace

const char* to_string(EdgeTag tag) {
  switch (tag) {
    case EdgeTag::dirichlet: return "dirichlet";
    case EdgeTag::neumann: return "neumann";
    case EdgeTag::inner_hole: return "inner_hole";
  }
  return "?";
}

double Mesh::triangle_area(int t) const {
  const auto& tri = triangles[t];
  return signed_area(vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]);
}

void Mesh::validate() const {
  const int nv = vertex_count();
  for (const auto& tri : triangles)
    for (int v : tri)
      if (v < 0 || v >= nv) throw std::runtime_error("mesh: triangle references invalid vertex");

  for (int t = 0; t < triangle_count(); ++t) {
    const double area = triangle_area(t);
    if (!(area > kMinArea)) throw std::runtime_error("mesh: degenerate or inverted triangle");
  }

  // Conformity: every edge belongs to one or two triangles, and the
  // one-triangle edges are exactly the tagged boundary edges.
  std::map<std::int64_t, int> edge_count;
  for (const auto& tri : triangles) {
    for (int e = 0; e < 3; ++e) {
      const int a = tri[e];
      const int b = tri[(e + 1) % 3];
      edge_count[edge_key(a, b)]++;
    }
  }
  for (const auto& [key, count] : edge_count) {
    (void)key;
    if (count > 2) throw std::runtime_error("mesh: edge shared by more than two triangles");
  }
  std::map<std::int64_t, int> tag_count;
  for (const auto& be : boundary_edges) tag_count[edge_key(be.v0, be.v1)]++;
  for (const auto& [key, count] : tag_count)
    if (count != 1) throw std::runtime_error("mesh: boundary edge tagged more than once");
  for (const auto& [key, count] : edge_count) {
    const bool on_boundary = (count == 1);
    const bool tagged = tag_count.count(key) > 0;
    if (on_boundary != tagged)
      throw std::runtime_error("mesh: boundary edge set does not match tagged edges");
  }

  if (!symmetry_map.empty()) {
    if (static_cast<int>(symmetry_map.size()) != nv)
      throw std::runtime_error("mesh: symmetry map size mismatch");
    for (int v = 0; v < nv; ++v) {
      const int w = symmetry_map[v];
      if (w < 0 || w >= nv || symmetry_map[w] != v)
        throw std::runtime_error("mesh: symmetry map is not an involution");
      if (vertices[w].x() != vertices[v].x() || vertices[w].y() != -vertices[v].y())
        throw std::runtime_error("mesh: symmetry map does not mirror vertices exactly");
    }
  }
}

std::shared_ptr<const Mesh> make_strip(const StripOptions& opts) {
  std::vector<double> snap_cols;
  for (double c : opts.snap_cross) {
    if (c <= -1.0 || c >= 1.0) throw std::invalid_argument("make_strip: snap column outside (-1,1)");
    snap_cols.push_back(c);
  }
  const std::vector<double> xs = build_axis(-1.0, 1.0, opts.h, snap_cols);
  const std::vector<double> ys =
      build_axis(opts.height_min, opts.height_max, opts.h, opts.snap_heights);
  const int nx = static_cast<int>(xs.size()) - 1;
  const int ny = static_cast<int>(ys.size()) - 1;

  auto m = std::make_shared<Mesh>();
  m->vertices.reserve((nx + 1) * (ny + 1));
  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i <= nx; ++i) m->vertices.emplace_back(xs[i], ys[j]);

  const auto vid = [nx](int i, int j) { return j * (nx + 1) + i; };
  m->triangles.reserve(2 * nx * ny);
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const int a = vid(i, j), b = vid(i + 1, j), c = vid(i + 1, j + 1), d = vid(i, j + 1);
      m->triangles.push_back({a, b, c});
      m->triangles.push_back({a, c, d});
    }
  }

  const auto span_covers = [&](double y0, double y1) {
    const double tol = 1e-9 * std::max(1.0, std::abs(y1));
    for (const auto& [s0, s1] : opts.lateral_dirichlet_spans)
      if (y0 >= s0 - tol && y1 <= s1 + tol) return true;
    return false;
  };
  for (int i = 0; i < nx; ++i) {
    m->boundary_edges.push_back({vid(i, 0), vid(i + 1, 0), opts.base_tag});
    m->boundary_edges.push_back({vid(i, ny), vid(i + 1, ny), opts.lid_tag});
  }
  for (int j = 0; j < ny; ++j) {
    const EdgeTag tag =
        span_covers(ys[j], ys[j + 1]) ? EdgeTag::dirichlet : EdgeTag::neumann;
    m->boundary_edges.push_back({vid(0, j), vid(0, j + 1), tag});
    m->boundary_edges.push_back({vid(nx, j), vid(nx, j + 1), tag});
  }

  m->layout = StripLayout{xs, ys};
  m->validate();
  return m;
}

std::shared_ptr<const Mesh> make_strip(double height, double h) {
  StripOptions opts;
  opts.height_max = height;
  opts.h = h;
  return make_strip(opts);
}

std::shared_ptr<const Mesh> make_disk_annulus(const DiskOptions& opts) {
  if (opts.sectors < 4 || opts.sectors % 2 != 0)
    throw std::invalid_argument("make_disk_annulus: sector count must be even and >= 4");
  if (!(opts.r_outer > 0.0)) throw std::invalid_argument("make_disk_annulus: r_outer must be > 0");
  const double r_in =
      opts.r_inner > 0.0 ? opts.r_inner : opts.puncture_delta * opts.r_outer;
  if (!(r_in > 0.0 && r_in < opts.r_outer))
    throw std::invalid_argument("make_disk_annulus: inner radius must be in (0, r_outer)");
  if (!(opts.grading_ratio > 1.0))
    throw std::invalid_argument("make_disk_annulus: grading ratio must be > 1");

  const int min_rings = std::max(
      1, static_cast<int>(std::ceil(std::log(opts.r_outer / r_in) / std::log(opts.grading_ratio) -
                                    1e-12)));
  const int rings = std::max(opts.rings, min_rings);
  std::vector<double> radii(rings + 1);
  for (int k = 0; k <= rings; ++k)
    radii[k] = r_in * std::pow(opts.r_outer / r_in, static_cast<double>(k) / rings);
  radii.front() = r_in;
  radii.back() = opts.r_outer;
  const double min_gap = 1e-9 * opts.r_outer;
  for (double s : opts.snap_radii)
    if (s > r_in + min_gap && s < opts.r_outer - min_gap) radii.push_back(s);
  std::sort(radii.begin(), radii.end());
  {
    // Merge near-duplicates, and near the center drop rings whose cells
    // would fall below the degeneracy floor of the area invariant.
    const double sin_dphi = std::sin(2.0 * M_PI / opts.sectors);
    const double area_floor = 1e-13;  // dr * r * sin(dphi) lower bound
    std::vector<double> merged;
    merged.push_back(radii.front());
    for (std::size_t i = 1; i + 1 < radii.size(); ++i) {
      const double min_dr = std::max(min_gap, area_floor / (merged.back() * sin_dphi));
      if (radii[i] - merged.back() >= min_dr && opts.r_outer - radii[i] >= min_gap)
        merged.push_back(radii[i]);
    }
    while (merged.size() > 1 &&
           opts.r_outer - merged.back() <
               std::max(min_gap, area_floor / (merged.back() * sin_dphi)))
      merged.pop_back();
    merged.push_back(radii.back());
    radii = std::move(merged);
  }
  const int nr = static_cast<int>(radii.size()) - 1;

  const int S = opts.sectors;
  const int H = S / 2;
  auto m = std::make_shared<Mesh>();
  m->vertices.resize(static_cast<std::size_t>(nr + 1) * S);
  m->symmetry_map.resize(m->vertices.size());
  const auto vid = [S](int k, int j) { return k * S + ((j % S) + S) % S; };

  for (int k = 0; k <= nr; ++k) {
    const double r = radii[k];
    // Upper half first; axis vertices pinned to exact y = 0 so the mirror
    // image below can be produced bitwise.
    for (int j = 0; j <= H; ++j) {
      Eigen::Vector2d v;
      if (j == 0)
        v = {r, 0.0};
      else if (j == H)
        v = {-r, 0.0};
      else {
        const double phi = M_PI * j / H;
        v = {r * std::cos(phi), r * std::sin(phi)};
      }
      m->vertices[vid(k, j)] = v;
    }
    for (int j = H + 1; j < S; ++j) {
      const Eigen::Vector2d& u = m->vertices[vid(k, S - j)];
      m->vertices[vid(k, j)] = {u.x(), -u.y()};
    }
    for (int j = 0; j < S; ++j) m->symmetry_map[vid(k, j)] = vid(k, S - j);
  }

  // Upper-half cells in build order, then their mirror images in the same
  // order; this pairing keeps mirrored assembly contributions aligned.
  m->triangles.reserve(static_cast<std::size_t>(4) * nr * H);
  for (int k = 0; k < nr; ++k) {
    for (int j = 0; j < H; ++j) {
      const int a = vid(k, j), b = vid(k, j + 1), c = vid(k + 1, j + 1), d = vid(k + 1, j);
      m->triangles.push_back({a, c, b});
      m->triangles.push_back({a, d, c});
    }
  }
  for (int k = 0; k < nr; ++k) {
    for (int j = 0; j < H; ++j) {
      const int a = vid(k, j), b = vid(k, j + 1), c = vid(k + 1, j + 1), d = vid(k + 1, j);
      const auto s = [&](int v) { return m->symmetry_map[v]; };
      m->triangles.push_back({s(a), s(b), s(c)});
      m->triangles.push_back({s(a), s(c), s(d)});
    }
  }

  for (int j = 0; j < S; ++j) {
    m->boundary_edges.push_back({vid(0, j), vid(0, j + 1), opts.inner_tag});
    m->boundary_edges.push_back({vid(nr, j), vid(nr, j + 1), opts.outer_tag});
  }

  m->layout = PolarLayout{radii, S};
  m->validate();
  return m;
}

std::shared_ptr<const Mesh> refine(const Mesh& mesh) {
  auto out = std::make_shared<Mesh>();
  out->vertices = mesh.vertices;

  std::unordered_map<std::int64_t, int> midpoint;
  midpoint.reserve(mesh.triangles.size() * 2);
  const auto mid = [&](int a, int b) {
    const auto key = edge_key(a, b);
    auto it = midpoint.find(key);
    if (it != midpoint.end()) return it->second;
    const int v = static_cast<int>(out->vertices.size());
    out->vertices.emplace_back(0.5 * (mesh.vertices[a].x() + mesh.vertices[b].x()),
                               0.5 * (mesh.vertices[a].y() + mesh.vertices[b].y()));
    midpoint.emplace(key, v);
    return v;
  };

  out->triangles.reserve(mesh.triangles.size() * 4);
  for (const auto& tri : mesh.triangles) {
    const int m01 = mid(tri[0], tri[1]);
    const int m12 = mid(tri[1], tri[2]);
    const int m20 = mid(tri[2], tri[0]);
    out->triangles.push_back({tri[0], m01, m20});
    out->triangles.push_back({tri[1], m12, m01});
    out->triangles.push_back({tri[2], m20, m12});
    out->triangles.push_back({m01, m12, m20});
  }

  out->boundary_edges.reserve(mesh.boundary_edges.size() * 2);
  for (const auto& be : mesh.boundary_edges) {
    const int m01 = mid(be.v0, be.v1);
    out->boundary_edges.push_back({be.v0, m01, be.tag});
    out->boundary_edges.push_back({m01, be.v1, be.tag});
  }

  if (mesh.has_symmetry()) {
    out->symmetry_map.assign(out->vertices.size(), -1);
    for (int v = 0; v < mesh.vertex_count(); ++v) out->symmetry_map[v] = mesh.symmetry_map[v];
    for (const auto& [key, v] : midpoint) {
      const int a = static_cast<int>(key >> 32);
      const int b = static_cast<int>(key & 0xffffffff);
      const auto partner_it = midpoint.find(edge_key(mesh.symmetry_map[a], mesh.symmetry_map[b]));
      if (partner_it == midpoint.end())
        throw std::runtime_error("refine: mirror edge missing midpoint");
      out->symmetry_map[v] = partner_it->second;
    }
  }

  if (const auto* strip = std::get_if<StripLayout>(&mesh.layout)) {
    StripLayout fine;
    for (std::size_t i = 0; i + 1 < strip->xs.size(); ++i) {
      fine.xs.push_back(strip->xs[i]);
      fine.xs.push_back(0.5 * (strip->xs[i] + strip->xs[i + 1]));
    }
    fine.xs.push_back(strip->xs.back());
    for (std::size_t j = 0; j + 1 < strip->ys.size(); ++j) {
      fine.ys.push_back(strip->ys[j]);
      fine.ys.push_back(0.5 * (strip->ys[j] + strip->ys[j + 1]));
    }
    fine.ys.push_back(strip->ys.back());
    out->layout = std::move(fine);
  }

  out->validate();
  return out;
}

GradientTables assemble_gradient_tables(const Mesh& m) {
  GradientTables tables(m.triangle_count());
  for (int t = 0; t < m.triangle_count(); ++t) {
    const auto& tri = m.triangles[t];
    const Eigen::Vector2d& p0 = m.vertices[tri[0]];
    const Eigen::Vector2d& p1 = m.vertices[tri[1]];
    const Eigen::Vector2d& p2 = m.vertices[tri[2]];
    const double area = signed_area(p0, p1, p2);
    if (!(area > kMinArea)) throw std::runtime_error("gradient tables: degenerate triangle");
    CellGeometry& cell = tables[t];
    cell.area = area;
    const double inv = 1.0 / (2.0 * area);
    cell.grad[0] = {(p1.y() - p2.y()) * inv, (p2.x() - p1.x()) * inv};
    cell.grad[1] = {(p2.y() - p0.y()) * inv, (p0.x() - p2.x()) * inv};
    cell.grad[2] = {(p0.y() - p1.y()) * inv, (p1.x() - p0.x()) * inv};
    cell.barycenter = (p0 + p1 + p2) / 3.0;
  }
  return tables;
}

void quadrature_points(const Mesh& m, int t, QuadratureRule rule, std::vector<QuadPoint>& out) {
  out.clear();
  const auto& tri = m.triangles[t];
  const Eigen::Vector2d& p0 = m.vertices[tri[0]];
  const Eigen::Vector2d& p1 = m.vertices[tri[1]];
  const Eigen::Vector2d& p2 = m.vertices[tri[2]];
  const double area = signed_area(p0, p1, p2);
  if (rule == QuadratureRule::barycenter) {
    out.push_back({(p0 + p1 + p2) / 3.0, area, {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0}});
    return;
  }
  out.push_back({0.5 * (p0 + p1), area / 3.0, {0.5, 0.5, 0.0}});
  out.push_back({0.5 * (p1 + p2), area / 3.0, {0.0, 0.5, 0.5}});
  out.push_back({0.5 * (p2 + p0), area / 3.0, {0.5, 0.0, 0.5}});
}

DiscreteField::DiscreteField(std::shared_ptr<const Mesh> mesh_, Eigen::VectorXd values_)
    : mesh(std::move(mesh_)), values(std::move(values_)) {
  if (!mesh) throw std::invalid_argument("DiscreteField: null mesh");
  if (values.size() != mesh->vertex_count())
    throw std::invalid_argument("DiscreteField: value count does not match vertex count");
  if (!values.allFinite()) throw std::invalid_argument("DiscreteField: non-finite nodal value");
}

namespace {

// Barycentric coordinates of pt in triangle t; returns the smallest one.
double barycentric(const Mesh& m, int t, const Eigen::Vector2d& pt, std::array<double, 3>& bary) {
  const auto& tri = m.triangles[t];
  const Eigen::Vector2d& p0 = m.vertices[tri[0]];
  const Eigen::Vector2d& p1 = m.vertices[tri[1]];
  const Eigen::Vector2d& p2 = m.vertices[tri[2]];
  const double area = signed_area(p0, p1, p2);
  bary[0] = signed_area(pt, p1, p2) / area;
  bary[1] = signed_area(p0, pt, p2) / area;
  bary[2] = signed_area(p0, p1, pt) / area;
  return std::min({bary[0], bary[1], bary[2]});
}

int axis_interval(const std::vector<double>& axis, double v) {
  auto it = std::upper_bound(axis.begin(), axis.end(), v);
  int i = static_cast<int>(it - axis.begin()) - 1;
  return std::clamp(i, 0, static_cast<int>(axis.size()) - 2);
}

void candidate_triangles(const Mesh& m, const Eigen::Vector2d& pt, std::vector<int>& out) {
  out.clear();
  if (const auto* strip = std::get_if<StripLayout>(&m.layout)) {
    const int nx = static_cast<int>(strip->xs.size()) - 1;
    const int ny = static_cast<int>(strip->ys.size()) - 1;
    const int i = axis_interval(strip->xs, pt.x());
    const int j = axis_interval(strip->ys, pt.y());
    for (int dj = -1; dj <= 1; ++dj) {
      for (int di = -1; di <= 1; ++di) {
        const int ii = i + di, jj = j + dj;
        if (ii < 0 || ii >= nx || jj < 0 || jj >= ny) continue;
        const int cell = jj * nx + ii;
        out.push_back(2 * cell);
        out.push_back(2 * cell + 1);
      }
    }
  } else if (const auto* polar = std::get_if<PolarLayout>(&m.layout)) {
    const int nr = static_cast<int>(polar->radii.size()) - 1;
    const int S = polar->sectors;
    const int H = S / 2;
    const double r = pt.norm();
    const int k = axis_interval(polar->radii, r);
    double phi = std::atan2(pt.y(), pt.x());
    if (phi < 0.0) phi += 2.0 * M_PI;
    int j = std::clamp(static_cast<int>(phi / (2.0 * M_PI) * S), 0, S - 1);
    const int upper_cells = 2 * nr * H;
    for (int dk = -1; dk <= 1; ++dk) {
      for (int dj = -1; dj <= 1; ++dj) {
        const int kk = k + dk;
        if (kk < 0 || kk >= nr) continue;
        const int jj = ((j + dj) % S + S) % S;
        int base;
        if (jj < H) {
          base = 2 * (kk * H + jj);
        } else {
          base = upper_cells + 2 * (kk * H + (S - 1 - jj));
        }
        out.push_back(base);
        out.push_back(base + 1);
      }
    }
  }
}

}  // namespace

std::optional<Location> locate(const Mesh& m, const Eigen::Vector2d& pt, double tol) {
  std::vector<int> candidates;
  candidate_triangles(m, pt, candidates);

  Location best{-1, {0, 0, 0}};
  double best_min = -std::numeric_limits<double>::infinity();
  std::array<double, 3> bary;
  for (int t : candidates) {
    const double mn = barycentric(m, t, pt, bary);
    if (mn > best_min) {
      best_min = mn;
      best = {t, bary};
    }
    if (mn >= 0.0) return best;
  }
  if (best_min >= -tol && best.triangle >= 0) return best;

  // Full scan; layouts can miss near curved boundaries and on refined meshes.
  for (int t = 0; t < m.triangle_count(); ++t) {
    const double mn = barycentric(m, t, pt, bary);
    if (mn > best_min) {
      best_min = mn;
      best = {t, bary};
    }
    if (mn >= 0.0) return best;
  }
  if (best_min >= -tol && best.triangle >= 0) return best;
  return std::nullopt;
}

double interpolate(const DiscreteField& f, const Eigen::Vector2d& pt, double tol) {
  const auto loc = locate(*f.mesh, pt, tol);
  if (!loc) throw std::domain_error("interpolate: point outside mesh, extrapolation refused");
  std::array<double, 3> b = loc->barycentric;
  for (double& v : b) v = std::max(v, 0.0);
  const double sum = b[0] + b[1] + b[2];
  const auto& tri = f.mesh->triangles[loc->triangle];
  return (b[0] * f.values[tri[0]] + b[1] * f.values[tri[1]] + b[2] * f.values[tri[2]]) / sum;
}

void write_mesh_csv(const Mesh& m, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "vertices.csv");
    out << "id,x,y\n";
    for (int v = 0; v < m.vertex_count(); ++v)
      out << v << ',' << io::fmt17(m.vertices[v].x()) << ',' << io::fmt17(m.vertices[v].y())
          << '\n';
  }
  {
    std::ofstream out(dir / "triangles.csv");
    out << "v0,v1,v2\n";
    for (const auto& tri : m.triangles) out << tri[0] << ',' << tri[1] << ',' << tri[2] << '\n';
  }
  {
    std::ofstream out(dir / "edges.csv");
    out << "v0,v1,tag\n";
    for (const auto& be : m.boundary_edges)
      out << be.v0 << ',' << be.v1 << ',' << to_string(be.tag) << '\n';
  }
}

}  // namespace cylab::mesh
