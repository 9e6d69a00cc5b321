#include "cylab/trichotomy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace cylab::trichotomy {

namespace {

LineFit fit_line(const std::vector<double>& xs, const std::vector<double>& ys) {
  const int n = static_cast<int>(xs.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int i = 0; i < n; ++i) {
    sx += xs[i];
    sy += ys[i];
    sxx += xs[i] * xs[i];
    sxy += xs[i] * ys[i];
  }
  LineFit fit;
  const double denom = n * sxx - sx * sx;
  fit.slope = (n * sxy - sx * sy) / denom;
  fit.intercept = (sy - fit.slope * sx) / n;
  double ss = 0.0;
  for (int i = 0; i < n; ++i) {
    const double r = ys[i] - (fit.slope * xs[i] + fit.intercept);
    ss += r * r;
  }
  const double rms = std::sqrt(ss / n);
  const double span = xs.back() - xs.front();
  fit.rel_residual = rms / std::max(std::abs(fit.slope) * span, 1e-300);
  return fit;
}

// Least-squares slope of log(y) vs x over the points with y > floor.
bool fit_log_decay(const std::vector<double>& xs, const std::vector<double>& ys, double floor,
                   double& slope, double& rms, int& used) {
  std::vector<double> fx, fy;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (ys[i] > floor) {
      fx.push_back(xs[i]);
      fy.push_back(std::log(ys[i]));
    }
  }
  used = static_cast<int>(fx.size());
  if (used < 2) return false;
  const LineFit fit = fit_line(fx, fy);
  slope = fit.slope;
  double ss = 0.0;
  for (std::size_t i = 0; i < fx.size(); ++i) {
    const double r = fy[i] - (fit.slope * fx[i] + fit.intercept);
    ss += r * r;
  }
  rms = std::sqrt(ss / used);
  return true;
}

}  // namespace

const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::limit: return "Limit";
    case Verdict::linear_growth: return "LinearGrowth";
    case Verdict::sign_changing: return "SignChanging";
    case Verdict::failed: return "Failed";
  }
  return "?";
}

std::vector<double> section_heights(const mesh::Mesh& strip) {
  const auto* layout = std::get_if<mesh::StripLayout>(&strip.layout);
  if (!layout) throw std::invalid_argument("section_heights: strip mesh required");
  return layout->ys;
}

std::vector<SectionStats> section_stats(const mesh::DiscreteField& field,
                                        const std::vector<double>& taus) {
  const mesh::Mesh& m = *field.mesh;
  const auto* layout = std::get_if<mesh::StripLayout>(&m.layout);
  if (!layout) throw std::invalid_argument("section_stats: strip mesh required");
  const auto& xs = layout->xs;
  const auto& ys = layout->ys;
  const int nx = static_cast<int>(xs.size()) - 1;
  const double width = xs.back() - xs.front();

  std::vector<SectionStats> out;
  out.reserve(taus.size());
  for (double tau : taus) {
    int row = -1;
    for (std::size_t j = 0; j < ys.size(); ++j) {
      if (std::abs(ys[j] - tau) <= 1e-9 * std::max(1.0, std::abs(tau))) {
        row = static_cast<int>(j);
        break;
      }
    }
    if (row < 0)
      throw std::invalid_argument("section_stats: tau does not align with a mesh row");
    SectionStats s;
    s.tau = tau;
    s.min = std::numeric_limits<double>::infinity();
    s.max = -std::numeric_limits<double>::infinity();
    double integral = 0.0;
    for (int i = 0; i <= nx; ++i) {
      const double v = field.values[row * (nx + 1) + i];
      s.min = std::min(s.min, v);
      s.max = std::max(s.max, v);
      if (i < nx) {
        const double vr = field.values[row * (nx + 1) + i + 1];
        integral += 0.5 * (v + vr) * (xs[i + 1] - xs[i]);
      }
    }
    s.mean = integral / width;
    out.push_back(s);
  }
  return out;
}

TrichotomyReport classify(const std::vector<SectionStats>& stats, const ClassifyOptions& opts) {
  if (stats.size() < 6)
    throw std::invalid_argument("classify: need at least 6 sections");
  for (std::size_t i = 1; i < stats.size(); ++i)
    if (!(stats[i].tau > stats[i - 1].tau))
      throw std::invalid_argument("classify: section heights must increase");

  // Fit window: the upper half of the height range (asymptotics, not
  // transients), always at least three sections.
  const double tau_mid = 0.5 * (stats.front().tau + stats.back().tau);
  std::size_t start = 0;
  while (start < stats.size() && stats[start].tau < tau_mid) ++start;
  if (stats.size() - start < 3) start = stats.size() - 3;

  std::vector<double> taus, mins, maxs, means, oscs;
  for (std::size_t i = start; i < stats.size(); ++i) {
    taus.push_back(stats[i].tau);
    mins.push_back(stats[i].min);
    maxs.push_back(stats[i].max);
    means.push_back(stats[i].mean);
    oscs.push_back(stats[i].max - stats[i].min);
  }
  const double span = taus.back() - taus.front();

  TrichotomyReport rep;
  rep.tau_lo = taus.front();
  rep.tau_hi = taus.back();
  rep.osc_first = oscs.front();
  rep.osc_last = oscs.back();
  double max_abs = 0.0;
  double hi = -std::numeric_limits<double>::infinity();
  double lo = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < taus.size(); ++i) {
    hi = std::max(hi, maxs[i]);
    lo = std::min(lo, mins[i]);
    max_abs = std::max({max_abs, std::abs(maxs[i]), std::abs(mins[i])});
  }
  rep.scale = hi - lo;
  const double atol = 1e-12 * std::max(1.0, max_abs);

  rep.fit_min = fit_line(taus, mins);
  rep.fit_max = fit_line(taus, maxs);
  rep.fit_mean = fit_line(taus, means);

  const double osc_max = *std::max_element(oscs.begin(), oscs.end());
  const bool osc_zero = osc_max <= atol;
  const bool osc_decayed = rep.osc_last <= rep.osc_first / opts.osc_decay_factor;
  const bool mean_flat = std::abs(rep.fit_mean.slope) * span <=
                         std::max({2.0 * rep.osc_first, 1e-3 * rep.scale, atol});

  if ((osc_zero || osc_decayed) && mean_flat) {
    rep.verdict = Verdict::limit;
    // Geometric extrapolation of the mean; anchoring the limit at the last
    // section would bias the decay fit below.
    rep.u_inf = means.back();
    if (means.size() >= 3) {
      const double a = means[means.size() - 3];
      const double b = means[means.size() - 2];
      const double c = means.back();
      const double denom = (c - b) - (b - a);
      if (std::abs(denom) > atol) {
        const double extrapolated = c - (c - b) * (c - b) / denom;
        if (std::isfinite(extrapolated) && std::abs(extrapolated - c) <= rep.osc_first + atol)
          rep.u_inf = extrapolated;
      }
    }
    // Pooled decay fit of the oscillation and the mean deviation.
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < taus.size(); ++i) {
      if (oscs[i] > atol) {
        xs.push_back(taus[i]);
        ys.push_back(oscs[i]);
      }
      const double dev = std::abs(means[i] - rep.u_inf);
      if (dev > atol) {
        xs.push_back(taus[i]);
        ys.push_back(dev);
      }
    }
    double slope = 0.0, rms = 0.0;
    int used = 0;
    if (!fit_log_decay(xs, ys, 0.0, slope, rms, used)) {
      rep.alpha_sentinel = true;
      rep.alpha_unclamped = std::numeric_limits<double>::infinity();
      rep.alpha = 1.0;
      return rep;
    }
    rep.alpha_unclamped = -slope / opts.kappa;
    if (!(rep.alpha_unclamped > 0.0)) {
      rep.verdict = Verdict::failed;
      rep.failure_reason = "limit detected but fitted decay exponent is nonpositive";
      return rep;
    }
    rep.alpha = std::min(rep.alpha_unclamped, 1.0);
    return rep;
  }

  const double sig = std::max(opts.slope_significance * rep.scale, atol) / std::max(span, 1e-300);
  const bool min_up = rep.fit_min.slope > sig;
  const bool max_up = rep.fit_max.slope > sig;
  const bool min_down = rep.fit_min.slope < -sig;
  const bool max_down = rep.fit_max.slope < -sig;
  const bool residuals_ok = rep.fit_min.rel_residual <= opts.max_rel_residual &&
                            rep.fit_max.rel_residual <= opts.max_rel_residual;

  if (min_up && max_up && residuals_ok) {
    rep.verdict = Verdict::linear_growth;
    rep.sign = +1;
    rep.slope_low = std::min(rep.fit_min.slope, rep.fit_max.slope);
    rep.slope_high = std::max(rep.fit_min.slope, rep.fit_max.slope);
    rep.intercept_low = rep.fit_min.intercept;
    rep.intercept_high = rep.fit_max.intercept;
    return rep;
  }
  if (min_down && max_down && residuals_ok) {
    rep.verdict = Verdict::linear_growth;
    rep.sign = -1;
    rep.slope_low = std::min(-rep.fit_min.slope, -rep.fit_max.slope);
    rep.slope_high = std::max(-rep.fit_min.slope, -rep.fit_max.slope);
    rep.intercept_low = rep.fit_max.intercept;
    rep.intercept_high = rep.fit_min.intercept;
    return rep;
  }
  if (max_up && min_down && maxs.back() > maxs.front() && mins.back() < mins.front()) {
    rep.verdict = Verdict::sign_changing;
    rep.growth_rate = std::min(rep.fit_max.slope, -rep.fit_min.slope);
    return rep;
  }

  rep.verdict = Verdict::failed;
  rep.failure_reason = "conflicting fits: no verdict at the requested significance";
  return rep;
}

HolderFit holder_fit(const mesh::DiscreteField& field, double kappa, const HolderOptions& opts) {
  const auto heights = section_heights(*field.mesh);
  const auto stats = section_stats(field, heights);

  const double tau_mid = 0.5 * (stats.front().tau + stats.back().tau);
  std::vector<double> taus, oscs;
  double max_abs = 0.0;
  for (const auto& s : stats) max_abs = std::max({max_abs, std::abs(s.min), std::abs(s.max)});
  const double floor = std::max(opts.osc_floor, 1e-12 * std::max(1.0, max_abs));
  for (const auto& s : stats) {
    if (s.tau < tau_mid) continue;
    const double osc = s.max - s.min;
    if (osc > floor) {
      taus.push_back(s.tau);
      oscs.push_back(osc);
    }
  }

  HolderFit fit;
  if (taus.size() < 2) {
    fit.sentinel = true;
    fit.alpha_unclamped = std::numeric_limits<double>::infinity();
    fit.alpha = 1.0;
    fit.monotone_decay = true;
    return fit;
  }
  double slope = 0.0;
  if (!fit_log_decay(taus, oscs, 0.0, slope, fit.residual, fit.points_used))
    throw std::runtime_error("holder_fit: no usable sections");
  fit.alpha_unclamped = -slope / kappa;
  if (!(fit.alpha_unclamped > 0.0))
    throw std::runtime_error("holder_fit: nonpositive fitted decay exponent");
  fit.alpha = std::min(fit.alpha_unclamped, 1.0);
  fit.monotone_decay = true;
  for (std::size_t i = 1; i < oscs.size(); ++i)
    if (oscs[i] > oscs[i - 1]) fit.monotone_decay = false;
  return fit;
}

}  // namespace cylab::trichotomy
