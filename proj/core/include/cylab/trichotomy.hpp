#pragma once

#include <string>
#include <vector>

#include "cylab/mesh.hpp"

// Classification of the behaviour of a solution far up the cylinder from its
// cross-section statistics: finite limit with exponential decay of the
// oscillation, roughly linear growth to one infinity, or sign-changing
// divergence to both.  The classifier consumes section statistics only and
// never re-solves.

namespace cylab::trichotomy {

struct SectionStats {
  double tau = 0.0;  ///< section height
  double min = 0.0;
  double max = 0.0;
  double mean = 0.0;  ///< exact integral mean of the P1 trace
};

/// Heights of the mesh rows of a strip mesh.
std::vector<double> section_heights(const mesh::Mesh& strip);

/// Stats on the mesh row at each tau.  Each tau must align with a mesh row
/// (throws std::invalid_argument otherwise).
std::vector<SectionStats> section_stats(const mesh::DiscreteField& field,
                                        const std::vector<double>& taus);

enum class Verdict { limit, linear_growth, sign_changing, failed };
const char* to_string(Verdict v);

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double rel_residual = 0.0;
};

struct TrichotomyReport {
  Verdict verdict = Verdict::failed;

  // limit case
  double u_inf = 0.0;
  double alpha = 0.0;  ///< decay exponent clamped to (0, 1]
  double alpha_unclamped = 0.0;
  bool alpha_sentinel = false;  ///< oscillation at the noise floor; alpha capped

  // linear-growth case; slopes are magnitudes, sign gives the direction
  int sign = 0;
  double slope_low = 0.0;
  double slope_high = 0.0;
  double intercept_low = 0.0;
  double intercept_high = 0.0;

  // sign-changing case
  double growth_rate = 0.0;

  // fit diagnostics over the upper-half window
  LineFit fit_min, fit_max, fit_mean;
  double osc_first = 0.0;
  double osc_last = 0.0;
  double scale = 0.0;
  double tau_lo = 0.0, tau_hi = 0.0;
  std::string failure_reason;
};

struct ClassifyOptions {
  double kappa = 1.0;
  /// Slope significance as a fraction of the field scale over the window.
  double slope_significance = 1e-3;
  /// Required oscillation reduction across the window for the limit case.
  double osc_decay_factor = 2.0;
  /// Fit-quality bound for the linear-growth case.
  double max_rel_residual = 0.10;
};

/// Exactly one verdict, or `failed` with diagnostics when the fits conflict.
/// Requires >= 6 sections with increasing heights; fits use the upper half of
/// the height range only.
TrichotomyReport classify(const std::vector<SectionStats>& stats,
                          const ClassifyOptions& opts = {});

struct HolderOptions {
  double osc_floor = 1e-9;  ///< sections with smaller oscillation are noise
};

struct HolderFit {
  double alpha = 0.0;  ///< clamped to (0, 1]
  double alpha_unclamped = 0.0;
  double residual = 0.0;  ///< rms residual of the log-linear fit
  int points_used = 0;
  bool sentinel = false;       ///< oscillation identically at the floor
  bool monotone_decay = false; ///< oscillation decreased monotonically over the fit window
};

/// Decay-rate fit |u - u(infinity)| ~ e^{-kappa alpha x_n} from the section
/// oscillations of a field that converges to a limit.  Throws when the fitted
/// rate is nonpositive (classification conflict).
HolderFit holder_fit(const mesh::DiscreteField& field, double kappa,
                     const HolderOptions& opts = {});

}  // namespace cylab::trichotomy
