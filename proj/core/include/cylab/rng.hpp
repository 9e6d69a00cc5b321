#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <random>

namespace cylab::rng {

/// Deterministic sampler for the randomized certification runs.  Results are
/// reproducible for a fixed seed and standard library implementation.
class Sampler {
 public:
  explicit Sampler(std::uint64_t seed) : engine_(seed) {}

  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }

  double normal() { return std::normal_distribution<double>(0.0, 1.0)(engine_); }

  /// Uniform direction on the unit sphere in R^dim.
  Eigen::VectorXd direction(int dim) {
    Eigen::VectorXd v(dim);
    double norm2 = 0.0;
    do {
      for (int i = 0; i < dim; ++i) v(i) = normal();
      norm2 = v.squaredNorm();
    } while (norm2 < 1e-30);
    return v / std::sqrt(norm2);
  }

  /// Nonzero vector with log-uniform magnitude in [mag_lo, mag_hi].
  Eigen::VectorXd vector(int dim, double mag_lo = 1e-3, double mag_hi = 1e3) {
    const double mag = std::exp(uniform(std::log(mag_lo), std::log(mag_hi)));
    return mag * direction(dim);
  }

  /// Uniform point in the open unit ball of R^dim (rejection sampling).
  Eigen::VectorXd in_unit_ball(int dim) {
    Eigen::VectorXd v(dim);
    do {
      for (int i = 0; i < dim; ++i) v(i) = uniform(-1.0, 1.0);
    } while (v.squaredNorm() >= 1.0);
    return v;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace cylab::rng
