#include <benchmark/benchmark.h>

#include <cmath>

#include "cylab/capacity.hpp"
#include "cylab/geometry.hpp"
#include "cylab/mesh.hpp"
#include "cylab/operators.hpp"
#include "cylab/rng.hpp"
#include "cylab/solver.hpp"

using namespace cylab;

static void BM_ForwardInverse(benchmark::State& state) {
  const geometry::TransformParams params(1.0, 2);
  rng::Sampler rs(1);
  const geometry::CylinderPoint x(rs.in_unit_ball(1), 1.7);
  for (auto _ : state) {
    const auto xi = geometry::forward(x, params);
    const auto back = geometry::inverse(xi, params);
    benchmark::DoNotOptimize(back.height);
  }
}
BENCHMARK(BM_ForwardInverse);

static void BM_TransformedFlux(benchmark::State& state) {
  const operators::TransformedMap map(operators::CoefficientMap::p_laplace(3.0),
                                      geometry::TransformParams(1.0, 2), true);
  const Eigen::Vector2d xi(0.3, -0.4);
  const Eigen::Vector2d q(1.2, -0.7);
  for (auto _ : state) {
    benchmark::DoNotOptimize(map.flux2(xi, q, 1e-6));
  }
}
BENCHMARK(BM_TransformedFlux);

static void BM_StripAssemblySolve(benchmark::State& state) {
  const double h = 2.0 / state.range(0);
  for (auto _ : state) {
    mesh::StripOptions opts;
    opts.height_max = 2.0;
    opts.h = h;
    solver::MixedProblem problem;
    problem.mesh = mesh::make_strip(opts);
    problem.field = solver::make_cylinder_field(operators::CoefficientMap::p_laplace(2.0));
    problem.dirichlet = solver::dirichlet_from_tags(
        *problem.mesh, [](const Eigen::Vector2d& x) { return x.x() * x.x() + x.y(); });
    const auto rep = solver::solve(problem);
    benchmark::DoNotOptimize(rep.residual_norm);
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_StripAssemblySolve)->RangeMultiplier(2)->Range(8, 64)->Complexity();

static void BM_CondenserCapacity(benchmark::State& state) {
  capacity::CapacityOptions opts;
  opts.sectors = 32;
  for (auto _ : state) {
    const auto est = capacity::condenser_capacity_ball(std::exp(-1.0), 1.0, 2.0, 2, opts);
    benchmark::DoNotOptimize(est.value);
  }
}
BENCHMARK(BM_CondenserCapacity);

BENCHMARK_MAIN();
