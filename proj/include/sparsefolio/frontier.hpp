#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <random>
#include <thread>
#include <utility>
#include <vector>

#include "sparsefolio/portfolio.hpp"
#include "sparsefolio/pspgd.hpp"
#include "sparsefolio/types.hpp"

namespace sparsefolio {

template <class Scalar>
struct FrontierPoint {
  Scalar rho = Scalar(0);
  Scalar expected_return = Scalar(0);
  Scalar risk = Scalar(0);
  int cardinality = 0;
  bool converged = false;
};

template <class Scalar>
struct FrontierCurve {
  Index alpha = 0;
  RhoInterval<Scalar> interval;
  std::vector<FrontierPoint<Scalar>> samples;   // ordered by rho ascending
  std::vector<SolveReport<Scalar>> reports;     // same order, full diagnostics
};

// Solves the return interval once, then runs the solver on a uniform rho grid
// over it. Non-converged grid points are flagged in place, never dropped.
// Grid points are independent, so jobs > 1 distributes them over threads;
// results are merged in grid order either way.
template <class Scalar>
FrontierCurve<Scalar> sweep_frontier(const PortfolioProblem<Scalar>& problem,
                                     Index alpha, int grid_size,
                                     const PenaltyConfig<Scalar>& config = {},
                                     int jobs = 1) {
  if (grid_size < 2) throw contract_error("frontier grid needs at least 2 points");
  if (jobs < 1) throw contract_error("jobs must be positive");

  PortfolioProblem<Scalar> base = problem;
  base.alpha = alpha;
  validate_problem(base);

  FrontierCurve<Scalar> curve;
  curve.alpha = alpha;
  curve.interval = compute_rho_interval(base, config);

  const Scalar lo = curve.interval.rho_min;
  const Scalar span = curve.interval.rho_max - curve.interval.rho_min;
  std::vector<Scalar> grid(static_cast<std::size_t>(grid_size));
  for (int i = 0; i < grid_size; ++i)
    grid[std::size_t(i)] = lo + span * Scalar(i) / Scalar(grid_size - 1);

  curve.reports.resize(std::size_t(grid_size));
  const auto solve_point = [&](int i) {
    PortfolioProblem<Scalar> p = base;
    p.rho = grid[std::size_t(i)];
    curve.reports[std::size_t(i)] = pspgd_solve(p, config);
  };

  if (jobs == 1 || grid_size == 1) {
    for (int i = 0; i < grid_size; ++i) solve_point(i);
  } else {
    std::atomic<int> next{0};
    const int workers = std::min(jobs, grid_size);
    std::vector<std::thread> pool;
    pool.reserve(std::size_t(workers));
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (int i = next.fetch_add(1); i < grid_size; i = next.fetch_add(1))
          solve_point(i);
      });
    for (auto& t : pool) t.join();
  }

  curve.samples.reserve(std::size_t(grid_size));
  for (int i = 0; i < grid_size; ++i) {
    const auto& r = curve.reports[std::size_t(i)];
    curve.samples.push_back({grid[std::size_t(i)], r.expected_return, r.risk,
                             r.cardinality, r.converged});
  }
  return curve;
}

namespace detail {

// Fixed-width uniform in [0, 1): identical streams on every platform, unlike
// std::uniform_real_distribution.
inline double uniform01(std::mt19937_64& rng) {
  return double(rng() >> 11) * 0x1.0p-53;
}

}  // namespace detail

// Seeded sample of the feasible card-alpha region in the (risk, return)
// plane: uniform support of size <= alpha, flat Dirichlet weights on it,
// rejection on upper-bound violations.
template <class Scalar>
std::vector<std::pair<Scalar, Scalar>> sample_feasible_cloud(
    const PortfolioProblem<Scalar>& problem, Index alpha, int count,
    std::uint64_t seed) {
  if (count < 1) throw contract_error("cloud sample count must be positive");
  PortfolioProblem<Scalar> base = problem;
  base.alpha = alpha;
  validate_problem(base);

  const Index n = problem.n;
  std::mt19937_64 rng(seed);
  std::vector<Index> pool(static_cast<std::size_t>(n));
  Vector<Scalar> x(n);

  std::vector<std::pair<Scalar, Scalar>> points;
  points.reserve(std::size_t(count));
  for (int sample = 0; sample < count; ++sample) {
    for (long attempt = 0;; ++attempt) {
      if (attempt >= 1000000)
        throw contract_error("cloud sampling failed to find a feasible portfolio");
      const Index size = 1 + Index(detail::uniform01(rng) * double(alpha));
      const Index s = std::min(size, alpha);
      for (Index i = 0; i < n; ++i) pool[std::size_t(i)] = i;
      for (Index i = 0; i < s; ++i) {
        const Index j = i + Index(detail::uniform01(rng) * double(n - i));
        std::swap(pool[std::size_t(i)], pool[std::size_t(std::min(j, n - 1))]);
      }

      x.setZero();
      Scalar total = Scalar(0);
      for (Index i = 0; i < s; ++i) {
        const Scalar w = -std::log(Scalar(1) - Scalar(detail::uniform01(rng)));
        x[pool[std::size_t(i)]] = w;
        total += w;
      }
      if (!(total > Scalar(0))) continue;
      x /= total;

      bool ok = true;
      for (Index i = 0; i < s && ok; ++i) {
        const Index idx = pool[std::size_t(i)];
        ok = x[idx] <= problem.up[idx] + Scalar(1e-12);
      }
      if (!ok) continue;

      points.emplace_back(portfolio_risk(problem, x), portfolio_return(problem, x));
      break;
    }
  }
  return points;
}

}  // namespace sparsefolio
