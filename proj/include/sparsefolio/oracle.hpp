#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include "sparsefolio/portfolio.hpp"
#include "sparsefolio/sets.hpp"
#include "sparsefolio/types.hpp"

namespace sparsefolio {

// Brute-force reference solvers for tests. Exact at desk scale, refuse beyond.
template <class Scalar>
struct OracleResult {
  Vector<Scalar> minimizer;
  Scalar objective = std::numeric_limits<Scalar>::infinity();
  std::vector<Index> support;
  bool feasible = false;
};

namespace detail {

constexpr Index oracle_max_dimension = 12;

template <class Scalar>
struct PolyhedronRows {
  Vector<Scalar> lower;
  Vector<Scalar> upper;
  Matrix<Scalar> eq_normals;      // rows: hyperplanes
  Vector<Scalar> eq_offsets;
  Matrix<Scalar> ineq_normals;    // rows: half-spaces, normal'x >= offset
  Vector<Scalar> ineq_offsets;
};

template <class Scalar>
PolyhedronRows<Scalar> flatten_sets(const std::vector<ConvexSetSpec<Scalar>>& sets,
                                    Index n) {
  constexpr Scalar inf = std::numeric_limits<Scalar>::infinity();
  PolyhedronRows<Scalar> rows;
  rows.lower = Vector<Scalar>::Constant(n, -inf);
  rows.upper = Vector<Scalar>::Constant(n, inf);
  std::vector<Vector<Scalar>> eqs, ineqs;
  std::vector<Scalar> eq_b, ineq_b;
  for (const auto& set : sets) {
    std::visit(
        [&](const auto& s) {
          using S = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<S, Box<Scalar>>) {
            rows.lower = rows.lower.cwiseMax(s.lower);
            rows.upper = rows.upper.cwiseMin(s.upper);
          } else if constexpr (std::is_same_v<S, Hyperplane<Scalar>>) {
            eqs.push_back(s.normal);
            eq_b.push_back(s.offset);
          } else {
            ineqs.push_back(s.normal);
            ineq_b.push_back(s.offset);
          }
        },
        set.variant);
  }
  rows.eq_normals.resize(Index(eqs.size()), n);
  rows.eq_offsets.resize(Index(eqs.size()));
  for (std::size_t r = 0; r < eqs.size(); ++r) {
    rows.eq_normals.row(Index(r)) = eqs[r].transpose();
    rows.eq_offsets[Index(r)] = eq_b[r];
  }
  rows.ineq_normals.resize(Index(ineqs.size()), n);
  rows.ineq_offsets.resize(Index(ineqs.size()));
  for (std::size_t r = 0; r < ineqs.size(); ++r) {
    rows.ineq_normals.row(Index(r)) = ineqs[r].transpose();
    rows.ineq_offsets[Index(r)] = ineq_b[r];
  }
  return rows;
}

template <class Scalar>
bool polyhedron_feasible(const PolyhedronRows<Scalar>& rows, const Vector<Scalar>& x,
                         Scalar tol) {
  if (((rows.lower - x).array() > tol).any()) return false;
  if (((x - rows.upper).array() > tol).any()) return false;
  if (rows.eq_normals.rows() > 0 &&
      ((rows.eq_normals * x - rows.eq_offsets).array().abs() > tol).any())
    return false;
  if (rows.ineq_normals.rows() > 0 &&
      ((rows.ineq_offsets - rows.ineq_normals * x).array() > tol).any())
    return false;
  return true;
}

}  // namespace detail

// Exact projection onto an intersection of boxes, hyperplanes and half-spaces
// by enumerating every facet subset: coordinates free / at lower / at upper,
// crossed with every active half-space subset. For each subset the
// equality-constrained least-distance point is a linear solve; the projection
// is the closest primal-feasible candidate (its own active set is among the
// subsets, and on that subset the affine solution equals the projection).
template <class Scalar>
OracleResult<Scalar> qp_project_oracle(const std::vector<ConvexSetSpec<Scalar>>& sets,
                                       const Vector<Scalar>& point) {
  const Index n = point.size();
  if (n > detail::oracle_max_dimension)
    throw contract_error("qp_project_oracle is a test-scale tool (dimension <= 12)");
  if (sets.empty()) throw contract_error("qp_project_oracle requires at least one set");
  for (const auto& s : sets) detail::check_dimension(s, point);

  const auto rows = detail::flatten_sets(sets, n);
  const Index n_eq = rows.eq_normals.rows();
  const Index n_ineq = rows.ineq_normals.rows();
  constexpr Scalar feas_tol = Scalar(1e-9);

  long patterns = 1;
  for (Index i = 0; i < n; ++i) patterns *= 3;

  OracleResult<Scalar> best;
  Scalar best_dist_sq = std::numeric_limits<Scalar>::infinity();

  std::vector<int> digit(static_cast<std::size_t>(n));
  std::vector<Index> free_idx;
  Vector<Scalar> x(n);
  for (long code = 0; code < patterns; ++code) {
    long rest = code;
    bool valid = true;
    free_idx.clear();
    for (Index i = 0; i < n; ++i) {
      const int d = int(rest % 3);
      rest /= 3;
      digit[std::size_t(i)] = d;
      if (d == 0) {
        free_idx.push_back(i);
      } else if (d == 1) {
        if (!std::isfinite(rows.lower[i])) { valid = false; break; }
        x[i] = rows.lower[i];
      } else {
        if (!std::isfinite(rows.upper[i])) { valid = false; break; }
        x[i] = rows.upper[i];
      }
    }
    if (!valid) continue;

    const Index nf = Index(free_idx.size());
    for (long mask = 0; mask < (1L << n_ineq); ++mask) {
      const Index m = n_eq + Index(__builtin_popcountll((unsigned long long)mask));

      if (nf == 0) {
        if (m > 0) {
          // Fully pinned point must satisfy the active rows on its own.
          bool ok = true;
          for (Index r = 0; r < n_eq && ok; ++r)
            ok = std::abs(rows.eq_normals.row(r).dot(x) - rows.eq_offsets[r]) <= feas_tol;
          for (Index r = 0; r < n_ineq && ok; ++r)
            if (mask & (1L << r))
              ok = std::abs(rows.ineq_normals.row(r).dot(x) - rows.ineq_offsets[r]) <=
                   feas_tol;
          if (!ok) continue;
        }
      } else {
        Matrix<Scalar> a(m, nf);
        Vector<Scalar> b(m);
        Index r_out = 0;
        for (Index r = 0; r < n_eq; ++r, ++r_out) {
          Scalar fixed_part = Scalar(0);
          for (Index i = 0; i < n; ++i)
            if (digit[std::size_t(i)] != 0) fixed_part += rows.eq_normals(r, i) * x[i];
          for (Index c = 0; c < nf; ++c) a(r_out, c) = rows.eq_normals(r, free_idx[std::size_t(c)]);
          b[r_out] = rows.eq_offsets[r] - fixed_part;
        }
        for (Index r = 0; r < n_ineq; ++r) {
          if (!(mask & (1L << r))) continue;
          Scalar fixed_part = Scalar(0);
          for (Index i = 0; i < n; ++i)
            if (digit[std::size_t(i)] != 0) fixed_part += rows.ineq_normals(r, i) * x[i];
          for (Index c = 0; c < nf; ++c)
            a(r_out, c) = rows.ineq_normals(r, free_idx[std::size_t(c)]);
          b[r_out] = rows.ineq_offsets[r] - fixed_part;
          ++r_out;
        }

        Vector<Scalar> z_free(nf);
        for (Index c = 0; c < nf; ++c) z_free[c] = point[free_idx[std::size_t(c)]];

        Vector<Scalar> x_free = z_free;
        if (m > 0) {
          const Matrix<Scalar> gram = a * a.transpose();
          const Vector<Scalar> rhs = b - a * z_free;
          Eigen::CompleteOrthogonalDecomposition<Matrix<Scalar>> cod(gram);
          const Vector<Scalar> lambda = cod.solve(rhs);
          x_free += a.transpose() * lambda;
          // Inconsistent subsets (singular gram) leave a residual; skip them.
          if ((a * x_free - b).template lpNorm<Eigen::Infinity>() > feas_tol) continue;
        }
        for (Index c = 0; c < nf; ++c) x[free_idx[std::size_t(c)]] = x_free[c];
      }

      if (!detail::polyhedron_feasible(rows, x, feas_tol)) continue;
      const Scalar dist_sq = (x - point).squaredNorm();
      if (dist_sq < best_dist_sq) {
        best_dist_sq = dist_sq;
        best.minimizer = x;
        best.objective = Scalar(0.5) * dist_sq;
        best.feasible = true;
      }
    }
  }
  return best;
}

namespace detail {

// Largest attainable v'x on a fixed support under e'x = 1, 0 <= x <= up:
// fill the highest-return coordinates to their caps.
template <class Scalar>
Scalar greedy_max_return(const PortfolioProblem<Scalar>& problem,
                         std::vector<Index> support) {
  std::sort(support.begin(), support.end(),
            [&](Index a, Index b) { return problem.v[a] > problem.v[b]; });
  Scalar budget = Scalar(1), ret = Scalar(0);
  for (Index i : support) {
    const Scalar w = std::min(budget, problem.up[i]);
    ret += w * problem.v[i];
    budget -= w;
    if (budget <= Scalar(0)) break;
  }
  return budget > Scalar(1e-12) ? -std::numeric_limits<Scalar>::infinity() : ret;
}

// Minimize 0.5 x'Qx over {e'x = 1, v'x >= rho, 0 <= x <= up} restricted to a
// support, by enumerating active sets: each coordinate free, at zero, or at
// its cap, crossed with the return row active or slack. On the optimum's own
// active set the equality-restricted KKT point is the optimum, so the best
// feasible candidate is exact.
template <class Scalar>
OracleResult<Scalar> solve_support_qp(const PortfolioProblem<Scalar>& problem,
                                      const std::vector<Index>& support) {
  const Index s = Index(support.size());
  Matrix<Scalar> q(s, s);
  Vector<Scalar> v(s), up(s);
  for (Index a = 0; a < s; ++a) {
    v[a] = problem.v[support[std::size_t(a)]];
    up[a] = problem.up[support[std::size_t(a)]];
    for (Index b = 0; b < s; ++b) q(a, b) = problem.Q(support[std::size_t(a)], support[std::size_t(b)]);
  }

  constexpr Scalar feas_tol = Scalar(1e-9);
  long patterns = 1;
  for (Index i = 0; i < s; ++i) patterns *= 3;

  Vector<Scalar> best_x;
  Scalar best_obj = std::numeric_limits<Scalar>::infinity();

  std::vector<int> digit(static_cast<std::size_t>(s));
  std::vector<Index> free_idx;
  Vector<Scalar> x(s);
  for (long code = 0; code < patterns; ++code) {
    long rest = code;
    free_idx.clear();
    for (Index i = 0; i < s; ++i) {
      const int d = int(rest % 3);
      rest /= 3;
      digit[std::size_t(i)] = d;
      if (d == 0)
        free_idx.push_back(i);
      else
        x[i] = d == 1 ? Scalar(0) : up[i];
    }
    const Index nf = Index(free_idx.size());

    for (int return_active = 0; return_active < 2; ++return_active) {
      if (nf == 0) {
        if (return_active && std::abs(v.dot(x) - problem.rho) > feas_tol) continue;
      } else {
        const Index m = 1 + return_active;
        Scalar pinned_sum = Scalar(0), pinned_ret = Scalar(0);
        Vector<Scalar> coupling = Vector<Scalar>::Zero(nf);
        for (Index i = 0; i < s; ++i) {
          if (digit[std::size_t(i)] == 0) continue;
          pinned_sum += x[i];
          pinned_ret += v[i] * x[i];
          for (Index c = 0; c < nf; ++c) coupling[c] += q(free_idx[std::size_t(c)], i) * x[i];
        }

        Matrix<Scalar> kkt = Matrix<Scalar>::Zero(nf + m, nf + m);
        Vector<Scalar> rhs(nf + m);
        for (Index r = 0; r < nf; ++r)
          for (Index c = 0; c < nf; ++c)
            kkt(r, c) = q(free_idx[std::size_t(r)], free_idx[std::size_t(c)]);
        for (Index c = 0; c < nf; ++c) {
          kkt(nf, c) = kkt(c, nf) = Scalar(1);
          if (return_active) kkt(nf + 1, c) = kkt(c, nf + 1) = v[free_idx[std::size_t(c)]];
        }
        rhs.head(nf) = -coupling;
        rhs[nf] = Scalar(1) - pinned_sum;
        if (return_active) rhs[nf + 1] = problem.rho - pinned_ret;

        Eigen::CompleteOrthogonalDecomposition<Matrix<Scalar>> cod(kkt);
        const Vector<Scalar> u = cod.solve(rhs);
        // Inconsistent active sets (singular KKT) leave a residual; skip them.
        if ((kkt * u - rhs).template lpNorm<Eigen::Infinity>() > feas_tol) continue;
        for (Index c = 0; c < nf; ++c) x[free_idx[std::size_t(c)]] = u[c];
      }

      if ((x.array() < -feas_tol).any() || ((x - up).array() > feas_tol).any()) continue;
      if (std::abs(x.sum() - Scalar(1)) > feas_tol) continue;
      if (v.dot(x) < problem.rho - feas_tol) continue;
      const Scalar obj = Scalar(0.5) * x.dot(q * x);
      if (obj < best_obj) {
        best_obj = obj;
        best_x = x;
      }
    }
  }

  OracleResult<Scalar> result;
  if (!std::isfinite(best_obj)) return result;
  result.minimizer = Vector<Scalar>::Zero(problem.n);
  for (Index a = 0; a < s; ++a) result.minimizer[support[std::size_t(a)]] = best_x[a];
  result.objective = best_obj;
  result.support = support;
  result.feasible = true;
  return result;
}

}  // namespace detail

// Exact cardinality-constrained optimum by support enumeration: the convex
// reduced problem on each support of size min(alpha, n) is solved to
// stationarity, which is global there. Ties break toward the
// lexicographically smallest support so the result is deterministic.
template <class Scalar>
OracleResult<Scalar> cardinality_oracle(const PortfolioProblem<Scalar>& problem) {
  if (problem.n > detail::oracle_max_dimension)
    throw contract_error("cardinality_oracle is a test-scale tool (n <= 12)");
  check_square_symmetric(problem.Q);
  if (problem.alpha < 1 || problem.alpha > problem.n)
    throw contract_error("alpha must satisfy 1 <= alpha <= n");

  const Index s = std::min(problem.alpha, problem.n);
  std::vector<Index> support(static_cast<std::size_t>(s));
  for (Index i = 0; i < s; ++i) support[std::size_t(i)] = i;

  OracleResult<Scalar> best;
  constexpr Scalar tie_tol = Scalar(1e-12);
  while (true) {
    Scalar cap_sum = Scalar(0);
    for (Index i : support) cap_sum += problem.up[i];
    if (cap_sum >= Scalar(1) - Scalar(1e-12) &&
        detail::greedy_max_return(problem, support) >= problem.rho - Scalar(1e-9)) {
      auto candidate = detail::solve_support_qp(problem, support);
      if (candidate.feasible &&
          (candidate.objective < best.objective - tie_tol ||
           (candidate.objective <= best.objective + tie_tol &&
            (!best.feasible || candidate.support < best.support))))
        best = std::move(candidate);
    }

    // Advance to the next size-s combination.
    Index pos = s - 1;
    while (pos >= 0 && support[std::size_t(pos)] == problem.n - s + pos) --pos;
    if (pos < 0) break;
    ++support[std::size_t(pos)];
    for (Index i = pos + 1; i < s; ++i) support[std::size_t(i)] = support[std::size_t(i - 1)] + 1;
  }
  return best;
}

}  // namespace sparsefolio
