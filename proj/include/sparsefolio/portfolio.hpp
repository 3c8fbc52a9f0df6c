#pragma once

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "sparsefolio/sets.hpp"
#include "sparsefolio/spg.hpp"
#include "sparsefolio/types.hpp"

namespace sparsefolio {

template <class Scalar>
struct PortfolioProblem {
  Index n = 0;
  Matrix<Scalar> Q;     // covariance, symmetric PSD
  Vector<Scalar> v;     // mean returns
  Vector<Scalar> up;    // upper bounds on weights
  Scalar rho = Scalar(0);
  Index alpha = 0;
};

template <class Scalar>
void check_square_symmetric(const Matrix<Scalar>& Q, Scalar tolerance = Scalar(1e-12)) {
  if (Q.rows() != Q.cols() || Q.rows() < 1)
    throw invalid_problem_error("covariance matrix must be square and nonempty");
  using std::abs;
  for (Index i = 0; i < Q.rows(); ++i)
    for (Index j = i + 1; j < Q.cols(); ++j)
      if (abs(Q(i, j) - Q(j, i)) > tolerance)
        throw invalid_problem_error("covariance matrix is not symmetric");
}

// Smallest-eigenvalue estimate by inverse-power iterations on the shifted
// matrix Q + shift*I (one Cholesky factorization, no eigendecomposition).
// Requires Q + shift*I positive definite, i.e. a prior PSD check.
template <class Scalar>
Scalar min_eigenvalue_estimate(const Matrix<Scalar>& Q, Scalar shift, int iterations = 64) {
  const Index n = Q.rows();
  Matrix<Scalar> shifted = Q;
  shifted.diagonal().array() += shift;
  Eigen::LLT<Matrix<Scalar>> llt(shifted);
  if (llt.info() != Eigen::Success)
    throw invalid_problem_error("shifted covariance is not positive definite");
  Vector<Scalar> w = Vector<Scalar>::Ones(n);
  w /= w.norm();
  for (int it = 0; it < iterations; ++it) {
    w = llt.solve(w);
    const Scalar norm = w.norm();
    if (!(norm > Scalar(0))) break;
    w /= norm;
  }
  return w.dot(Q * w);
}

// PSD check: Q + tol*I admits a Cholesky factorization iff lambda_min > -tol
// up to round-off.
template <class Scalar>
bool is_positive_semidefinite(const Matrix<Scalar>& Q, Scalar tolerance = Scalar(1e-8)) {
  Matrix<Scalar> shifted = Q;
  shifted.diagonal().array() += tolerance;
  Eigen::LLT<Matrix<Scalar>> llt(shifted);
  return llt.info() == Eigen::Success;
}

template <class Scalar>
void validate_problem(const PortfolioProblem<Scalar>& problem) {
  if (problem.n < 1) throw invalid_problem_error("asset count must be positive");
  if (problem.Q.rows() != problem.n || problem.Q.cols() != problem.n)
    throw invalid_problem_error("covariance dimensions do not match asset count");
  if (problem.v.size() != problem.n)
    throw invalid_problem_error("return vector length does not match asset count");
  if (problem.up.size() != problem.n)
    throw invalid_problem_error("upper-bound vector length does not match asset count");
  if ((problem.up.array() <= Scalar(0)).any())
    throw invalid_problem_error("upper bounds must be positive");
  if (problem.alpha < 1 || problem.alpha > problem.n)
    throw invalid_problem_error("alpha must satisfy 1 <= alpha <= n");
  // Budget reachability under the cardinality cap: a portfolio with at most
  // alpha nonzero weights exists iff the alpha largest upper bounds sum to 1.
  std::vector<Scalar> caps(problem.up.data(), problem.up.data() + problem.n);
  std::nth_element(caps.begin(), caps.begin() + (problem.alpha - 1), caps.end(),
                   std::greater<Scalar>());
  Scalar reachable = Scalar(0);
  for (Index i = 0; i < problem.alpha; ++i) reachable += caps[std::size_t(i)];
  if (reachable < Scalar(1) - Scalar(1e-12))
    throw invalid_problem_error("alpha largest upper bounds sum below the unit budget");
  check_square_symmetric(problem.Q);
  if (!is_positive_semidefinite(problem.Q))
    throw invalid_problem_error("covariance matrix is not positive semidefinite");
}

template <class Scalar>
Scalar portfolio_return(const PortfolioProblem<Scalar>& problem, const Vector<Scalar>& x) {
  return problem.v.dot(x);
}

template <class Scalar>
Scalar portfolio_risk(const PortfolioProblem<Scalar>& problem, const Vector<Scalar>& x) {
  using std::sqrt;
  return sqrt(std::max(Scalar(0), x.dot(problem.Q * x)));
}

// The smooth part of the objective: one half x'Qx.
template <class Scalar>
Scalar risk_term(const PortfolioProblem<Scalar>& problem, const Vector<Scalar>& x) {
  return Scalar(0.5) * x.dot(problem.Q * x);
}

template <class Scalar>
int count_nonzeros(const Vector<Scalar>& x, Scalar threshold = Scalar(1e-6)) {
  if (threshold < Scalar(0)) throw contract_error("threshold must be nonnegative");
  using std::abs;
  int count = 0;
  for (Index i = 0; i < x.size(); ++i)
    if (abs(x(i)) > threshold) ++count;
  return count;
}

template <class Scalar>
struct PenalizedObjective {
  const PortfolioProblem<Scalar>* problem;
  Scalar tau;
};

template <class Scalar>
Scalar objective_value(const PenalizedObjective<Scalar>& obj, const Vector<Scalar>& point) {
  const Index n = obj.problem->n;
  if (point.size() != 2 * n) throw contract_error("pair point must have dimension 2n");
  const auto x = x_half(point, n);
  const auto y = y_half(point, n);
  return Scalar(0.5) * x.dot(obj.problem->Q * x) + obj.tau * x.dot(y);
}

template <class Scalar>
Vector<Scalar> objective_gradient(const PenalizedObjective<Scalar>& obj,
                                  const Vector<Scalar>& point) {
  const Index n = obj.problem->n;
  if (point.size() != 2 * n) throw contract_error("pair point must have dimension 2n");
  const auto x = x_half(point, n);
  const auto y = y_half(point, n);
  Vector<Scalar> grad(2 * n);
  x_half(grad, n) = obj.problem->Q * x + obj.tau * y;
  y_half(grad, n) = obj.tau * x;
  return grad;
}

template <class Scalar>
ObjectiveCallback<Scalar> make_objective_callback(const PenalizedObjective<Scalar>& obj) {
  return {[obj](const Vector<Scalar>& z) { return objective_value(obj, z); },
          [obj](const Vector<Scalar>& z) { return objective_gradient(obj, z); }};
}

// The four sets whose intersection is the relaxed feasible region:
// return half-space, budget hyperplane, merged (x, y) box, y-budget half-space.
template <class Scalar>
std::vector<ConvexSetSpec<Scalar>> build_feasible_sets(const PortfolioProblem<Scalar>& problem) {
  const Index n = problem.n;
  const Vector<Scalar> zeros = Vector<Scalar>::Zero(n);
  const Vector<Scalar> ones = Vector<Scalar>::Ones(n);

  std::vector<ConvexSetSpec<Scalar>> sets;
  sets.reserve(4);
  sets.emplace_back(HalfSpace<Scalar>(make_pair_point(problem.v, zeros), problem.rho));
  sets.emplace_back(Hyperplane<Scalar>(make_pair_point(ones, zeros), Scalar(1)));
  sets.emplace_back(Box<Scalar>(make_pair_point(zeros, zeros),
                                make_pair_point(problem.up, ones)));
  sets.emplace_back(HalfSpace<Scalar>(make_pair_point(zeros, ones),
                                      Scalar(n - problem.alpha)));
  return sets;
}

}  // namespace sparsefolio
