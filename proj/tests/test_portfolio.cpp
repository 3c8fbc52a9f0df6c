#include <doctest.h>

#include <cmath>
#include <random>
#include <tuple>

#include "sparsefolio/data_io.hpp"
#include "sparsefolio/portfolio.hpp"
#include "sparsefolio/pspgd.hpp"

using namespace sparsefolio;

namespace {

PortfolioProblem<double> tiny_problem() {
  PortfolioProblem<double> p;
  p.n = 2;
  p.Q = Matrix<double>(2, 2);
  p.Q << 2.0, 0.0, 0.0, 4.0;
  p.v = Vector<double>(2);
  p.v << 1.0, 1.0;
  p.up = Vector<double>::Ones(2);
  p.rho = 0.0;
  p.alpha = 2;
  return p;
}

}  // namespace

TEST_CASE("penalized objective value and gradient at a hand-checked point") {
  const auto problem = tiny_problem();
  const PenalizedObjective<double> obj{&problem, 3.0};

  Vector<double> point(4);
  point << 1.0, 2.0, 5.0, 7.0;   // x = (1, 2), y = (5, 7)

  // 1/2 (2 + 16) + 3 (5 + 14) = 9 + 57
  CHECK(objective_value(obj, point) == doctest::Approx(66.0).epsilon(1e-14));

  const auto grad = objective_gradient(obj, point);
  CHECK(grad[0] == doctest::Approx(17.0));   // Qx + tau y
  CHECK(grad[1] == doctest::Approx(29.0));
  CHECK(grad[2] == doctest::Approx(3.0));    // tau x
  CHECK(grad[3] == doctest::Approx(6.0));
}

TEST_CASE("gradient matches central finite differences") {
  const auto dataset = embedded_simple_case();
  const auto problem = make_problem(dataset, 3, 0.005);
  const PenalizedObjective<double> obj{&problem, 0.7};
  const auto callback = make_objective_callback(obj);

  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const double h = 1e-6;

  for (int trial = 0; trial < 50; ++trial) {
    Vector<double> z(2 * problem.n);
    for (Index i = 0; i < z.size(); ++i) z[i] = u(rng);
    const auto grad = callback.gradient(z);
    for (Index i = 0; i < z.size(); ++i) {
      Vector<double> zp = z, zm = z;
      zp[i] += h;
      zm[i] -= h;
      const double fd = (callback.value(zp) - callback.value(zm)) / (2.0 * h);
      CHECK(std::abs(grad[i] - fd) <= 1e-6 * std::max(1.0, std::abs(fd)));
    }
  }
}

TEST_CASE("objective calls reject points of the wrong dimension") {
  const auto problem = tiny_problem();
  const PenalizedObjective<double> obj{&problem, 1.0};
  const Vector<double> three = Vector<double>::Ones(3);
  const Vector<double> five = Vector<double>::Ones(5);
  CHECK_THROWS_AS(objective_value(obj, three), contract_error);
  CHECK_THROWS_AS(objective_gradient(obj, five), contract_error);
}

TEST_CASE("feasible sets encode the relaxed region in pair space") {
  auto problem = tiny_problem();
  problem.rho = 0.25;
  problem.alpha = 1;
  const auto sets = build_feasible_sets(problem);
  REQUIRE(sets.size() == 4);

  const auto* ret = std::get_if<HalfSpace<double>>(&sets[0].variant);
  REQUIRE(ret != nullptr);
  CHECK(ret->normal.head(2) == problem.v);
  CHECK(ret->normal.tail(2).isZero());
  CHECK(ret->offset == 0.25);

  const auto* budget = std::get_if<Hyperplane<double>>(&sets[1].variant);
  REQUIRE(budget != nullptr);
  CHECK(budget->normal.head(2) == Vector<double>::Ones(2));
  CHECK(budget->normal.tail(2).isZero());
  CHECK(budget->offset == 1.0);

  const auto* box = std::get_if<Box<double>>(&sets[2].variant);
  REQUIRE(box != nullptr);
  CHECK(box->lower.isZero());
  CHECK(box->upper.head(2) == problem.up);
  CHECK(box->upper.tail(2) == Vector<double>::Ones(2));

  const auto* spare = std::get_if<HalfSpace<double>>(&sets[3].variant);
  REQUIRE(spare != nullptr);
  CHECK(spare->normal.head(2).isZero());
  CHECK(spare->normal.tail(2) == Vector<double>::Ones(2));
  CHECK(spare->offset == 1.0);   // n - alpha

  // A known feasible pair point violates nothing.
  Vector<double> z(4);
  z << 1.0, 0.0, 0.0, 1.0;
  for (const auto& s : sets) CHECK(set_violation(s, z) <= 1e-14);
}

TEST_CASE("validate_problem rejects inconsistent instances") {
  const auto good = tiny_problem();
  CHECK_NOTHROW(validate_problem(good));

  auto p = good;
  p.alpha = 0;
  CHECK_THROWS_AS(validate_problem(p), invalid_problem_error);
  p.alpha = 3;
  CHECK_THROWS_AS(validate_problem(p), invalid_problem_error);

  p = good;
  p.v = Vector<double>::Ones(3);
  CHECK_THROWS_AS(validate_problem(p), invalid_problem_error);

  p = good;
  p.Q(0, 1) = 0.5;   // symmetry broken
  CHECK_THROWS_AS(validate_problem(p), invalid_problem_error);

  p = good;
  p.Q << 1.0, 2.0, 2.0, 1.0;   // eigenvalues 3 and -1
  CHECK_THROWS_AS(validate_problem(p), invalid_problem_error);

  p = good;
  p.up[0] = 0.0;
  CHECK_THROWS_AS(validate_problem(p), invalid_problem_error);
}

TEST_CASE("validate_problem rejects budgets unreachable under the cardinality cap") {
  auto p = tiny_problem();
  p.up = Vector<double>::Constant(2, 0.6);

  p.alpha = 1;   // best single asset holds 0.6 < 1
  CHECK_THROWS_AS(validate_problem(p), invalid_problem_error);

  p.alpha = 2;   // 0.6 + 0.6 covers the budget
  CHECK_NOTHROW(validate_problem(p));
}

TEST_CASE("count_nonzeros applies the threshold strictly") {
  Vector<double> x(4);
  x << 0.5, -1e-7, 0.0, -0.2;
  CHECK(count_nonzeros(x) == 2);
  CHECK(count_nonzeros(x, 0.0) == 3);
  CHECK(count_nonzeros(x, 0.4) == 1);
  CHECK_THROWS_AS(count_nonzeros(x, -1.0), contract_error);
}

TEST_CASE("risk helpers agree with direct formulas") {
  const auto dataset = embedded_simple_case();
  const auto problem = make_problem(dataset, 6, 0.0);
  const Vector<double> x = Vector<double>::Constant(6, 1.0 / 6.0);

  const double quad = x.dot(problem.Q * x);
  CHECK(risk_term(problem, x) == doctest::Approx(0.5 * quad).epsilon(1e-14));
  CHECK(portfolio_risk(problem, x) == doctest::Approx(std::sqrt(quad)).epsilon(1e-14));
  CHECK(portfolio_return(problem, x) == doctest::Approx(problem.v.mean()).epsilon(1e-12));
}

TEST_CASE("psd check and minimum-eigenvalue estimate") {
  const auto dataset = embedded_simple_case();
  CHECK(is_positive_semidefinite(dataset.covariance));

  const double lambda_min = min_eigenvalue_estimate(dataset.covariance, 0.1);
  CHECK(lambda_min == doctest::Approx(0.0179).epsilon(0.02));

  Matrix<double> indefinite(2, 2);
  indefinite << 1.0, 2.0, 2.0, 1.0;
  CHECK_FALSE(is_positive_semidefinite(indefinite));
}

TEST_CASE("initial tau is the Rayleigh quotient at Qe") {
  const auto dataset = embedded_simple_case();
  CHECK(initial_tau(dataset.covariance) ==
        doctest::Approx(0.11755616837757396).epsilon(1e-14));

  // Qe = 0 makes the quotient undefined; the seed falls back to 1.
  Matrix<double> balanced(2, 2);
  balanced << 1.0, -1.0, -1.0, 1.0;
  CHECK(initial_tau(balanced) == 1.0);

  const Matrix<double> identity = Matrix<double>::Identity(3, 3);
  CHECK(initial_tau(identity) == doctest::Approx(1.0));
}

TEST_CASE("tau update grows the penalty and never shrinks it") {
  auto problem = tiny_problem();
  problem.Q = Matrix<double>::Identity(2, 2);
  problem.alpha = 1;

  PenaltyState<double> state;
  state.tau = 2.0;
  state.delta = 1.0;
  state.x = Vector<double>(2);
  state.x << 1.0, 0.0;

  // increment = ((n - alpha) rho / n) |v'x| / sqrt(x'Qx) = 0.5
  problem.rho = 1.0;
  auto [tau_next, delta_next] = update_tau(state, problem);
  CHECK(delta_next == doctest::Approx(1.5));
  CHECK(tau_next == doctest::Approx(3.0));

  // Negative rho would shrink delta; the clamp keeps tau monotone.
  problem.rho = -1.0;
  std::tie(tau_next, delta_next) = update_tau(state, problem);
  CHECK(delta_next == doctest::Approx(1.0));
  CHECK(tau_next == doctest::Approx(2.0));

  // Zero risk switches to the unit increment.
  state.x.setZero();
  problem.rho = 1.0;
  std::tie(tau_next, delta_next) = update_tau(state, problem);
  CHECK(delta_next == doctest::Approx(2.0));
  CHECK(tau_next == doctest::Approx(4.0));
}
