#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sparsefolio/portfolio.hpp"
#include "sparsefolio/sets.hpp"
#include "sparsefolio/spg.hpp"
#include "sparsefolio/types.hpp"

namespace sparsefolio {

template <class Scalar>
struct PenaltyConfig {
  Scalar tol1 = Scalar(1e-6);   // subproblem projected-gradient tolerance
  Scalar tol2 = Scalar(1e-8);   // Hadamard and objective-change tolerance
  int max_outer_iterations = 100;
  std::optional<Scalar> tau_initial_override;
};

template <class Scalar>
struct PenaltyState {
  Scalar tau = Scalar(0);
  Scalar delta = Scalar(1);
  int outer_index = 0;
  Vector<Scalar> x;
  Vector<Scalar> y;
  std::vector<Scalar> objective_history;
  std::vector<Scalar> hadamard_history;
  std::vector<Scalar> tau_history;
};

template <class Scalar>
struct SolveReport {
  Vector<Scalar> x_star;
  Vector<Scalar> y_star;
  Scalar expected_return = Scalar(0);
  Scalar risk = Scalar(0);
  int cardinality = 0;
  int outer_iterations = 0;     // Iter
  long spg_iterations = 0;      // Iter-SPG, summed over subproblems
  long function_evaluations = 0;
  Scalar final_tau = Scalar(0);
  Scalar hadamard = Scalar(0);
  Scalar pg_norm = std::numeric_limits<Scalar>::infinity();
  long dykstra_cap_hits = 0;   // projections that exhausted max_cycles
  double wall_time_seconds = 0.0;
  bool converged = false;
  std::string status = "not-run";
};

template <class Scalar>
Scalar initial_tau(const Matrix<Scalar>& Q) {
  check_square_symmetric(Q);
  const Vector<Scalar> z = Q * Vector<Scalar>::Ones(Q.rows());
  const Scalar denom = z.squaredNorm();
  if (denom == Scalar(0)) return Scalar(1);
  return z.dot(Q * z) / denom;
}

// One controlled penalty growth step: delta_{k+1} = delta_k + increment,
// tau_{k+1} = delta_{k+1} * tau_k. The increment is clamped at zero when a
// negative rho would shrink it, preserving tau monotonicity.
template <class Scalar>
std::pair<Scalar, Scalar> update_tau(const PenaltyState<Scalar>& state,
                                     const PortfolioProblem<Scalar>& problem) {
  using std::abs;
  using std::sqrt;
  const Scalar risk_sq = state.x.dot(problem.Q * state.x);
  Scalar increment;
  if (risk_sq > Scalar(0)) {
    const Scalar n = Scalar(problem.n);
    const Scalar spare = Scalar(problem.n - problem.alpha);
    increment = (spare * problem.rho / n) * abs(problem.v.dot(state.x)) / sqrt(risk_sq);
    if (increment < Scalar(0)) {
      log_message(LogLevel::info, "update_tau: negative increment clamped to 0 (rho = " +
                                      std::to_string(static_cast<double>(problem.rho)) + ")");
      increment = Scalar(0);
    }
  } else {
    increment = Scalar(1);
  }
  const Scalar delta_next = state.delta + increment;
  return {delta_next * state.tau, delta_next};
}

namespace detail {

enum class BaseObjective { penalized_risk, negated_return };

template <class Scalar>
struct PenaltyLoopSpec {
  BaseObjective base = BaseObjective::penalized_risk;
  Scalar update_rho = Scalar(0);   // rho fed to update_tau
  std::vector<ConvexSetSpec<Scalar>> cycle;
  DykstraConfig<Scalar> dykstra;
  int spg_max_iterations = 50000;
  Scalar spg_step_max = Scalar(1e10);
};

template <class Scalar>
SolveReport<Scalar> penalty_loop(const PortfolioProblem<Scalar>& problem,
                                 const PenaltyLoopSpec<Scalar>& spec,
                                 const PenaltyConfig<Scalar>& config,
                                 PenaltyState<Scalar>* trace_out = nullptr) {
  using clock = std::chrono::steady_clock;
  const auto t_start = clock::now();
  const Index n = problem.n;

  PortfolioProblem<Scalar> update_problem = problem;
  update_problem.rho = spec.update_rho;

  const bool max_return = spec.base == BaseObjective::negated_return;
  const auto base_value = [&](const auto& x) -> Scalar {
    return max_return ? -problem.v.dot(x) : Scalar(0.5) * x.dot(problem.Q * x);
  };

  PenaltyState<Scalar> state;
  state.x = Vector<Scalar>::Constant(n, Scalar(1) / Scalar(n));
  state.y = Vector<Scalar>::Zero(n);
  state.tau = config.tau_initial_override ? *config.tau_initial_override
                                          : initial_tau(problem.Q);
  state.delta = Scalar(1);

  SolveReport<Scalar> report;
  const auto project = [&](const Vector<Scalar>& w) {
    auto [point, dyk] = dykstra_project(spec.cycle, w, spec.dykstra);
    if (!dyk.converged) ++report.dykstra_cap_hits;
    return std::pair<Vector<Scalar>, bool>(std::move(point), dyk.converged);
  };

  Scalar f_prev = base_value(state.x);
  SpgStatus last_spg_status = SpgStatus::max_iterations;
  // Effective subproblem tolerance. A warm start can sit within tol1 of
  // stationarity while x'y is still above tol2; the subproblem then exits
  // without moving and the outer loop cannot make progress. Tightening the
  // tolerance whenever that happens forces the iterate to keep cleaning the
  // complementarity residual.
  Scalar pg_tolerance = config.tol1;
  constexpr Scalar pg_tolerance_floor = Scalar(1e-10);
  // A tightened re-solve is a polish of an already-stationary point: it either
  // succeeds within a few hundred iterations or never. Cap it, and once a
  // polish fails stop healing for the rest of the run; re-running the same
  // dead end every outer iteration is the expensive failure mode.
  constexpr int polish_iteration_cap = 1000;
  bool polish_failed = false;

  // With a nonpositive target return (or alpha = n) the delta increment is
  // clamped to zero on every outer iteration, so tau can never grow. Once the
  // tolerance ladder has bottomed out and the objective is flat, later outers
  // replay the same subproblem verbatim; stop instead of replaying it.
  const bool tau_frozen =
      spec.update_rho <= Scalar(0) || problem.alpha >= problem.n;
  bool stalled = false;

  for (int k = 0; k < config.max_outer_iterations; ++k) {
    state.outer_index = k;
    const auto [tau_next, delta_next] = update_tau(state, update_problem);
    state.tau = tau_next;
    state.delta = delta_next;

    const Scalar tau = state.tau;
    ObjectiveCallback<Scalar> objective{
        [&, tau](const Vector<Scalar>& z) {
          return base_value(x_half(z, n)) + tau * x_half(z, n).dot(y_half(z, n));
        },
        [&, tau](const Vector<Scalar>& z) {
          Vector<Scalar> grad(2 * n);
          const auto x = x_half(z, n);
          if (max_return)
            x_half(grad, n) = -problem.v + tau * y_half(z, n);
          else
            x_half(grad, n) = problem.Q * x + tau * y_half(z, n);
          y_half(grad, n) = tau * x;
          return grad;
        }};

    SpgConfig<Scalar> spg_config;
    spg_config.max_iterations = spec.spg_max_iterations;
    spg_config.step_max = spec.spg_step_max;

    SpgReport<Scalar> spg;
    Scalar hadamard = Scalar(0);
    bool polishing = false;
    SpgReport<Scalar> pre_polish;
    Scalar pre_polish_hadamard = Scalar(0);
    while (true) {
      spg_config.pg_tolerance = pg_tolerance;
      spg_config.max_iterations =
          polishing ? polish_iteration_cap : spec.spg_max_iterations;
      spg = spg_minimize(objective, project, make_pair_point(state.x, state.y),
                         spg_config);
      report.spg_iterations += spg.iterations;
      report.function_evaluations += spg.function_evaluations;
      hadamard = x_half(spg.solution, n).dot(y_half(spg.solution, n));
      if (polishing && !spg.converged) {
        // Keep the stationary point the polish started from.
        spg = std::move(pre_polish);
        hadamard = pre_polish_hadamard;
        pg_tolerance = config.tol1;
        polish_failed = true;
        log_message(LogLevel::debug,
                    "penalty_loop: polish gave up, healing disabled for this run");
        break;
      }
      const bool frozen = !polish_failed && spg.converged && spg.iterations == 0 &&
                          hadamard > config.tol2 && pg_tolerance > pg_tolerance_floor;
      if (!frozen) break;
      pre_polish = spg;
      pre_polish_hadamard = hadamard;
      pg_tolerance = std::max(spg.final_pg_norm * Scalar(0.25), pg_tolerance_floor);
      polishing = true;
      log_message(LogLevel::debug, "penalty_loop: stalled warm start, pg tolerance -> " +
                                       std::to_string(double(pg_tolerance)));
    }
    report.pg_norm = spg.final_pg_norm;
    last_spg_status = spg.status;

    state.x = x_half(spg.solution, n);
    state.y = y_half(spg.solution, n);
    const Scalar f_cur = base_value(state.x);
    state.objective_history.push_back(f_cur);
    state.hadamard_history.push_back(hadamard);
    state.tau_history.push_back(state.tau);
    report.outer_iterations = k + 1;

    using std::abs;
    const Scalar f_delta = abs(f_cur - f_prev);
    if (hadamard <= config.tol2 && f_delta <= config.tol2) {
      report.converged = true;
      break;
    }
    if (tau_frozen && f_delta <= config.tol2 &&
        (pg_tolerance <= pg_tolerance_floor || !spg.converged || polish_failed)) {
      stalled = true;
      log_message(LogLevel::info,
                  "penalty_loop: tau frozen and objective flat with hadamard = " +
                      std::to_string(double(hadamard)) + ", stopping at k=" +
                      std::to_string(k));
      break;
    }
    f_prev = f_cur;
    log_message(LogLevel::debug,
                "penalty_loop: k=" + std::to_string(k) + " tau=" + std::to_string(double(tau)) +
                    " hadamard=" + std::to_string(double(hadamard)));
  }

  report.x_star = state.x;
  report.y_star = state.y;
  report.expected_return = problem.v.dot(state.x);
  report.risk = portfolio_risk(problem, state.x);
  report.cardinality = count_nonzeros(state.x);
  report.final_tau = state.tau;
  report.hadamard = state.x.dot(state.y);
  report.status =
      report.converged
          ? "converged"
          : (stalled ? "stalled-penalty"
                     : (last_spg_status == SpgStatus::stagnated ? "stagnated-subproblem"
                                                                : "outer-iteration-cap"));
  report.wall_time_seconds =
      std::chrono::duration<double>(clock::now() - t_start).count();
  if (trace_out) *trace_out = state;
  return report;
}

}  // namespace detail

// The full outer loop: grow tau, solve each penalized subproblem with SPG over
// the Dykstra projection, stop once the Hadamard product and the objective
// have both stabilized below tol2.
namespace detail {

// Driver numerics, shared by the primary solve and the interval endpoints.
//
// Cycle order: the box is projected last. At a solution y is binary, so the
// box pins every y coordinate exactly; with the y-budget half-space last its
// uniform shift leaves ~1e-7 residue on the support and x'y can never reach
// tol2. Epsilon: the alternating projections contract the budget residual at
// rate (n - card)/n per cycle, so the increment test fires at roughly
// sqrt(epsilon / (1 - rate)); 1e-18 keeps the final feasibility error orders
// of magnitude below the 1e-6 certificates. Step cap: trial steps beyond ~1e4
// are already saturated (the projection has reached the supporting vertex),
// while their cycle count keeps growing linearly with the input magnitude.
template <class Scalar>
void apply_driver_numerics(PenaltyLoopSpec<Scalar>& spec,
                           std::vector<ConvexSetSpec<Scalar>> sets) {
  if (sets.size() >= 2) std::swap(sets[sets.size() - 2], sets[sets.size() - 1]);
  spec.cycle = std::move(sets);
  spec.dykstra.epsilon = Scalar(1e-18);
  spec.spg_step_max = Scalar(1e4);
}

}  // namespace detail

template <class Scalar>
SolveReport<Scalar> pspgd_solve(const PortfolioProblem<Scalar>& problem,
                                const PenaltyConfig<Scalar>& config = {},
                                PenaltyState<Scalar>* trace_out = nullptr) {
  validate_problem(problem);
  detail::PenaltyLoopSpec<Scalar> spec;
  spec.base = detail::BaseObjective::penalized_risk;
  spec.update_rho = problem.rho;
  detail::apply_driver_numerics(spec, build_feasible_sets(problem));
  return detail::penalty_loop(problem, spec, config, trace_out);
}

template <class Scalar>
struct RhoInterval {
  Scalar rho_min = Scalar(0);
  Scalar rho_max = Scalar(0);
  Vector<Scalar> x_min;
  Vector<Scalar> x_max;
  SolveReport<Scalar> min_report;
  SolveReport<Scalar> max_report;
};

// Feasible-return interval endpoints: minimize the risk term and maximize the
// return, both penalized, over the feasible sets without the return
// half-space. rho plays no role here, so update_tau sees rho = 0 and the
// penalty parameter stays at its initial value.
template <class Scalar>
RhoInterval<Scalar> compute_rho_interval(const PortfolioProblem<Scalar>& problem,
                                         const PenaltyConfig<Scalar>& config = {}) {
  validate_problem(problem);
  PortfolioProblem<Scalar> aux = problem;
  aux.rho = Scalar(0);
  auto sets = build_feasible_sets(aux);
  sets.erase(sets.begin());   // drop the return half-space

  detail::PenaltyLoopSpec<Scalar> spec;
  spec.update_rho = Scalar(0);
  detail::apply_driver_numerics(spec, std::move(sets));

  RhoInterval<Scalar> interval;
  spec.base = detail::BaseObjective::penalized_risk;
  interval.min_report = detail::penalty_loop(aux, spec, config);
  spec.base = detail::BaseObjective::negated_return;
  interval.max_report = detail::penalty_loop(aux, spec, config);

  interval.x_min = interval.min_report.x_star;
  interval.x_max = interval.max_report.x_star;
  interval.rho_min = problem.v.dot(interval.x_min);
  interval.rho_max = problem.v.dot(interval.x_max);
  return interval;
}

enum class RhoSelectMode { rho_min_magnitude, candidate_magnitude };

template <class Scalar>
Scalar select_rho(const RhoInterval<Scalar>& interval, const Vector<Scalar>& v,
                  Scalar epsilon_tilde,
                  RhoSelectMode mode = RhoSelectMode::rho_min_magnitude) {
  if (!(epsilon_tilde > Scalar(0) && epsilon_tilde < Scalar(1)))
    throw contract_error("epsilon_tilde must lie in (0, 1)");
  using std::abs;
  const Scalar candidate =
      interval.rho_min + epsilon_tilde * (interval.rho_max - interval.rho_min);
  if (candidate >= Scalar(0)) return candidate;
  const Scalar v_max = v.maxCoeff();
  const Scalar magnitude =
      mode == RhoSelectMode::rho_min_magnitude ? abs(interval.rho_min) : abs(candidate);
  if (magnitude <= v_max) return epsilon_tilde * magnitude;
  return epsilon_tilde * v_max;
}

}  // namespace sparsefolio
