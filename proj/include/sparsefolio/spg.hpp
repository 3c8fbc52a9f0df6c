#pragma once

#include <algorithm>
#include <functional>
#include <limits>
#include <optional>
#include <type_traits>
#include <utility>
#include <vector>

#include "sparsefolio/types.hpp"

namespace sparsefolio {

template <class Scalar>
struct SpgConfig {
  Scalar gamma = Scalar(1e-4);       // sufficient-decrease constant
  int memory = 10;                   // nonmonotone window M
  int max_iterations = 50000;
  Scalar pg_tolerance = Scalar(1e-6);
  Scalar step_min = Scalar(1e-10);
  Scalar step_max = Scalar(1e10);
  // First-iteration step; unset means min(1, 1/||grad(z0)||_inf).
  std::optional<Scalar> initial_step;
};

enum class SpgStatus { converged, max_iterations, stagnated };

template <class Scalar>
struct SpgReport {
  Vector<Scalar> solution;
  int iterations = 0;
  long function_evaluations = 0;
  Scalar final_pg_norm = std::numeric_limits<Scalar>::infinity();
  bool converged = false;
  SpgStatus status = SpgStatus::max_iterations;
};

template <class Scalar>
struct ObjectiveCallback {
  std::function<Scalar(const Vector<Scalar>&)> value;
  std::function<Vector<Scalar>(const Vector<Scalar>&)> gradient;
};

template <class Scalar>
Scalar spectral_step(const Vector<Scalar>& s_prev, const Vector<Scalar>& grad_diff,
                     const SpgConfig<Scalar>& config) {
  const Scalar sty = s_prev.dot(grad_diff);
  if (sty <= Scalar(0)) return config.step_max;
  const Scalar raw = s_prev.squaredNorm() / sty;
  return std::clamp(raw, config.step_min, config.step_max);
}

namespace detail {

// Ring buffer of the last M accepted objective values.
template <class Scalar>
class ValueWindow {
 public:
  explicit ValueWindow(int capacity) : values_(static_cast<std::size_t>(capacity)) {}

  void push(Scalar v) {
    values_[next_] = v;
    next_ = (next_ + 1) % values_.size();
    if (count_ < values_.size()) ++count_;
  }

  Scalar max() const {
    Scalar m = values_[0];
    for (std::size_t i = 1; i < count_; ++i) m = std::max(m, values_[i]);
    return m;
  }

 private:
  std::vector<Scalar> values_;
  std::size_t next_ = 0;
  std::size_t count_ = 0;
};

}  // namespace detail

// Projected gradient with spectral step and nonmonotone backtracking. The
// start is projected once up front, so a slightly infeasible warm start is
// simply pulled into the set.
//
// The projection callable may return either the projected point or a
// (point, reliable) pair. An unreliable projection (e.g. an iterative scheme
// that hit its cycle cap) cannot certify a descent direction, so the trial
// direction falls back to the unit-step point already computed for the pg
// test; the same fallback guards against non-descent directions.
template <class Scalar, class Projection>
SpgReport<Scalar> spg_minimize(const ObjectiveCallback<Scalar>& objective,
                               Projection&& project, const Vector<Scalar>& start,
                               const SpgConfig<Scalar>& config = {}) {
  constexpr Scalar lambda_floor = Scalar(1e-16);

  const auto apply_projection = [&project](Vector<Scalar> w) {
    if constexpr (std::is_convertible_v<decltype(project(std::move(w))),
                                        std::pair<Vector<Scalar>, bool>>) {
      return std::pair<Vector<Scalar>, bool>(project(std::move(w)));
    } else {
      return std::pair<Vector<Scalar>, bool>(project(std::move(w)), true);
    }
  };

  SpgReport<Scalar> report;
  Vector<Scalar> z = apply_projection(start).first;
  Scalar f = objective.value(z);
  report.function_evaluations = 1;
  Vector<Scalar> g = objective.gradient(z);

  detail::ValueWindow<Scalar> window(config.memory);
  window.push(f);

  Scalar alpha = Scalar(1);
  Vector<Scalar> d, trial, grad_trial;

  for (int iteration = 0;; ++iteration) {
    const Vector<Scalar> pg_point = apply_projection(z - g).first;
    const Scalar pg_norm = (pg_point - z).norm();
    report.iterations = iteration;
    report.final_pg_norm = pg_norm;
    if (pg_norm <= config.pg_tolerance) {
      report.converged = true;
      report.status = SpgStatus::converged;
      break;
    }
    if (iteration >= config.max_iterations) {
      report.status = SpgStatus::max_iterations;
      break;
    }

    if (iteration == 0) {
      if (config.initial_step) {
        alpha = *config.initial_step;
      } else {
        const Scalar gmax = g.template lpNorm<Eigen::Infinity>();
        alpha = gmax > Scalar(0) ? std::min(Scalar(1), Scalar(1) / gmax) : Scalar(1);
      }
    }

    auto [trial_point, trial_reliable] = apply_projection(z - alpha * g);
    d = trial_point - z;
    Scalar gtd = g.dot(d);
    if (!trial_reliable || gtd >= Scalar(0)) {
      d = pg_point - z;
      gtd = g.dot(d);
    }
    const Scalar f_reference = window.max();

    Scalar lambda = Scalar(1);
    bool accepted = false;
    Scalar f_trial = f;
    while (lambda >= lambda_floor) {
      trial = z + lambda * d;
      f_trial = objective.value(trial);
      ++report.function_evaluations;
      if (f_trial <= f_reference + config.gamma * lambda * gtd) {
        accepted = true;
        break;
      }
      lambda /= Scalar(2);
    }
    if (!accepted) {
      report.status = SpgStatus::stagnated;
      break;
    }

    grad_trial = objective.gradient(trial);
    const Vector<Scalar> s = lambda * d;
    alpha = spectral_step<Scalar>(s, grad_trial - g, config);

    z.swap(trial);
    g.swap(grad_trial);
    f = f_trial;
    window.push(f);
  }

  report.solution = std::move(z);
  return report;
}

}  // namespace sparsefolio
