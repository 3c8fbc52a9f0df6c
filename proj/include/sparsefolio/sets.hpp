#pragma once

#include <algorithm>
#include <limits>
#include <variant>
#include <vector>

#include "sparsefolio/types.hpp"

namespace sparsefolio {

template <class Scalar>
struct Box {
  Vector<Scalar> lower;
  Vector<Scalar> upper;

  Box(Vector<Scalar> lo, Vector<Scalar> up) : lower(std::move(lo)), upper(std::move(up)) {
    if (lower.size() != upper.size())
      throw invalid_set_error("box bound vectors differ in size");
    if ((lower.array() > upper.array()).any())
      throw invalid_set_error("box has lower_i > upper_i");
  }
};

template <class Scalar>
struct Hyperplane {
  Vector<Scalar> normal;
  Scalar offset;    // normal' x = offset
  Scalar norm_sq;

  Hyperplane(Vector<Scalar> n, Scalar b) : normal(std::move(n)), offset(b) {
    norm_sq = normal.squaredNorm();
    if (norm_sq == Scalar(0)) throw invalid_set_error("hyperplane has zero normal");
  }
};

template <class Scalar>
struct HalfSpace {
  Vector<Scalar> normal;
  Scalar offset;    // feasible side: normal' x >= offset
  Scalar norm_sq;

  HalfSpace(Vector<Scalar> n, Scalar b) : normal(std::move(n)), offset(b) {
    norm_sq = normal.squaredNorm();
    if (norm_sq == Scalar(0)) throw invalid_set_error("half-space has zero normal");
  }
};

template <class Scalar>
struct ConvexSetSpec {
  std::variant<Box<Scalar>, Hyperplane<Scalar>, HalfSpace<Scalar>> variant;

  ConvexSetSpec(Box<Scalar> b) : variant(std::move(b)) {}
  ConvexSetSpec(Hyperplane<Scalar> h) : variant(std::move(h)) {}
  ConvexSetSpec(HalfSpace<Scalar> h) : variant(std::move(h)) {}

  Index dimension() const {
    return std::visit(
        [](const auto& s) -> Index {
          using S = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<S, Box<Scalar>>) return s.lower.size();
          else return s.normal.size();
        },
        variant);
  }
};

namespace detail {

template <class Scalar>
void check_dimension(const ConvexSetSpec<Scalar>& set, const Vector<Scalar>& point) {
  if (set.dimension() != point.size())
    throw contract_error("point dimension does not match set dimension");
}

}  // namespace detail

// In-place projection; the building block of the Dykstra cycle.
template <class Scalar>
void project_into(const ConvexSetSpec<Scalar>& set, Vector<Scalar>& point) {
  detail::check_dimension(set, point);
  std::visit(
      [&point](const auto& s) {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, Box<Scalar>>) {
          point = point.cwiseMax(s.lower).cwiseMin(s.upper);
        } else if constexpr (std::is_same_v<S, Hyperplane<Scalar>>) {
          const Scalar shift = (s.normal.dot(point) - s.offset) / s.norm_sq;
          point -= shift * s.normal;
        } else {
          const Scalar slack = s.normal.dot(point) - s.offset;
          if (slack < Scalar(0)) point -= (slack / s.norm_sq) * s.normal;
        }
      },
      set.variant);
}

template <class Scalar>
Vector<Scalar> project_set(const ConvexSetSpec<Scalar>& set, const Vector<Scalar>& point) {
  Vector<Scalar> out = point;
  project_into(set, out);
  return out;
}

// Max constraint violation at a point: 0 means feasible.
template <class Scalar>
Scalar set_violation(const ConvexSetSpec<Scalar>& set, const Vector<Scalar>& point) {
  detail::check_dimension(set, point);
  return std::visit(
      [&point](const auto& s) -> Scalar {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, Box<Scalar>>) {
          const Scalar below = (s.lower - point).cwiseMax(Scalar(0)).maxCoeff();
          const Scalar above = (point - s.upper).cwiseMax(Scalar(0)).maxCoeff();
          return std::max(below, above);
        } else if constexpr (std::is_same_v<S, Hyperplane<Scalar>>) {
          using std::abs;
          return abs(s.normal.dot(point) - s.offset);
        } else {
          return std::max(Scalar(0), s.offset - s.normal.dot(point));
        }
      },
      set.variant);
}

template <class Scalar>
struct DykstraConfig {
  Scalar epsilon = Scalar(1e-8);
  int max_cycles = 10000;
};

template <class Scalar>
struct DykstraState {
  Vector<Scalar> iterate;
  std::vector<Vector<Scalar>> increments;
  int cycle_count = 0;
  Scalar last_increment_delta = std::numeric_limits<Scalar>::infinity();
  bool converged = false;
};

// Alternating projections with increment correction; converges to the exact
// Euclidean projection onto the (nonempty) intersection. On cycle exhaustion
// the state carries the last iterate and residual and converged stays false;
// the caller decides whether to accept it.
template <class Scalar>
std::pair<Vector<Scalar>, DykstraState<Scalar>> dykstra_project(
    const std::vector<ConvexSetSpec<Scalar>>& sets, const Vector<Scalar>& point,
    const DykstraConfig<Scalar>& config = {}) {
  if (sets.empty()) throw contract_error("dykstra_project requires at least one set");
  for (const auto& s : sets) detail::check_dimension(s, point);

  const std::size_t p = sets.size();
  DykstraState<Scalar> state;
  state.iterate = point;
  state.increments.assign(p, Vector<Scalar>::Zero(point.size()));

  Vector<Scalar> previous_increment(point.size());
  for (int cycle = 0; cycle < config.max_cycles; ++cycle) {
    Scalar delta = Scalar(0);
    for (std::size_t i = 0; i < p; ++i) {
      previous_increment = state.increments[i];
      state.iterate -= previous_increment;
      const Vector<Scalar> pre_projection = state.iterate;
      project_into(sets[i], state.iterate);
      state.increments[i] = state.iterate - pre_projection;
      delta += (state.increments[i] - previous_increment).squaredNorm();
    }
    state.cycle_count = cycle + 1;
    state.last_increment_delta = delta;
    if (delta <= config.epsilon) {
      state.converged = true;
      break;
    }
  }
  return {state.iterate, state};
}

}  // namespace sparsefolio
