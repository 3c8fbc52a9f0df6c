#pragma once

#include <Eigen/Core>
#include <cstdlib>
#include <stdexcept>
#include <string>

namespace sparsefolio {

using Index = Eigen::Index;

template <class Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <class Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

// Concatenated (x, y) decision vector in R^{2n}: x half then y half.
template <class Scalar>
auto x_half(Vector<Scalar>& z, Index n) { return z.head(n); }
template <class Scalar>
auto x_half(const Vector<Scalar>& z, Index n) { return z.head(n); }
template <class Scalar>
auto y_half(Vector<Scalar>& z, Index n) { return z.tail(n); }
template <class Scalar>
auto y_half(const Vector<Scalar>& z, Index n) { return z.tail(n); }

template <class Scalar>
Vector<Scalar> make_pair_point(const Vector<Scalar>& x, const Vector<Scalar>& y) {
  Vector<Scalar> z(x.size() + y.size());
  z << x, y;
  return z;
}

struct contract_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct invalid_set_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct invalid_problem_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct parse_error : std::runtime_error {
  int line;
  int column;
  parse_error(const std::string& msg, int line_, int column_)
      : std::runtime_error(msg + " (line " + std::to_string(line_) + ", column " +
                           std::to_string(column_) + ")"),
        line(line_),
        column(column_) {}
};

enum class LogLevel { off = 0, error = 1, info = 2, debug = 3 };

// Diagnostics are opt-in via SPARSEFOLIO_LOG=error|info|debug and go to stderr.
inline LogLevel log_level() {
  static const LogLevel level = [] {
    const char* env = std::getenv("SPARSEFOLIO_LOG");
    if (!env) return LogLevel::off;
    const std::string s(env);
    if (s == "error") return LogLevel::error;
    if (s == "info") return LogLevel::info;
    if (s == "debug") return LogLevel::debug;
    return LogLevel::off;
  }();
  return level;
}

inline void log_message(LogLevel level, const std::string& msg) {
  if (static_cast<int>(level) <= static_cast<int>(log_level()))
    std::fputs((msg + "\n").c_str(), stderr);
}

}  // namespace sparsefolio
