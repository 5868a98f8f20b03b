#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

namespace bpmf {

using VarId = int;
using FactorId = int;

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();
inline constexpr double kPosInf = std::numeric_limits<double>::infinity();

// Base error for all library failures.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Hard constraints wiped out all probability mass (all-zero belief/message).
class ContradictionError : public Error {
 public:
  explicit ContradictionError(const std::string& what) : Error(what) {}
};

// Thrown by the graph-spec loader on malformed input.
class ParseError : public Error {
 public:
  explicit ParseError(const std::string& what) : Error(what) {}
};

// x ln x with the convention 0 ln 0 = 0.
inline double xlogx(double x) { return x > 0.0 ? x * std::log(x) : 0.0; }

// b ln(b/q) under the conventions 0 ln(0/q) = 0, b ln(b/0) = +inf for b > 0,
// 0 ln(0/0) = 0.
inline double kl_term(double b, double q) {
  if (b <= 0.0) return 0.0;
  if (q <= 0.0) return kPosInf;
  return b * std::log(b / q);
}

}  // namespace bpmf
