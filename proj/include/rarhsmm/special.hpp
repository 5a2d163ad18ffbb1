#pragma once

#include <cmath>
#include <limits>
#include <span>

namespace rarhsmm {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// Digamma function for x > 0: upward recurrence to x >= 10 followed by the
/// asymptotic Bernoulli series. Absolute error stays below 1e-14 on (0, 1e8].
double digamma(double x);

/// log(exp(a) + exp(b)) with -inf treated as probability zero.
inline double log_add_exp(double a, double b) {
  if (a < b) std::swap(a, b);
  if (b == kNegInf) return a;
  return a + std::log1p(std::exp(b - a));
}

inline double log_sum_exp(std::span<const double> values) {
  double hi = kNegInf;
  for (double v : values) hi = std::max(hi, v);
  if (hi == kNegInf) return kNegInf;
  double acc = 0.0;
  for (double v : values) acc += std::exp(v - hi);
  return hi + std::log(acc);
}

// log(x) with log(0) = -inf and no floating-point exception noise.
inline double safe_log(double x) { return x > 0.0 ? std::log(x) : kNegInf; }

}  // namespace rarhsmm
