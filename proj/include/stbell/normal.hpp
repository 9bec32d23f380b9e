#pragma once

#include <cmath>
#include <numbers>

namespace stbell {

/// Standard normal cumulative distribution, Phi(x) = erfc(-x / sqrt 2) / 2.
/// std::erfc is accurate to a few ulp and keeps full relative precision in
/// the lower tail.
inline double normal_cdf(double x) noexcept { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

/// Phi(b) - Phi(a) for a <= b, evaluated on whichever tail avoids cancellation.
inline double normal_interval_probability(double a, double b) noexcept {
  if (!(a < b)) return 0.0;
  constexpr double r = 1.0 / std::numbers::sqrt2;
  if (a >= 0.0) return 0.5 * (std::erfc(a * r) - std::erfc(b * r));
  if (b <= 0.0) return 0.5 * (std::erfc(-b * r) - std::erfc(-a * r));
  return 0.5 * (std::erf(b * r) - std::erf(a * r));
}

}  // namespace stbell
