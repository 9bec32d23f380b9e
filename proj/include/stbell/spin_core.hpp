#pragma once

// Singlet-state spin correlations, outcome sampling and CHSH statistics.

#include <array>
#include <cmath>
#include <numbers>
#include <string>

#include "errors.hpp"
#include "random.hpp"

namespace stbell {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;
inline constexpr double kTsirelson = 2.0 * std::numbers::sqrt2;
inline constexpr double kLocalBound = 2.0;

/// Direction on the unit sphere.
class UnitVector3 {
 public:
  static constexpr double kNormTolerance = 1e-12;

  /// Throws DomainError unless x^2 + y^2 + z^2 = 1 within 1e-12.
  UnitVector3(double x, double y, double z) : x_(x), y_(y), z_(z) {
    const double n2 = x * x + y * y + z * z;
    require(std::abs(n2 - 1.0) <= kNormTolerance, "UnitVector3: not unit length");
  }

  /// Normalizes an arbitrary nonzero vector.
  static UnitVector3 normalized(double x, double y, double z) {
    const double n = std::sqrt(x * x + y * y + z * z);
    require(n > 0.0 && std::isfinite(n), "UnitVector3: cannot normalize zero vector");
    return UnitVector3(x / n, y / n, z / n, Unchecked{});
  }

  double x() const noexcept { return x_; }
  double y() const noexcept { return y_; }
  double z() const noexcept { return z_; }

  double dot(const UnitVector3& o) const noexcept { return x_ * o.x_ + y_ * o.y_ + z_ * o.z_; }
  UnitVector3 operator-() const noexcept { return UnitVector3(-x_, -y_, -z_, Unchecked{}); }

  friend bool operator==(const UnitVector3&, const UnitVector3&) = default;

 private:
  struct Unchecked {};
  UnitVector3(double x, double y, double z, Unchecked) noexcept : x_(x), y_(y), z_(z) {}

  double x_, y_, z_;
};

/// Angle in the measurement plane, wrapped into [0, 2*pi).
class PlanarAngle {
 public:
  constexpr PlanarAngle() = default;
  explicit PlanarAngle(double theta) : theta_(wrap(theta)) {}

  double radians() const noexcept { return theta_; }

  friend bool operator==(const PlanarAngle&, const PlanarAngle&) = default;

 private:
  static double wrap(double t) {
    require(std::isfinite(t), "PlanarAngle: non-finite angle");
    double w = std::fmod(t, kTwoPi);
    if (w < 0.0) w += kTwoPi;
    // fmod of a tiny negative number can round up to exactly 2*pi
    if (w >= kTwoPi) w = 0.0;
    return w;
  }

  double theta_ = 0.0;
};

/// Pair of +-1 measurement outcomes.
class OutcomePair {
 public:
  OutcomePair(int s_a, int s_b) : s_a_(s_a), s_b_(s_b) {
    require((s_a == 1 || s_a == -1) && (s_b == 1 || s_b == -1), "OutcomePair: outcomes must be +-1");
  }

  int a() const noexcept { return s_a_; }
  int b() const noexcept { return s_b_; }
  int product() const noexcept { return s_a_ * s_b_; }

  friend bool operator==(const OutcomePair&, const OutcomePair&) = default;

 private:
  int s_a_;
  int s_b_;
};

/// The four angles of a CHSH experiment.
struct ChshSettings {
  PlanarAngle alpha1, alpha2, beta1, beta2;

  /// Maximal-violation angles alpha1=pi/2, alpha2=0, beta1=pi/4, beta2=-pi/4.
  static ChshSettings canonical() {
    using std::numbers::pi;
    return {PlanarAngle(pi / 2), PlanarAngle(0.0), PlanarAngle(pi / 4), PlanarAngle(-pi / 4)};
  }
};

/// (cos theta, 0, sin theta).
inline UnitVector3 unit_from_planar_angle(PlanarAngle theta) {
  return UnitVector3::normalized(std::cos(theta.radians()), 0.0, std::sin(theta.radians()));
}

/// Alice's measurement direction a(alpha) = (cos alpha, 0, sin alpha).
inline UnitVector3 alice_direction(PlanarAngle alpha) { return unit_from_planar_angle(alpha); }

/// Bob's effective direction b(beta) = (-cos beta, 0, -sin beta), chosen so that
/// singlet_correlation(alice_direction(a), bob_direction(b)) = cos(a - b).
inline UnitVector3 bob_direction(PlanarAngle beta) { return -unit_from_planar_angle(beta); }

/// <psi_singlet| sigma.a (x) sigma.b |psi_singlet> = -(a.b).
inline double singlet_correlation(const UnitVector3& a, const UnitVector3& b) noexcept {
  return -a.dot(b);
}

/// P(s_a, s_b) for the singlet: (1 - s_a s_b a.b) / 4.
inline double joint_outcome_probability(const UnitVector3& a, const UnitVector3& b, OutcomePair s) noexcept {
  return 0.25 * (1.0 - s.product() * a.dot(b));
}

/// Draws one outcome pair: s_a is a fair coin, s_b then anti-aligns with
/// probability (1 + a.b)/2 so the joint law is joint_outcome_probability.
inline OutcomePair sample_singlet_outcomes(const UnitVector3& a, const UnitVector3& b, RandomSource& rng) {
  const int s_a = rng.bernoulli(0.5) ? 1 : -1;
  const double p_opposite = 0.5 * (1.0 + a.dot(b));
  const int s_b = rng.bernoulli(p_opposite) ? -s_a : s_a;
  return OutcomePair(s_a, s_b);
}

inline constexpr double kCorrelationSlack = 1e-9;

/// |p11 - p12| + |p21 + p22|. Throws DomainError if any |p| > 1 + 1e-9.
inline double chsh_statistic(double p11, double p12, double p21, double p22) {
  for (double p : {p11, p12, p21, p22}) {
    if (!(std::abs(p) <= 1.0 + kCorrelationSlack)) {
      throw DomainError("chsh_statistic: correlation " + std::to_string(p) + " outside [-1, 1]");
    }
  }
  return std::abs(p11 - p12) + std::abs(p21 + p22);
}

/// Correlations g*cos(alpha_i - beta_j) in row-major order (11, 12, 21, 22).
inline std::array<double, 4> quantum_correlations(const ChshSettings& s, double g) {
  require(g >= 0.0 && g <= 1.0, "quantum_chsh: g must lie in [0, 1]");
  auto corr = [g](PlanarAngle a, PlanarAngle b) {
    return g * singlet_correlation(alice_direction(a), bob_direction(b));
  };
  return {corr(s.alpha1, s.beta1), corr(s.alpha1, s.beta2), corr(s.alpha2, s.beta1), corr(s.alpha2, s.beta2)};
}

/// CHSH value of the localized singlet, each correlation scaled by g.
inline double quantum_chsh(const ChshSettings& s, double g) {
  const auto p = quantum_correlations(s, g);
  return chsh_statistic(p[0], p[1], p[2], p[3]);
}

}  // namespace stbell
