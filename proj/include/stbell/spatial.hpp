#pragma once

// Spatial part of the two-particle wave function: Gaussian packets, detector
// boxes and the localization factor g(O_A, O_B), the probability of finding
// particle 1 in O_A and particle 2 in O_B.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "normal.hpp"
#include "parallel.hpp"
#include "quadrature.hpp"

namespace stbell {

using Vec3 = std::array<double, 3>;

inline double norm(const Vec3& v) noexcept { return std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]); }

inline Vec3 operator+(const Vec3& a, const Vec3& b) noexcept { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }

/// Width of a free Gaussian packet of initial width epsilon after time t:
/// epsilon * sqrt(1 + hbar^2 t^2 / (M^2 epsilon^4)).
inline double expanded_width(double epsilon, double mass, double t, double hbar = 1.0) {
  require(epsilon > 0.0 && mass > 0.0 && hbar > 0.0, "expanded_width: epsilon, mass and hbar must be positive");
  require(t >= 0.0, "expanded_width: t must be nonnegative");
  return epsilon * std::hypot(1.0, hbar * t / (mass * epsilon * epsilon));
}

/// Probability g in [0, 1].
class LocalizationFactor {
 public:
  explicit LocalizationFactor(double g) : g_(g) {
    require(g >= 0.0 && g <= 1.0, "LocalizationFactor: g must lie in [0, 1], got " + std::to_string(g));
  }
  double value() const noexcept { return g_; }
  operator double() const noexcept { return g_; }

 private:
  double g_;
};

/// Isotropic Gaussian packet |psi(r)|^2 = (m^2 / 2pi)^{3/2} exp(-m^2 (r - c)^2 / 2).
/// Per-axis standard deviation is 1/m at t = 0; the center does not drift.
class GaussianPacket {
 public:
  GaussianPacket(Vec3 center, double width_param, double mass = 1.0, double hbar = 1.0)
      : center_(center), m_(width_param), mass_(mass), hbar_(hbar) {
    require(width_param > 0.0 && mass > 0.0 && hbar > 0.0, "GaussianPacket: m, M and hbar must be positive");
    for (double c : center) require(std::isfinite(c), "GaussianPacket: non-finite center");
  }

  const Vec3& center() const noexcept { return center_; }
  double width_param() const noexcept { return m_; }
  double mass() const noexcept { return mass_; }
  double hbar() const noexcept { return hbar_; }

  double sigma(double t = 0.0) const { return expanded_width(1.0 / m_, mass_, t, hbar_); }

  GaussianPacket translated(const Vec3& v) const { return GaussianPacket(center_ + v, m_, mass_, hbar_); }

  /// |psi(r, t)|^2.
  double density(const Vec3& r, double t = 0.0) const {
    const double s = sigma(t);
    double q = 0.0;
    for (int i = 0; i < 3; ++i) {
      const double d = (r[i] - center_[i]) / s;
      q += d * d;
    }
    const double norm_const = 1.0 / (s * s * s * std::pow(2.0 * std::numbers::pi, 1.5));
    return norm_const * std::exp(-0.5 * q);
  }

 private:
  Vec3 center_;
  double m_;
  double mass_;
  double hbar_;
};

/// Axis-aligned box [lo_0, hi_0] x [lo_1, hi_1] x [lo_2, hi_2].
class BoxRegion {
 public:
  BoxRegion(Vec3 lo, Vec3 hi) : lo_(lo), hi_(hi) {
    for (int i = 0; i < 3; ++i) {
      require(std::isfinite(lo[i]) && std::isfinite(hi[i]), "BoxRegion: non-finite bound");
      require(lo[i] < hi[i], "BoxRegion: lo must be strictly below hi on every axis");
    }
  }

  /// The cube [c - h, c + h]^3.
  static BoxRegion cube(const Vec3& c, double half_width) {
    return BoxRegion({c[0] - half_width, c[1] - half_width, c[2] - half_width},
                     {c[0] + half_width, c[1] + half_width, c[2] + half_width});
  }

  const Vec3& lo() const noexcept { return lo_; }
  const Vec3& hi() const noexcept { return hi_; }

  BoxRegion translated(const Vec3& v) const { return BoxRegion(lo_ + v, hi_ + v); }

  bool contains(const BoxRegion& inner) const noexcept {
    for (int i = 0; i < 3; ++i) {
      if (inner.lo_[i] < lo_[i] || inner.hi_[i] > hi_[i]) return false;
    }
    return true;
  }

  friend bool operator==(const BoxRegion&, const BoxRegion&) = default;

 private:
  Vec3 lo_;
  Vec3 hi_;
};

/// Probability that a packet evolved to time t lies inside the box.
inline double packet_probability_in_box(const GaussianPacket& p, const BoxRegion& r, double t = 0.0) {
  require(t >= 0.0, "packet_probability_in_box: t must be nonnegative");
  const double s = p.sigma(t);
  double prob = 1.0;
  for (int i = 0; i < 3; ++i) {
    prob *= normal_interval_probability((r.lo()[i] - p.center()[i]) / s, (r.hi()[i] - p.center()[i]) / s);
  }
  return std::clamp(prob, 0.0, 1.0);
}

/// g for a product state psi_A(r1) psi_B(r2).
inline LocalizationFactor g_factor_product(const GaussianPacket& pa, const GaussianPacket& pb, const BoxRegion& ra,
                                           const BoxRegion& rb, double t = 0.0) {
  return LocalizationFactor(std::clamp(packet_probability_in_box(pa, ra, t) * packet_probability_in_box(pb, rb, t), 0.0, 1.0));
}

/// |phi(r1, r2)|^2 on R^3 x R^3.
using JointDensity = std::function<double(const Vec3& r1, const Vec3& r2)>;

struct QuadratureOptions {
  /// Per-axis Gauss-Legendre orders tried in sequence.
  std::vector<std::size_t> orders{4, 6, 8, 12, 16, 20, 24};
  /// 0 selects one worker per hardware thread.
  unsigned workers = 0;
};

struct QuadratureResult {
  double value;
  double error_estimate;
  std::size_t order;
};

/// Raised when refinement runs out before successive estimates agree.
class QuadratureError : public NumericalError {
 public:
  QuadratureError(double best_estimate, double error_bound)
      : NumericalError("g_factor_quadrature: no convergence; best estimate " + std::to_string(best_estimate) +
                       ", error bound " + std::to_string(error_bound)),
        best_estimate_(best_estimate),
        error_bound_(error_bound) {}

  double best_estimate() const noexcept { return best_estimate_; }
  double error_bound() const noexcept { return error_bound_; }

 private:
  double best_estimate_;
  double error_bound_;
};

namespace detail {

// One tensor-product Gauss-Legendre pass of the given order over ra x rb.
// Work is split over the nodes of the first axis; each slice is summed
// sequentially and slices are reduced in index order, so the result does not
// depend on the number of workers.
inline double tensor_gauss_legendre(const JointDensity& density, const BoxRegion& ra, const BoxRegion& rb,
                                    std::size_t order, unsigned workers) {
  std::array<QuadratureRule, 6> axis;
  for (int i = 0; i < 3; ++i) {
    axis[i] = gauss_legendre(order, ra.lo()[i], ra.hi()[i]);
    axis[3 + i] = gauss_legendre(order, rb.lo()[i], rb.hi()[i]);
  }
  auto run_slice = [&](std::size_t i0) {
    double acc = 0.0;
    Vec3 r1{axis[0].nodes[i0], 0.0, 0.0};
    Vec3 r2{};
    for (std::size_t i1 = 0; i1 < order; ++i1) {
      r1[1] = axis[1].nodes[i1];
      for (std::size_t i2 = 0; i2 < order; ++i2) {
        r1[2] = axis[2].nodes[i2];
        const double w12 = axis[1].weights[i1] * axis[2].weights[i2];
        for (std::size_t j0 = 0; j0 < order; ++j0) {
          r2[0] = axis[3].nodes[j0];
          for (std::size_t j1 = 0; j1 < order; ++j1) {
            r2[1] = axis[4].nodes[j1];
            const double w345 = axis[3].weights[j0] * axis[4].weights[j1];
            for (std::size_t j2 = 0; j2 < order; ++j2) {
              r2[2] = axis[5].nodes[j2];
              acc += w12 * w345 * axis[5].weights[j2] * density(r1, r2);
            }
          }
        }
      }
    }
    return axis[0].weights[i0] * acc;
  };
  const std::vector<double> slice = run_shards(order, run_slice, workers);
  double total = 0.0;
  for (double s : slice) total += s;
  return total;
}

}  // namespace detail

/// Integrates a joint density over ra x rb to absolute tolerance tol by
/// raising the per-axis Gauss-Legendre order until two successive estimates
/// differ by less than tol. Throws QuadratureError otherwise.
inline QuadratureResult integrate_over_regions(const JointDensity& density, const BoxRegion& ra, const BoxRegion& rb,
                                               double tol, const QuadratureOptions& opts = {}) {
  require(tol > 0.0, "g_factor_quadrature: tol must be positive");
  require(!opts.orders.empty(), "g_factor_quadrature: empty order schedule");
  double prev = detail::tensor_gauss_legendre(density, ra, rb, opts.orders.front(), opts.workers);
  double diff = std::numeric_limits<double>::infinity();
  for (std::size_t k = 1; k < opts.orders.size(); ++k) {
    const double cur = detail::tensor_gauss_legendre(density, ra, rb, opts.orders[k], opts.workers);
    diff = std::abs(cur - prev);
    prev = cur;
    if (diff < tol) return {cur, diff, opts.orders[k]};
  }
  throw QuadratureError(prev, diff);
}

/// g(O_A, O_B) for a general (possibly entangled-in-space) joint density.
inline LocalizationFactor g_factor_quadrature(const JointDensity& density, const BoxRegion& ra, const BoxRegion& rb,
                                              double tol, const QuadratureOptions& opts = {}) {
  return LocalizationFactor(std::clamp(integrate_over_regions(density, ra, rb, tol, opts).value, 0.0, 1.0));
}

/// Joint density of the product state pa(r1) pb(r2) at time t.
inline JointDensity product_density(const GaussianPacket& pa, const GaussianPacket& pb, double t = 0.0) {
  return [pa, pb, t](const Vec3& r1, const Vec3& r2) { return pa.density(r1, t) * pb.density(r2, t); };
}

/// Two packets and two detector cubes: A at the origin with O_A = [-1/m, 1/m]^3,
/// B and O_B translated by l.
struct GaussianSetup {
  GaussianPacket packet_a;
  GaussianPacket packet_b;
  BoxRegion region_a;
  BoxRegion region_b;

  LocalizationFactor g(double t = 0.0) const { return g_factor_product(packet_a, packet_b, region_a, region_b, t); }
};

inline GaussianSetup paper_gaussian_setup(double m, const Vec3& l, double mass = 1.0, double hbar = 1.0) {
  require(m > 0.0, "paper_gaussian_setup: m must be positive");
  require(norm(l) >= 10.0 / m, "paper_gaussian_setup: separation |l| must be at least 10/m");
  const GaussianPacket a({0.0, 0.0, 0.0}, m, mass, hbar);
  const BoxRegion oa = BoxRegion::cube({0.0, 0.0, 0.0}, 1.0 / m);
  return {a, a.translated(l), oa, oa.translated(l)};
}

/// g(t) on an ascending grid of nonnegative times.
inline std::vector<std::pair<double, double>> g_decay_curve(const GaussianSetup& setup, const std::vector<double>& t_grid) {
  std::vector<std::pair<double, double>> out;
  out.reserve(t_grid.size());
  for (std::size_t i = 0; i < t_grid.size(); ++i) {
    require(t_grid[i] >= 0.0, "g_decay_curve: times must be nonnegative");
    require(i == 0 || t_grid[i] >= t_grid[i - 1], "g_decay_curve: times must be ascending");
    out.emplace_back(t_grid[i], setup.g(t_grid[i]).value());
  }
  return out;
}

}  // namespace stbell
