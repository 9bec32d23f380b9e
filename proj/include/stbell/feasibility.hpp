#pragma once

/*
 * Finite-grid local-realism test.
 *
 * A matrix P_ij = E xi_i eta_j with |xi_i| <= 1, |eta_j| <= 1 exists on some
 * probability space iff P lies in the local correlation polytope
 * conv{ s t^T : s in {+-1}^m, t in {+-1}^n }. One direction is immediate:
 * a mixture of sign strategies is such a model. Conversely, for fixed lambda
 * the map (x, y) -> x y^T is affine in x for fixed y and in y for fixed x, so
 * x(lambda) y(lambda)^T is a convex combination of products of cube vertices;
 * integrating over lambda keeps P in the convex hull.
 *
 * Membership is decided by phase-1 simplex on the vertex formulation
 *   find w >= 0 with sum_k w_k s^k_i t^k_j = P_ij, sum_k w_k = 1.
 * The 2^{m+n-1} strategy columns (s and -s give the same column) are never
 * stored: pricing maximizes y^T a_k by enumerating the smaller side and
 * choosing the other side's signs greedily. On infeasibility the phase-1
 * dual is a Farkas certificate, i.e. a Bell inequality
 *   sum_ij C_ij s_i t_j <= bound  for all strategies, violated by P.
 */

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "spin_core.hpp"

namespace stbell {

inline constexpr std::size_t kMaxTargetSettings = 24;

/// Target correlations P_ij on an alpha x beta angle grid.
class CorrelationTarget {
 public:
  CorrelationTarget(std::vector<PlanarAngle> alphas, std::vector<PlanarAngle> betas, Eigen::MatrixXd p)
      : alphas_(std::move(alphas)), betas_(std::move(betas)), p_(std::move(p)) {
    require(!alphas_.empty() && !betas_.empty(), "CorrelationTarget: need at least one setting per side");
    require(alphas_.size() + betas_.size() <= kMaxTargetSettings,
            "CorrelationTarget: m + n exceeds the size cap of " + std::to_string(kMaxTargetSettings));
    require(p_.rows() == static_cast<Eigen::Index>(alphas_.size()) &&
                p_.cols() == static_cast<Eigen::Index>(betas_.size()),
            "CorrelationTarget: matrix shape does not match the angle lists");
    for (Eigen::Index i = 0; i < p_.size(); ++i) {
      const double v = p_.data()[i];
      require(std::isfinite(v) && std::abs(v) <= 1.0 + kCorrelationSlack, "CorrelationTarget: |P_ij| must be <= 1");
    }
  }

  /// Matrix-only target; angles are recorded as zero.
  static CorrelationTarget from_matrix(Eigen::MatrixXd p) {
    std::vector<PlanarAngle> alphas(static_cast<std::size_t>(p.rows()));
    std::vector<PlanarAngle> betas(static_cast<std::size_t>(p.cols()));
    return CorrelationTarget(std::move(alphas), std::move(betas), std::move(p));
  }

  /// P_ij = g cos(alpha_i - beta_j).
  static CorrelationTarget cosine(std::vector<PlanarAngle> alphas, std::vector<PlanarAngle> betas, double g = 1.0) {
    Eigen::MatrixXd p(static_cast<Eigen::Index>(alphas.size()), static_cast<Eigen::Index>(betas.size()));
    for (std::size_t i = 0; i < alphas.size(); ++i) {
      for (std::size_t j = 0; j < betas.size(); ++j) {
        p(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
            g * std::cos(alphas[i].radians() - betas[j].radians());
      }
    }
    return CorrelationTarget(std::move(alphas), std::move(betas), std::move(p));
  }

  /// The 2x2 target at alpha = (pi/2, 0), beta = (pi/4, -pi/4).
  static CorrelationTarget canonical_chsh(double g = 1.0) {
    const auto s = ChshSettings::canonical();
    return cosine({s.alpha1, s.alpha2}, {s.beta1, s.beta2}, g);
  }

  CorrelationTarget scaled(double g) const { return CorrelationTarget(alphas_, betas_, g * p_); }

  std::size_t rows() const noexcept { return alphas_.size(); }
  std::size_t cols() const noexcept { return betas_.size(); }
  const std::vector<PlanarAngle>& alphas() const noexcept { return alphas_; }
  const std::vector<PlanarAngle>& betas() const noexcept { return betas_; }
  const Eigen::MatrixXd& matrix() const noexcept { return p_; }

 private:
  std::vector<PlanarAngle> alphas_;
  std::vector<PlanarAngle> betas_;
  Eigen::MatrixXd p_;
};

/// Deterministic local strategy: Alice answers s_i, Bob answers t_j.
struct SignStrategy {
  std::vector<int> s;
  std::vector<int> t;
  friend bool operator==(const SignStrategy&, const SignStrategy&) = default;
};

struct WeightedStrategy {
  SignStrategy strategy;
  double weight = 0.0;
};

/// sum_ij C_ij s_i t_j <= bound for every sign strategy.
struct BellCertificate {
  Eigen::MatrixXd coefficients;
  double bound = 0.0;
};

enum class FeasibilityStatus { feasible, infeasible };

struct FeasibilityResult {
  FeasibilityStatus status = FeasibilityStatus::feasible;
  /// Representing mixture; empty unless feasible.
  std::vector<WeightedStrategy> weights;
  /// Separating inequality; set iff infeasible.
  std::optional<BellCertificate> certificate;
  /// Phase-1 optimum (L1 distance to the polytope in the scaled row norm).
  double phase1_objective = 0.0;
  int iterations = 0;

  bool feasible() const noexcept { return status == FeasibilityStatus::feasible; }
};

struct SimplexOptions {
  double pivot_tolerance = 1e-10;
  double optimality_tolerance = 1e-11;
  /// Phase-1 optimum at or below this counts as feasible.
  double feasibility_tolerance = 1e-9;
  /// Residual allowed when reconstructing P from the weights.
  double reconstruction_tolerance = 1e-9;
  /// Consecutive degenerate pivots before switching to Bland's rule.
  int degenerate_streak = 50;
  int max_iterations = 100'000;
};

inline constexpr double kCertificateMargin = 1e-9;

/// sum_ij C_ij s_i t_j.
inline double strategy_value(const Eigen::MatrixXd& c, const SignStrategy& st) {
  double v = 0.0;
  for (Eigen::Index i = 0; i < c.rows(); ++i) {
    for (Eigen::Index j = 0; j < c.cols(); ++j) v += c(i, j) * st.s[static_cast<std::size_t>(i)] * st.t[static_cast<std::size_t>(j)];
  }
  return v;
}

namespace detail {

inline std::vector<int> signs_from_bits(std::uint64_t bits, std::size_t k) {
  std::vector<int> out(k);
  for (std::size_t i = 0; i < k; ++i) out[i] = (bits >> i) & 1u ? -1 : 1;
  return out;
}

struct BestStrategy {
  SignStrategy strategy;
  double value = -std::numeric_limits<double>::infinity();
};

// max over strategies of sum_ij C_ij s_i t_j. Enumerates the smaller side with
// its first sign pinned to +1; the other side takes t_j = sign(sum_i C_ij s_i).
inline BestStrategy best_response(const Eigen::MatrixXd& c) {
  const bool transpose = c.rows() > c.cols();
  const Eigen::MatrixXd cc = transpose ? Eigen::MatrixXd(c.transpose()) : c;
  const auto m = static_cast<std::size_t>(cc.rows());
  const auto n = static_cast<std::size_t>(cc.cols());
  BestStrategy best;
  Eigen::VectorXd s(static_cast<Eigen::Index>(m));
  for (std::uint64_t bits = 0; bits < (std::uint64_t{1} << (m - 1)); ++bits) {
    for (std::size_t i = 0; i < m; ++i) s(static_cast<Eigen::Index>(i)) = i > 0 && ((bits >> (i - 1)) & 1u) ? -1.0 : 1.0;
    const Eigen::VectorXd v = cc.transpose() * s;
    const double value = v.cwiseAbs().sum();
    if (value > best.value) {
      best.value = value;
      best.strategy.s.assign(m, 1);
      best.strategy.t.assign(n, 1);
      for (std::size_t i = 0; i < m; ++i) best.strategy.s[i] = s(static_cast<Eigen::Index>(i)) > 0 ? 1 : -1;
      for (std::size_t j = 0; j < n; ++j) best.strategy.t[j] = v(static_cast<Eigen::Index>(j)) < 0 ? -1 : 1;
    }
  }
  if (transpose) std::swap(best.strategy.s, best.strategy.t);
  return best;
}

/*!
 * Phase-1 revised simplex for { w >= 0 : A w = b } where the columns of A are
 * the strategy vectors (s_i t_j)_ij stacked over a trailing 1.
 *
 * Rows with negative right-hand side are negated so that the all-artificial
 * basis starts primal feasible. The basis matrix is refactored with partial
 * pivoting LU at every iteration; instances are small.
 */
class PolytopeSimplex {
 public:
  PolytopeSimplex(const Eigen::MatrixXd& p, const SimplexOptions& opts)
      : p_(p), opts_(opts), m_(static_cast<std::size_t>(p.rows())), n_(static_cast<std::size_t>(p.cols())),
        rows_(m_ * n_ + 1), sign_(static_cast<Eigen::Index>(rows_)), rhs_(static_cast<Eigen::Index>(rows_)) {
    for (std::size_t i = 0; i < m_; ++i) {
      for (std::size_t j = 0; j < n_; ++j) {
        const double v = p(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        const auto r = static_cast<Eigen::Index>(row(i, j));
        sign_(r) = v < 0.0 ? -1.0 : 1.0;
        rhs_(r) = std::abs(v);
      }
    }
    sign_(last()) = 1.0;
    rhs_(last()) = 1.0;
    for (std::size_t r = 0; r < rows_; ++r) basis_.push_back(Column::artificial(r));
  }

  FeasibilityResult solve() {
    FeasibilityResult result;
    int degenerate = 0;
    Eigen::VectorXd x, y;
    for (int iter = 0;; ++iter) {
      if (iter >= opts_.max_iterations) throw NumericalError("local_polytope_membership: simplex iteration limit");
      const Eigen::MatrixXd b = basis_matrix();
      const Eigen::PartialPivLU<Eigen::MatrixXd> lu(b);
      x = lu.solve(rhs_);
      for (Eigen::Index r = 0; r < x.size(); ++r) {
        if (x(r) < 0.0 && x(r) > -1e-12) x(r) = 0.0;
      }
      Eigen::VectorXd cost(static_cast<Eigen::Index>(rows_));
      for (std::size_t r = 0; r < rows_; ++r) cost(static_cast<Eigen::Index>(r)) = basis_[r].is_artificial ? 1.0 : 0.0;
      y = lu.transpose().solve(cost);

      const bool bland = degenerate >= opts_.degenerate_streak;
      const std::optional<Column> entering = bland ? price_bland(y) : price_dantzig(y);
      if (!entering) {
        result.iterations = iter;
        break;
      }
      const Eigen::VectorXd u = lu.solve(column_vector(*entering));
      std::optional<std::size_t> leave;
      double theta = std::numeric_limits<double>::infinity();
      for (std::size_t r = 0; r < rows_; ++r) {
        const double ur = u(static_cast<Eigen::Index>(r));
        if (ur <= opts_.pivot_tolerance) continue;
        const double ratio = std::max(0.0, x(static_cast<Eigen::Index>(r))) / ur;
        const bool tie = leave && std::abs(ratio - theta) <= 1e-14;
        if (tie ? basis_[r].key() < basis_[*leave].key() : ratio < theta) {
          theta = std::min(theta, ratio);
          leave = r;
        }
      }
      if (!leave) throw NumericalError("local_polytope_membership: unbounded phase-1 direction (corrupted basis)");
      degenerate = theta <= 1e-14 ? degenerate + 1 : 0;
      basis_[*leave] = *entering;
    }

    double objective = 0.0;
    for (std::size_t r = 0; r < rows_; ++r) {
      if (basis_[r].is_artificial) objective += std::max(0.0, x(static_cast<Eigen::Index>(r)));
    }
    result.phase1_objective = objective;

    if (objective <= opts_.feasibility_tolerance) {
      result.status = FeasibilityStatus::feasible;
      collect_weights(x, result);
      return result;
    }
    result.status = FeasibilityStatus::infeasible;
    result.certificate = certificate_from_dual(y);
    return result;
  }

 private:
  struct Column {
    bool is_artificial = false;
    std::size_t artificial_row = 0;
    std::uint64_t s_bits = 0;  // bit i set means s_i = -1; s_0 is always +1
    std::uint64_t t_bits = 0;

    static Column artificial(std::size_t r) { return {true, r, 0, 0}; }
    static Column strategy(std::uint64_t s, std::uint64_t t) { return {false, 0, s, t}; }

    // Ordering used by Bland's rule and ratio-test ties.
    std::uint64_t key() const noexcept {
      return is_artificial ? artificial_row : (std::uint64_t{1} << 50) | (t_bits << 24) | s_bits;
    }
  };

  std::size_t row(std::size_t i, std::size_t j) const noexcept { return i * n_ + j; }
  Eigen::Index last() const noexcept { return static_cast<Eigen::Index>(rows_ - 1); }

  Eigen::VectorXd column_vector(const Column& c) const {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(rows_));
    if (c.is_artificial) {
      v(static_cast<Eigen::Index>(c.artificial_row)) = 1.0;
      return v;
    }
    for (std::size_t i = 0; i < m_; ++i) {
      const double si = (c.s_bits >> i) & 1u ? -1.0 : 1.0;
      for (std::size_t j = 0; j < n_; ++j) {
        const double tj = (c.t_bits >> j) & 1u ? -1.0 : 1.0;
        const auto r = static_cast<Eigen::Index>(row(i, j));
        v(r) = sign_(r) * si * tj;
      }
    }
    v(last()) = 1.0;
    return v;
  }

  Eigen::MatrixXd basis_matrix() const {
    Eigen::MatrixXd b(static_cast<Eigen::Index>(rows_), static_cast<Eigen::Index>(rows_));
    for (std::size_t r = 0; r < rows_; ++r) b.col(static_cast<Eigen::Index>(r)) = column_vector(basis_[r]);
    return b;
  }

  // y restricted to the correlation rows, in original (unflipped) orientation.
  Eigen::MatrixXd dual_matrix(const Eigen::VectorXd& y) const {
    Eigen::MatrixXd c(static_cast<Eigen::Index>(m_), static_cast<Eigen::Index>(n_));
    for (std::size_t i = 0; i < m_; ++i) {
      for (std::size_t j = 0; j < n_; ++j) {
        const auto r = static_cast<Eigen::Index>(row(i, j));
        c(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = y(r) * sign_(r);
      }
    }
    return c;
  }

  static std::uint64_t bits_from_signs(const std::vector<int>& v) {
    std::uint64_t bits = 0;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (v[i] < 0) bits |= std::uint64_t{1} << i;
    }
    return bits;
  }

  // Canonical representative of {(s, t), (-s, -t)} with s_0 = +1.
  static Column canonical(const SignStrategy& st) {
    std::uint64_t s = bits_from_signs(st.s);
    std::uint64_t t = bits_from_signs(st.t);
    if (s & 1u) {
      s = ~s & ((std::uint64_t{1} << st.s.size()) - 1);
      t = ~t & ((std::uint64_t{1} << st.t.size()) - 1);
    }
    return Column::strategy(s, t);
  }

  bool in_basis(const Column& c) const {
    return std::any_of(basis_.begin(), basis_.end(), [&](const Column& b) { return b.key() == c.key(); });
  }

  // Most negative reduced cost. Strategy columns have cost 0 so their reduced
  // cost is -(y_C . st + y_norm); artificial r has 1 - y_r.
  std::optional<Column> price_dantzig(const Eigen::VectorXd& y) const {
    std::optional<Column> best;
    double best_d = -opts_.optimality_tolerance;
    const BestStrategy br = best_response(dual_matrix(y));
    const double d_strategy = -(br.value + y(last()));
    if (d_strategy < best_d) {
      const Column c = canonical(br.strategy);
      // A basic column has zero reduced cost; seeing it here means drift.
      if (in_basis(c)) return price_bland(y);
      best = c;
      best_d = d_strategy;
    }
    for (std::size_t r = 0; r < rows_; ++r) {
      const double d = 1.0 - y(static_cast<Eigen::Index>(r));
      if (d < best_d && !in_basis(Column::artificial(r))) {
        best = Column::artificial(r);
        best_d = d;
      }
    }
    return best;
  }

  // First improving column in key order.
  std::optional<Column> price_bland(const Eigen::VectorXd& y) const {
    for (std::size_t r = 0; r < rows_; ++r) {
      if (1.0 - y(static_cast<Eigen::Index>(r)) < -opts_.optimality_tolerance && !in_basis(Column::artificial(r))) {
        return Column::artificial(r);
      }
    }
    const Eigen::MatrixXd c = dual_matrix(y);
    for (std::uint64_t t = 0; t < (std::uint64_t{1} << n_); ++t) {
      for (std::uint64_t s = 0; s < (std::uint64_t{1} << m_); s += 2) {
        const SignStrategy st{signs_from_bits(s, m_), signs_from_bits(t, n_)};
        if (-(strategy_value(c, st) + y(last())) < -opts_.optimality_tolerance) {
          const Column col = Column::strategy(s, t);
          if (!in_basis(col)) return col;
        }
      }
    }
    return std::nullopt;
  }

  void collect_weights(const Eigen::VectorXd& x, FeasibilityResult& result) const {
    double total = 0.0;
    for (std::size_t r = 0; r < rows_; ++r) {
      const double w = x(static_cast<Eigen::Index>(r));
      if (basis_[r].is_artificial || w <= 0.0) continue;
      result.weights.push_back(
          {SignStrategy{signs_from_bits(basis_[r].s_bits, m_), signs_from_bits(basis_[r].t_bits, n_)}, w});
      total += w;
    }
    // Rounding leaves sum w within ~1e-15 of one; renormalize before checking.
    if (total > 0.0) {
      for (auto& ws : result.weights) ws.weight /= total;
    }
    std::sort(result.weights.begin(), result.weights.end(), [](const auto& a, const auto& b) {
      return a.strategy.s != b.strategy.s ? a.strategy.s > b.strategy.s : a.strategy.t > b.strategy.t;
    });
    double residual = std::abs(total - 1.0);
    for (std::size_t i = 0; i < m_; ++i) {
      for (std::size_t j = 0; j < n_; ++j) {
        double v = 0.0;
        for (const auto& ws : result.weights) v += ws.weight * ws.strategy.s[i] * ws.strategy.t[j];
        residual = std::max(residual, std::abs(v - p_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))));
      }
    }
    if (!(residual <= opts_.reconstruction_tolerance)) {
      throw NumericalError("local_polytope_membership: feasible basis reconstructs P only to residual " +
                           std::to_string(residual));
    }
  }

  BellCertificate certificate_from_dual(const Eigen::VectorXd& y) const {
    Eigen::MatrixXd c = dual_matrix(y);
    const double scale = c.cwiseAbs().maxCoeff();
    if (!(scale > 0.0)) throw NumericalError("local_polytope_membership: degenerate dual certificate");
    c /= scale;
    // Snap entries that are equal up to rounding so printed certificates are clean.
    for (Eigen::Index k = 0; k < c.size(); ++k) {
      double& v = c.data()[k];
      const double r = std::round(v * 1e9) / 1e9;
      if (std::abs(v - r) < 1e-12) v = r;
    }
    BellCertificate cert{c, best_response(c).value};
    const double margin = (c.array() * p_.array()).sum() - cert.bound;
    if (!(margin > kCertificateMargin)) {
      throw NumericalError("local_polytope_membership: phase-1 optimum is positive but the dual certificate "
                           "separates only by " + std::to_string(margin));
    }
    return cert;
  }

  const Eigen::MatrixXd& p_;
  SimplexOptions opts_;
  std::size_t m_, n_, rows_;
  Eigen::VectorXd sign_;
  Eigen::VectorXd rhs_;
  std::vector<Column> basis_;
};

}  // namespace detail

/// Decides whether the target lies in the local correlation polytope.
inline FeasibilityResult local_polytope_membership(const CorrelationTarget& target, const SimplexOptions& opts = {}) {
  detail::PolytopeSimplex lp(target.matrix(), opts);
  return lp.solve();
}

/// sum_ij C_ij P_ij minus the strategy maximum, found by exhaustive
/// enumeration of all 2^{m+n} sign pairs.
inline double certificate_margin(const BellCertificate& cert, const CorrelationTarget& target) {
  const Eigen::MatrixXd& c = cert.coefficients;
  require(c.rows() == static_cast<Eigen::Index>(target.rows()) && c.cols() == static_cast<Eigen::Index>(target.cols()),
          "verify_certificate: certificate shape does not match target");
  const std::size_t m = target.rows();
  const std::size_t n = target.cols();
  double best = -std::numeric_limits<double>::infinity();
  for (std::uint64_t s = 0; s < (std::uint64_t{1} << m); ++s) {
    for (std::uint64_t t = 0; t < (std::uint64_t{1} << n); ++t) {
      double v = 0.0;
      for (std::size_t i = 0; i < m; ++i) {
        const int si = (s >> i) & 1u ? -1 : 1;
        for (std::size_t j = 0; j < n; ++j) {
          const int tj = (t >> j) & 1u ? -1 : 1;
          v += c(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * si * tj;
        }
      }
      best = std::max(best, v);
    }
  }
  return (c.array() * target.matrix().array()).sum() - best;
}

/// True iff the certificate separates the target from every local strategy
/// by more than 1e-9.
inline bool verify_certificate(const BellCertificate& cert, const CorrelationTarget& target) {
  return certificate_margin(cert, target) > kCertificateMargin;
}

/// Largest g in [0, 1] (to within tol) with g * P in the local polytope.
/// Bisection; the returned value is the largest g that tested feasible.
/// A zero target is feasible at every scale and yields 1.
inline double max_feasible_scale(const CorrelationTarget& target, double tol, const SimplexOptions& opts = {}) {
  require(tol > 0.0, "max_feasible_scale: tol must be positive");
  if (local_polytope_membership(target, opts).feasible()) return 1.0;
  double lo = 0.0;
  double hi = 1.0;
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    if (local_polytope_membership(target.scaled(mid), opts).feasible()) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return lo;
}

}  // namespace stbell
