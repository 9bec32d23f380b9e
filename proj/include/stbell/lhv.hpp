#pragma once

// Local hidden-variable models on the circle Lambda = [0, 2*pi) with uniform
// measure, response functions xi(alpha, lambda) and eta(beta, lambda) bounded
// by 1, and the cosine construction that solves g cos(a - b) = E xi_a eta_b
// for 0 <= g <= 1/2.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <utility>

#include "errors.hpp"
#include "parallel.hpp"
#include "random.hpp"
#include "spin_core.hpp"

namespace stbell {

using ResponseFunction = std::function<double(PlanarAngle, double lambda)>;

struct CorrelationEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::uint64_t n_samples = 1;
};

/// Immutable LHV model. Copies share the response functions.
class HiddenVariableModel {
 public:
  static constexpr std::uint64_t kBoundChecks = 100'000;
  static constexpr double kBoundSlack = 1e-12;

  /// Checks |xi|, |eta| <= 1 on kBoundChecks random (angle, lambda) draws
  /// from a fixed internal seed; throws DomainError on the first violation.
  HiddenVariableModel(ResponseFunction xi, ResponseFunction eta, std::string name = "custom")
      : impl_(std::make_shared<const Impl>(Impl{std::move(xi), std::move(eta), std::move(name)})) {
    require(static_cast<bool>(impl_->xi) && static_cast<bool>(impl_->eta), "HiddenVariableModel: empty response");
    RandomSource rng(split_seed(kDefaultSeed, 0x6c6876));
    for (std::uint64_t k = 0; k < kBoundChecks; ++k) {
      const PlanarAngle angle(rng.uniform_angle());
      const double lambda = sample_lambda(rng);
      const double x = impl_->xi(angle, lambda);
      const double y = impl_->eta(angle, lambda);
      if (!(std::abs(x) <= 1.0 + kBoundSlack) || !(std::abs(y) <= 1.0 + kBoundSlack)) {
        throw DomainError("HiddenVariableModel '" + impl_->name + "': response outside [-1, 1] at angle " +
                          std::to_string(angle.radians()) + ", lambda " + std::to_string(lambda));
      }
    }
  }

  double xi(PlanarAngle alpha, double lambda) const { return impl_->xi(alpha, lambda); }
  double eta(PlanarAngle beta, double lambda) const { return impl_->eta(beta, lambda); }
  const std::string& name() const noexcept { return impl_->name; }

  /// lambda ~ Uniform[0, 2*pi).
  static double sample_lambda(RandomSource& rng) { return rng.uniform_angle(); }

 private:
  struct Impl {
    ResponseFunction xi;
    ResponseFunction eta;
    std::string name;
  };
  std::shared_ptr<const Impl> impl_;
};

inline constexpr double kMaxCosineModelG = 0.5;

/// xi_a(l) = sqrt(2g) cos(a - l), eta_b(l) = sqrt(2g) cos(b - l).
inline HiddenVariableModel cosine_model(double g) {
  require(g >= 0.0 && g <= kMaxCosineModelG,
          "cosine_model: g must lie in [0, 1/2]; for g > 1/sqrt(2) no bounded model exists");
  const double amp = std::sqrt(2.0 * g);
  auto response = [amp](PlanarAngle a, double lambda) { return amp * std::cos(a.radians() - lambda); };
  return HiddenVariableModel(response, response, "cosine(g=" + std::to_string(g) + ")");
}

inline constexpr std::size_t kExactNodes = 4096;

/// E xi_a eta_b by the periodic trapezoidal rule (exact for trigonometric
/// polynomials of degree < nodes).
inline double model_expectation_exact(const HiddenVariableModel& model, PlanarAngle alpha, PlanarAngle beta,
                                      std::size_t nodes = kExactNodes) {
  require(nodes >= 1, "model_expectation_exact: need at least one node");
  double acc = 0.0;
  const double h = kTwoPi / static_cast<double>(nodes);
  for (std::size_t k = 0; k < nodes; ++k) {
    const double lambda = h * static_cast<double>(k);
    acc += model.xi(alpha, lambda) * model.eta(beta, lambda);
  }
  return acc / static_cast<double>(nodes);
}

inline constexpr std::uint64_t kMcShardSize = 1u << 16;

/// Sample mean and standard error of xi_a(l) eta_b(l) over n draws of l.
/// Draws are split into fixed-size shards with sub-seeded sources and
/// reduced in shard order.
inline CorrelationEstimate model_expectation_mc(const HiddenVariableModel& model, PlanarAngle alpha,
                                                PlanarAngle beta, std::uint64_t n, RandomSource& rng,
                                                unsigned workers = 0) {
  require(n >= 100, "model_expectation_mc: n must be at least 100");
  const RandomSource base(rng.next_u64());
  const auto sizes = shard_sizes(n, kMcShardSize);
  struct Moments {
    double sum = 0.0;
    double sum_sq = 0.0;
  };
  const auto partial = run_shards(
      sizes.size(),
      [&](std::size_t s) {
        RandomSource local = base.split(s);
        Moments m;
        for (std::uint64_t k = 0; k < sizes[s]; ++k) {
          const double lambda = HiddenVariableModel::sample_lambda(local);
          const double v = model.xi(alpha, lambda) * model.eta(beta, lambda);
          m.sum += v;
          m.sum_sq += v * v;
        }
        return m;
      },
      workers);
  Moments total;
  for (const auto& m : partial) {
    total.sum += m.sum;
    total.sum_sq += m.sum_sq;
  }
  const double nd = static_cast<double>(n);
  const double mean = total.sum / nd;
  const double var = std::max(0.0, (total.sum_sq - nd * mean * mean) / (nd - 1.0));
  return {mean, std::sqrt(var / nd), n};
}

/// Outcome signs at a given lambda: s_a = +1 w.p. (1 + xi)/2 and s_b = +1
/// w.p. (1 + eta)/2, independently.
inline OutcomePair sample_model_signs(const HiddenVariableModel& model, PlanarAngle alpha, PlanarAngle beta,
                                      double lambda, RandomSource& rng) {
  const double x = std::clamp(model.xi(alpha, lambda), -1.0, 1.0);
  const double y = std::clamp(model.eta(beta, lambda), -1.0, 1.0);
  const int s_a = rng.uniform() < 0.5 * (1.0 + x) ? 1 : -1;
  const int s_b = rng.uniform() < 0.5 * (1.0 + y) ? 1 : -1;
  return OutcomePair(s_a, s_b);
}

enum class ExpectationMode { exact, monte_carlo };

struct ChshEstimate {
  double value = 0.0;
  double std_error = 0.0;
};

inline constexpr double kExactChshSlack = 1e-9;
inline constexpr double kMcChshSigmas = 3.0;

/// CHSH statistic of the model's four expectations. Throws NumericalError if
/// the value exceeds 2 beyond 1e-9 (exact) or 3 combined standard errors (mc),
/// which only happens for a model whose responses escape [-1, 1].
inline ChshEstimate model_chsh(const HiddenVariableModel& model, const ChshSettings& s, ExpectationMode mode,
                               RandomSource* rng = nullptr, std::uint64_t n = 100'000) {
  const std::array<std::pair<PlanarAngle, PlanarAngle>, 4> pairs{
      {{s.alpha1, s.beta1}, {s.alpha1, s.beta2}, {s.alpha2, s.beta1}, {s.alpha2, s.beta2}}};
  std::array<double, 4> p{};
  ChshEstimate est;
  if (mode == ExpectationMode::exact) {
    for (std::size_t i = 0; i < 4; ++i) p[i] = model_expectation_exact(model, pairs[i].first, pairs[i].second);
  } else {
    require(rng != nullptr, "model_chsh: Monte Carlo mode needs a random source");
    double var = 0.0;
    for (std::size_t i = 0; i < 4; ++i) {
      const auto e = model_expectation_mc(model, pairs[i].first, pairs[i].second, n, *rng);
      p[i] = e.mean;
      var += e.std_error * e.std_error;
    }
    est.std_error = std::sqrt(var);
  }
  est.value = chsh_statistic(p[0], p[1], p[2], p[3]);
  const double slack = mode == ExpectationMode::exact ? kExactChshSlack : kMcChshSigmas * est.std_error;
  if (est.value > kLocalBound + slack) {
    throw NumericalError("model_chsh: model '" + model.name() + "' violates the local bound (S = " +
                         std::to_string(est.value) + ")");
  }
  return est;
}

}  // namespace stbell
