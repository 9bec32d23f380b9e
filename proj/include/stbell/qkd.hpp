#pragma once

// Two-particle (E91-style) key distribution with localized detectors.
//
// Each round Alice and Bob pick one of three planar angles uniformly. The
// channel either delivers a singlet pair that is caught in O_A x O_B with
// probability g, or is replaced by an eavesdropper modelled as a local hidden
// variable. Afterwards rounds are sifted into key rounds (equal angles), CHSH
// test rounds and discarded rounds.
//
// Outcome convention: both wings measure sigma . u(theta), u = (cos, 0, sin),
// so a singlet gives raw E[s_a s_b] = -cos(alpha - beta). Reported
// correlations use Bob's relabeled outcome -s_b, i.e. the effective direction
// b = -u(beta), and therefore read cos(alpha - beta) (times g when
// unconditioned). Key bits are Alice's outcome and Bob's flipped outcome.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <type_traits>
#include <variant>
#include <vector>

#include "errors.hpp"
#include "lhv.hpp"
#include "parallel.hpp"
#include "random.hpp"
#include "spatial.hpp"
#include "spin_core.hpp"

namespace stbell {

struct QuantumLocalizedChannel {
  double g = 1.0;

  /// g taken from a spatial setup at time t.
  static QuantumLocalizedChannel from_setup(const GaussianSetup& setup, double t) { return {setup.g(t).value()}; }
};

struct LhvEveChannel {
  HiddenVariableModel model;
};

using ChannelModel = std::variant<QuantumLocalizedChannel, LhvEveChannel>;

/// One CHSH correlation: Alice setting index, Bob setting index and the sign
/// applied to the measured correlation (-1 realizes beta + pi).
struct ChshPair {
  std::size_t alice = 0;
  std::size_t bob = 0;
  int sign = 1;
  friend bool operator==(const ChshPair&, const ChshPair&) = default;
};

inline constexpr std::uint64_t kMinQkdRounds = 1000;
inline constexpr std::uint64_t kMinTestRoundsPerPair = 50;
inline constexpr double kDefaultAlarmSigma = 3.0;

struct QkdConfig {
  std::uint64_t n_rounds = 100'000;
  std::array<PlanarAngle, 3> alice_angles{PlanarAngle(0.0), PlanarAngle(std::numbers::pi / 4),
                                          PlanarAngle(std::numbers::pi / 2)};
  std::array<PlanarAngle, 3> bob_angles{PlanarAngle(std::numbers::pi / 4), PlanarAngle(std::numbers::pi / 2),
                                        PlanarAngle(3 * std::numbers::pi / 4)};
  // p11 = (pi/2, pi/4), p12 = (pi/2, -pi/4), p21 = (0, pi/4), p22 = (0, -pi/4);
  // -pi/4 is Bob's 3pi/4 setting with the correlation sign flipped.
  std::array<ChshPair, 4> chsh_pairs{ChshPair{2, 0, 1}, ChshPair{2, 2, -1}, ChshPair{0, 0, 1}, ChshPair{0, 2, -1}};
  double alarm_sigma = kDefaultAlarmSigma;
  ChannelModel channel = QuantumLocalizedChannel{1.0};
  std::uint64_t seed = kDefaultSeed;

  static bool same_angle(PlanarAngle a, PlanarAngle b) {
    const double d = std::abs(a.radians() - b.radians());
    return d < 1e-12 || std::abs(d - kTwoPi) < 1e-12;
  }

  bool is_key_pair(std::size_t a, std::size_t b) const { return same_angle(alice_angles[a], bob_angles[b]); }

  /// Index into chsh_pairs, if (a, b) is a test pair.
  std::optional<std::size_t> test_pair_index(std::size_t a, std::size_t b) const {
    for (std::size_t k = 0; k < chsh_pairs.size(); ++k) {
      if (chsh_pairs[k].alice == a && chsh_pairs[k].bob == b) return k;
    }
    return std::nullopt;
  }

  void validate() const {
    require(n_rounds >= kMinQkdRounds, "QkdConfig: n_rounds must be at least 1000");
    require(alarm_sigma > 0.0 && std::isfinite(alarm_sigma), "QkdConfig: alarm_sigma must be positive");
    for (std::size_t k = 0; k < chsh_pairs.size(); ++k) {
      const auto& p = chsh_pairs[k];
      require(p.alice < 3 && p.bob < 3, "QkdConfig: chsh_pairs index out of range");
      require(p.sign == 1 || p.sign == -1, "QkdConfig: chsh_pairs sign must be +-1");
      require(!is_key_pair(p.alice, p.bob), "QkdConfig: a CHSH test pair may not use equal angles");
      for (std::size_t l = 0; l < k; ++l) {
        require(chsh_pairs[l].alice != p.alice || chsh_pairs[l].bob != p.bob, "QkdConfig: duplicate CHSH pair");
      }
    }
    if (const auto* q = std::get_if<QuantumLocalizedChannel>(&channel)) {
      require(q->g >= 0.0 && q->g <= 1.0, "QkdConfig: channel g must lie in [0, 1]");
    }
  }
};

/// Detection outcome of one round: empty when no coincidence in O_A x O_B.
using Detection = std::optional<OutcomePair>;

struct RoundRecord {
  std::uint8_t alice_setting = 0;
  std::uint8_t bob_setting = 0;
  Detection outcomes;

  bool detected() const noexcept { return outcomes.has_value(); }
};

/// Coincidence with probability g; a detected pair carries full singlet
/// statistics for the physical directions a, b.
inline Detection channel_round_quantum(double g, const UnitVector3& a, const UnitVector3& b, RandomSource& rng) {
  require(g >= 0.0 && g <= 1.0, "channel_round_quantum: g must lie in [0, 1]");
  if (!rng.bernoulli(g)) return std::nullopt;
  return sample_singlet_outcomes(a, b, rng);
}

/// Eve as hidden variable: always detected; Alice gets the model sign for
/// alpha and Bob the negated model sign for beta, mimicking a singlet.
inline Detection channel_round_lhv(const HiddenVariableModel& model, PlanarAngle alpha, PlanarAngle beta,
                                   RandomSource& rng) {
  const double lambda = HiddenVariableModel::sample_lambda(rng);
  const OutcomePair s = sample_model_signs(model, alpha, beta, lambda, rng);
  return OutcomePair(s.a(), -s.b());
}

enum class Verdict { secure, eve_detected, inconclusive };

inline std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::secure: return "Secure";
    case Verdict::eve_detected: return "EveDetected";
    case Verdict::inconclusive: return "Inconclusive";
  }
  return "Inconclusive";
}

/// Secure if S - k se > 2; EveDetected if the whole band S +- k se lies below
/// the local bound 2; Inconclusive when the band straddles 2.
inline Verdict decide_verdict(double s, double std_error, double k) {
  require(std_error >= 0.0, "decide_verdict: std_error must be nonnegative");
  if (s - k * std_error > kLocalBound) return Verdict::secure;
  if (s + k * std_error < kLocalBound) return Verdict::eve_detected;
  return Verdict::inconclusive;
}

struct ChshSummary {
  double value = 0.0;
  double std_error = 0.0;
  /// Signed correlations p11, p12, p21, p22.
  std::array<double, 4> correlations{};

  friend bool operator==(const ChshSummary&, const ChshSummary&) = default;
};

struct PairStats {
  std::uint64_t rounds = 0;
  std::uint64_t detected = 0;
  /// Sum of s_a * (-s_b) over detected rounds.
  std::int64_t product_sum = 0;

  double conditioned() const { return detected ? static_cast<double>(product_sum) / static_cast<double>(detected) : 0.0; }
  double unconditioned() const { return rounds ? static_cast<double>(product_sum) / static_cast<double>(rounds) : 0.0; }

  friend bool operator==(const PairStats&, const PairStats&) = default;
};

struct QkdSessionReport {
  std::string sifted_key_alice;
  std::string sifted_key_bob;
  double qber = 0.0;
  double qber_std_error = 0.0;
  ChshSummary chsh_conditioned;
  ChshSummary chsh_unconditioned;
  Verdict verdict = Verdict::inconclusive;
  double coincidence_rate = 0.0;
  std::uint64_t n_rounds = 0;
  std::uint64_t n_detected = 0;
  std::uint64_t n_key_rounds = 0;
  std::uint64_t n_test_rounds = 0;
  std::uint64_t n_discarded = 0;
  std::uint64_t min_test_rounds_per_pair = 0;
  std::array<std::array<PairStats, 3>, 3> pairs{};

  friend bool operator==(const QkdSessionReport&, const QkdSessionReport&) = default;
};

inline constexpr std::uint64_t kQkdShardSize = 1u << 14;

/// Generates every round. Shard s uses RandomSource(split_seed(seed, s)), so
/// the sequence does not depend on the worker count.
inline std::vector<RoundRecord> generate_rounds(const QkdConfig& config, unsigned workers = 0) {
  config.validate();
  std::array<UnitVector3, 3> alice_dirs{unit_from_planar_angle(config.alice_angles[0]),
                                        unit_from_planar_angle(config.alice_angles[1]),
                                        unit_from_planar_angle(config.alice_angles[2])};
  std::array<UnitVector3, 3> bob_dirs{unit_from_planar_angle(config.bob_angles[0]),
                                      unit_from_planar_angle(config.bob_angles[1]),
                                      unit_from_planar_angle(config.bob_angles[2])};
  const auto sizes = shard_sizes(config.n_rounds, kQkdShardSize);
  const auto shards = run_shards(
      sizes.size(),
      [&](std::size_t s) {
        RandomSource rng(split_seed(config.seed, s));
        std::vector<RoundRecord> out;
        out.reserve(sizes[s]);
        for (std::uint64_t k = 0; k < sizes[s]; ++k) {
          RoundRecord rec;
          rec.alice_setting = static_cast<std::uint8_t>(rng.index(3));
          rec.bob_setting = static_cast<std::uint8_t>(rng.index(3));
          rec.outcomes = std::visit(
              [&](const auto& ch) -> Detection {
                using T = std::decay_t<decltype(ch)>;
                if constexpr (std::is_same_v<T, QuantumLocalizedChannel>) {
                  return channel_round_quantum(ch.g, alice_dirs[rec.alice_setting], bob_dirs[rec.bob_setting], rng);
                } else {
                  return channel_round_lhv(ch.model, config.alice_angles[rec.alice_setting],
                                           config.bob_angles[rec.bob_setting], rng);
                }
              },
              config.channel);
          out.push_back(rec);
        }
        return out;
      },
      workers);
  std::vector<RoundRecord> rounds;
  rounds.reserve(config.n_rounds);
  for (const auto& s : shards) rounds.insert(rounds.end(), s.begin(), s.end());
  return rounds;
}

namespace detail {

inline ChshSummary chsh_from_pairs(const QkdConfig& config, const std::array<std::array<PairStats, 3>, 3>& pairs,
                                   bool conditioned) {
  ChshSummary out;
  double var = 0.0;
  for (std::size_t k = 0; k < 4; ++k) {
    const auto& cp = config.chsh_pairs[k];
    const PairStats& ps = pairs[cp.alice][cp.bob];
    const double e = conditioned ? ps.conditioned() : ps.unconditioned();
    out.correlations[k] = cp.sign * e;
    if (conditioned) {
      if (ps.detected > 0) var += std::max(0.0, 1.0 - e * e) / static_cast<double>(ps.detected);
    } else if (ps.rounds > 0) {
      // X in {-1, 0, 1}: E X^2 is the detection fraction.
      const double ex2 = static_cast<double>(ps.detected) / static_cast<double>(ps.rounds);
      var += std::max(0.0, ex2 - e * e) / static_cast<double>(ps.rounds);
    }
  }
  out.value = chsh_statistic(out.correlations[0], out.correlations[1], out.correlations[2], out.correlations[3]);
  out.std_error = std::sqrt(var);
  return out;
}

}  // namespace detail

/// Sifts rounds and evaluates the CHSH audit.
inline QkdSessionReport analyze_session(const QkdConfig& config, const std::vector<RoundRecord>& rounds) {
  QkdSessionReport rep;
  rep.n_rounds = rounds.size();
  std::uint64_t errors = 0;
  for (const RoundRecord& r : rounds) {
    PairStats& ps = rep.pairs[r.alice_setting][r.bob_setting];
    ++ps.rounds;
    if (!r.detected()) continue;
    ++ps.detected;
    ++rep.n_detected;
    const int sa = r.outcomes->a();
    const int sb_relabeled = -r.outcomes->b();
    ps.product_sum += sa * sb_relabeled;
    if (config.is_key_pair(r.alice_setting, r.bob_setting)) {
      ++rep.n_key_rounds;
      rep.sifted_key_alice.push_back(sa > 0 ? '1' : '0');
      rep.sifted_key_bob.push_back(sb_relabeled > 0 ? '1' : '0');
      if (sa != sb_relabeled) ++errors;
    } else if (config.test_pair_index(r.alice_setting, r.bob_setting)) {
      ++rep.n_test_rounds;
    } else {
      ++rep.n_discarded;
    }
  }
  rep.coincidence_rate = rep.n_rounds ? static_cast<double>(rep.n_detected) / static_cast<double>(rep.n_rounds) : 0.0;
  if (rep.n_key_rounds > 0) {
    const double n = static_cast<double>(rep.n_key_rounds);
    rep.qber = static_cast<double>(errors) / n;
    rep.qber_std_error = std::sqrt(rep.qber * (1.0 - rep.qber) / n);
  }
  rep.chsh_conditioned = detail::chsh_from_pairs(config, rep.pairs, true);
  rep.chsh_unconditioned = detail::chsh_from_pairs(config, rep.pairs, false);
  rep.min_test_rounds_per_pair = UINT64_MAX;
  for (const auto& cp : config.chsh_pairs) {
    rep.min_test_rounds_per_pair = std::min(rep.min_test_rounds_per_pair, rep.pairs[cp.alice][cp.bob].detected);
  }
  rep.verdict = rep.min_test_rounds_per_pair < kMinTestRoundsPerPair
                    ? Verdict::inconclusive
                    : decide_verdict(rep.chsh_conditioned.value, rep.chsh_conditioned.std_error, config.alarm_sigma);
  return rep;
}

/// Full protocol run. When `log` is given it receives every round.
inline QkdSessionReport run_session(const QkdConfig& config, std::vector<RoundRecord>* log = nullptr,
                                    unsigned workers = 0) {
  std::vector<RoundRecord> rounds = generate_rounds(config, workers);
  QkdSessionReport rep = analyze_session(config, rounds);
  if (log) *log = std::move(rounds);
  return rep;
}

enum class Regime { undetectable, open_gap, violation_possible };

inline std::string_view to_string(Regime r) {
  switch (r) {
    case Regime::undetectable: return "undetectable";
    case Regime::open_gap: return "open_gap";
    case Regime::violation_possible: return "violation_possible";
  }
  return "open_gap";
}

inline std::string_view describe(Regime r) {
  switch (r) {
    case Regime::undetectable:
      return "LHV-reproducible (Eve undetectable by CHSH on unconditioned correlations)";
    case Regime::open_gap: return "open gap between 1/2 and 1/sqrt(2): no model and no violation known";
    case Regime::violation_possible: return "violation possible";
  }
  return "";
}

/// g <= 1/2: a cosine LHV model exists; g > 1/sqrt 2: CHSH can exceed 2.
inline Regime classify_regime(double g) {
  require(g >= 0.0 && g <= 1.0, "classify_regime: g must lie in [0, 1]");
  if (g <= 0.5) return Regime::undetectable;
  if (g > 1.0 / std::numbers::sqrt2) return Regime::violation_possible;
  return Regime::open_gap;
}

struct ThresholdRow {
  double g = 0.0;
  Regime regime = Regime::undetectable;
  /// 2 sqrt 2 g, the largest unconditioned CHSH value.
  double max_unconditioned_chsh = 0.0;
};

inline std::vector<ThresholdRow> detectability_threshold_report(const std::vector<double>& g_values) {
  std::vector<ThresholdRow> rows;
  rows.reserve(g_values.size());
  for (double g : g_values) rows.push_back({g, classify_regime(g), kTsirelson * g});
  return rows;
}

}  // namespace stbell
