#pragma once

// JSON mapping for configs, targets and reports. Parsing is strict: unknown
// keys and wrong types raise DomainError.

#include <json.hpp>

#include <algorithm>
#include <initializer_list>
#include <string>
#include <string_view>

#include "../feasibility.hpp"
#include "../lhv.hpp"
#include "../qkd.hpp"
#include "../spatial.hpp"
#include "../spin_core.hpp"

namespace stbell::io {

using json = nlohmann::json;

inline void check_keys(const json& j, std::initializer_list<std::string_view> allowed, std::string_view where) {
  require(j.is_object(), std::string(where) + ": expected a JSON object");
  for (const auto& [key, _] : j.items()) {
    require(std::find(allowed.begin(), allowed.end(), key) != allowed.end(),
            std::string(where) + ": unknown key '" + key + "'");
  }
}

template <class T>
T get_as(const json& j, std::string_view key, std::string_view where) {
  try {
    return j.at(std::string(key)).get<T>();
  } catch (const json::exception& e) {
    throw DomainError(std::string(where) + ": bad or missing '" + std::string(key) + "': " + e.what());
  }
}

template <class T>
T get_or(const json& j, std::string_view key, T fallback, std::string_view where) {
  return j.contains(std::string(key)) ? get_as<T>(j, key, where) : fallback;
}

inline Vec3 vec3_from(const json& j, std::string_view where) {
  require(j.is_array() && j.size() == 3, std::string(where) + ": expected an array of 3 numbers");
  Vec3 v{};
  for (std::size_t i = 0; i < 3; ++i) {
    require(j[i].is_number(), std::string(where) + ": expected numbers");
    v[i] = j[i].get<double>();
  }
  return v;
}

inline std::vector<PlanarAngle> angles_from(const json& j, std::string_view where) {
  require(j.is_array(), std::string(where) + ": expected an array of angles");
  std::vector<PlanarAngle> out;
  for (const auto& a : j) {
    require(a.is_number(), std::string(where) + ": angles must be numbers");
    out.emplace_back(a.get<double>());
  }
  return out;
}

inline json angles_to(const std::vector<PlanarAngle>& v) {
  json out = json::array();
  for (const auto& a : v) out.push_back(a.radians());
  return out;
}

inline json matrix_to(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Eigen::MatrixXd matrix_from(const json& j, std::string_view where) {
  require(j.is_array() && !j.empty(), std::string(where) + ": matrix must be a nonempty array of rows");
  const std::size_t cols = j[0].is_array() ? j[0].size() : 0;
  require(cols > 0, std::string(where) + ": matrix rows must be nonempty arrays");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < j.size(); ++i) {
    require(j[i].is_array() && j[i].size() == cols, std::string(where) + ": ragged matrix");
    for (std::size_t k = 0; k < cols; ++k) {
      require(j[i][k].is_number(), std::string(where) + ": matrix entries must be numbers");
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = j[i][k].get<double>();
    }
  }
  return m;
}

// ---- spatial ----------------------------------------------------------------

inline json to_json(const BoxRegion& r) { return {{"lo", r.lo()}, {"hi", r.hi()}}; }

inline BoxRegion box_from_json(const json& j) {
  check_keys(j, {"lo", "hi"}, "region");
  return BoxRegion(vec3_from(j.at("lo"), "region.lo"), vec3_from(j.at("hi"), "region.hi"));
}

/// {"m", "l", "mass", "hbar", "region_a", "region_b"}; regions default to
/// the cubes of paper_gaussian_setup.
inline GaussianSetup setup_from_json(const json& j) {
  check_keys(j, {"m", "l", "mass", "hbar", "region_a", "region_b"}, "setup");
  const double m = get_or(j, "m", 1.0, "setup");
  const Vec3 l = j.contains("l") ? vec3_from(j.at("l"), "setup.l") : Vec3{100.0, 0.0, 0.0};
  GaussianSetup s = paper_gaussian_setup(m, l, get_or(j, "mass", 1.0, "setup"), get_or(j, "hbar", 1.0, "setup"));
  if (j.contains("region_a")) s.region_a = box_from_json(j.at("region_a"));
  if (j.contains("region_b")) s.region_b = box_from_json(j.at("region_b"));
  return s;
}

// ---- feasibility --------------------------------------------------------------

inline json to_json(const CorrelationTarget& t) {
  return {{"alphas", angles_to(t.alphas())}, {"betas", angles_to(t.betas())}, {"matrix", matrix_to(t.matrix())}};
}

/// Angles are optional; without them the target is a bare matrix.
inline CorrelationTarget target_from_json(const json& j) {
  check_keys(j, {"alphas", "betas", "matrix"}, "target");
  require(j.contains("matrix"), "target: missing 'matrix'");
  Eigen::MatrixXd p = matrix_from(j.at("matrix"), "target.matrix");
  if (!j.contains("alphas") && !j.contains("betas")) return CorrelationTarget::from_matrix(std::move(p));
  require(j.contains("alphas") && j.contains("betas"), "target: give both 'alphas' and 'betas' or neither");
  return CorrelationTarget(angles_from(j.at("alphas"), "target.alphas"), angles_from(j.at("betas"), "target.betas"),
                           std::move(p));
}

inline json to_json(const BellCertificate& c) { return {{"coefficients", matrix_to(c.coefficients)}, {"bound", c.bound}}; }

inline BellCertificate certificate_from_json(const json& j) {
  check_keys(j, {"coefficients", "bound"}, "certificate");
  return {matrix_from(j.at("coefficients"), "certificate.coefficients"), get_as<double>(j, "bound", "certificate")};
}

inline json to_json(const FeasibilityResult& r) {
  json out{{"status", r.feasible() ? "Feasible" : "Infeasible"},
           {"phase1_objective", r.phase1_objective},
           {"iterations", r.iterations}};
  json w = json::array();
  for (const auto& ws : r.weights) w.push_back({{"s", ws.strategy.s}, {"t", ws.strategy.t}, {"weight", ws.weight}});
  out["weights"] = std::move(w);
  out["certificate"] = r.certificate ? to_json(*r.certificate) : json(nullptr);
  return out;
}

inline FeasibilityResult feasibility_result_from_json(const json& j) {
  check_keys(j, {"status", "phase1_objective", "iterations", "weights", "certificate"}, "feasibility result");
  FeasibilityResult r;
  const auto status = get_as<std::string>(j, "status", "feasibility result");
  require(status == "Feasible" || status == "Infeasible", "feasibility result: bad status '" + status + "'");
  r.status = status == "Feasible" ? FeasibilityStatus::feasible : FeasibilityStatus::infeasible;
  r.phase1_objective = get_as<double>(j, "phase1_objective", "feasibility result");
  r.iterations = get_as<int>(j, "iterations", "feasibility result");
  for (const auto& w : j.at("weights")) {
    check_keys(w, {"s", "t", "weight"}, "weight");
    r.weights.push_back({{get_as<std::vector<int>>(w, "s", "weight"), get_as<std::vector<int>>(w, "t", "weight")},
                         get_as<double>(w, "weight", "weight")});
  }
  if (!j.at("certificate").is_null()) r.certificate = certificate_from_json(j.at("certificate"));
  return r;
}

// ---- lhv ------------------------------------------------------------------------

/// Only the cosine family is expressible in a config: {"type": "cosine", "g"}.
inline HiddenVariableModel model_from_json(const json& j) {
  check_keys(j, {"type", "g"}, "model");
  const auto type = get_or<std::string>(j, "type", "cosine", "model");
  require(type == "cosine", "model: unsupported type '" + type + "'");
  return cosine_model(get_as<double>(j, "g", "model"));
}

// ---- qkd --------------------------------------------------------------------------

/// {"type": "quantum", "g"} | {"type": "quantum", "setup", "t"} |
/// {"type": "lhv", "model"}.
inline ChannelModel channel_from_json(const json& j) {
  check_keys(j, {"type", "g", "setup", "t", "model"}, "channel");
  const auto type = get_as<std::string>(j, "type", "channel");
  if (type == "quantum") {
    require(!j.contains("model"), "channel: 'model' is only valid for type lhv");
    if (j.contains("setup")) {
      require(!j.contains("g"), "channel: give either 'g' or 'setup', not both");
      return QuantumLocalizedChannel::from_setup(setup_from_json(j.at("setup")), get_or(j, "t", 0.0, "channel"));
    }
    require(!j.contains("t"), "channel: 't' requires 'setup'");
    return QuantumLocalizedChannel{get_as<double>(j, "g", "channel")};
  }
  require(type == "lhv", "channel: type must be 'quantum' or 'lhv', got '" + type + "'");
  require(!j.contains("g") && !j.contains("setup") && !j.contains("t"), "channel: lhv takes only 'model'");
  return LhvEveChannel{model_from_json(j.at("model"))};
}

inline QkdConfig qkd_config_from_json(const json& j) {
  check_keys(j, {"n_rounds", "alice_angles", "bob_angles", "chsh_pairs", "alarm_sigma", "channel", "seed"}, "qkd");
  QkdConfig c;
  c.n_rounds = get_or<std::uint64_t>(j, "n_rounds", c.n_rounds, "qkd");
  auto three = [&](const char* key, std::array<PlanarAngle, 3>& dst) {
    if (!j.contains(key)) return;
    const auto v = angles_from(j.at(key), std::string("qkd.") + key);
    require(v.size() == 3, std::string("qkd.") + key + ": need exactly 3 angles");
    std::copy(v.begin(), v.end(), dst.begin());
  };
  three("alice_angles", c.alice_angles);
  three("bob_angles", c.bob_angles);
  if (j.contains("chsh_pairs")) {
    const json& p = j.at("chsh_pairs");
    require(p.is_array() && p.size() == 4, "qkd.chsh_pairs: need exactly 4 pairs");
    for (std::size_t k = 0; k < 4; ++k) {
      check_keys(p[k], {"alice", "bob", "sign"}, "qkd.chsh_pairs");
      c.chsh_pairs[k] = {get_as<std::size_t>(p[k], "alice", "qkd.chsh_pairs"),
                         get_as<std::size_t>(p[k], "bob", "qkd.chsh_pairs"), get_or(p[k], "sign", 1, "qkd.chsh_pairs")};
    }
  }
  c.alarm_sigma = get_or(j, "alarm_sigma", c.alarm_sigma, "qkd");
  if (j.contains("channel")) c.channel = channel_from_json(j.at("channel"));
  c.seed = get_or<std::uint64_t>(j, "seed", c.seed, "qkd");
  c.validate();
  return c;
}

inline json to_json(const ChshSummary& s) {
  return {{"value", s.value}, {"std_error", s.std_error}, {"correlations", s.correlations}};
}

inline ChshSummary chsh_summary_from_json(const json& j) {
  check_keys(j, {"value", "std_error", "correlations"}, "chsh");
  return {get_as<double>(j, "value", "chsh"), get_as<double>(j, "std_error", "chsh"),
          get_as<std::array<double, 4>>(j, "correlations", "chsh")};
}

inline Verdict verdict_from_string(const std::string& s) {
  for (Verdict v : {Verdict::secure, Verdict::eve_detected, Verdict::inconclusive}) {
    if (to_string(v) == s) return v;
  }
  throw DomainError("unknown verdict '" + s + "'");
}

inline json to_json(const QkdSessionReport& r) {
  json pairs = json::array();
  for (std::size_t a = 0; a < 3; ++a) {
    for (std::size_t b = 0; b < 3; ++b) {
      const PairStats& p = r.pairs[a][b];
      pairs.push_back(
          {{"a_idx", a}, {"b_idx", b}, {"rounds", p.rounds}, {"detected", p.detected}, {"product_sum", p.product_sum}});
    }
  }
  return {{"sifted_key_alice", r.sifted_key_alice},
          {"sifted_key_bob", r.sifted_key_bob},
          {"qber", r.qber},
          {"qber_std_error", r.qber_std_error},
          {"chsh_conditioned", to_json(r.chsh_conditioned)},
          {"chsh_unconditioned", to_json(r.chsh_unconditioned)},
          {"verdict", to_string(r.verdict)},
          {"coincidence_rate", r.coincidence_rate},
          {"n_rounds", r.n_rounds},
          {"n_detected", r.n_detected},
          {"n_key_rounds", r.n_key_rounds},
          {"n_test_rounds", r.n_test_rounds},
          {"n_discarded", r.n_discarded},
          {"min_test_rounds_per_pair", r.min_test_rounds_per_pair},
          {"pairs", std::move(pairs)}};
}

inline QkdSessionReport qkd_report_from_json(const json& j) {
  constexpr std::string_view w = "qkd report";
  check_keys(j,
             {"sifted_key_alice", "sifted_key_bob", "qber", "qber_std_error", "chsh_conditioned", "chsh_unconditioned",
              "verdict", "coincidence_rate", "n_rounds", "n_detected", "n_key_rounds", "n_test_rounds", "n_discarded",
              "min_test_rounds_per_pair", "pairs"},
             w);
  QkdSessionReport r;
  r.sifted_key_alice = get_as<std::string>(j, "sifted_key_alice", w);
  r.sifted_key_bob = get_as<std::string>(j, "sifted_key_bob", w);
  r.qber = get_as<double>(j, "qber", w);
  r.qber_std_error = get_as<double>(j, "qber_std_error", w);
  r.chsh_conditioned = chsh_summary_from_json(j.at("chsh_conditioned"));
  r.chsh_unconditioned = chsh_summary_from_json(j.at("chsh_unconditioned"));
  r.verdict = verdict_from_string(get_as<std::string>(j, "verdict", w));
  r.coincidence_rate = get_as<double>(j, "coincidence_rate", w);
  r.n_rounds = get_as<std::uint64_t>(j, "n_rounds", w);
  r.n_detected = get_as<std::uint64_t>(j, "n_detected", w);
  r.n_key_rounds = get_as<std::uint64_t>(j, "n_key_rounds", w);
  r.n_test_rounds = get_as<std::uint64_t>(j, "n_test_rounds", w);
  r.n_discarded = get_as<std::uint64_t>(j, "n_discarded", w);
  r.min_test_rounds_per_pair = get_as<std::uint64_t>(j, "min_test_rounds_per_pair", w);
  for (const auto& p : j.at("pairs")) {
    check_keys(p, {"a_idx", "b_idx", "rounds", "detected", "product_sum"}, "qkd report pair");
    const auto a = get_as<std::size_t>(p, "a_idx", w), b = get_as<std::size_t>(p, "b_idx", w);
    require(a < 3 && b < 3, "qkd report: pair index out of range");
    r.pairs[a][b] = {get_as<std::uint64_t>(p, "rounds", w), get_as<std::uint64_t>(p, "detected", w),
                     get_as<std::int64_t>(p, "product_sum", w)};
  }
  return r;
}

}  // namespace stbell::io
