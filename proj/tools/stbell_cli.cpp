// stbell: command-line front end.
//
//   stbell <command> [--config FILE] [--seed N] [--format csv|json] [--out FILE]
//                    [--set key=value ...]
//
// Exit status: 0 ok, 2 config error, 3 numerical failure, 4 inconclusive QKD
// verdict. Log verbosity is read from STBELL_LOG (trace .. off, default warn).

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "stbell/io/json.hpp"
#include "stbell/stbell.hpp"

namespace {

using stbell::io::json;

enum ExitCode { kOk = 0, kFailure = 1, kConfigError = 2, kNumericalError = 3, kInconclusive = 4 };

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::string command;
  json parameters = json::object();
  std::string format = "csv";
  std::string out;
  std::uint64_t seed = stbell::kDefaultSeed;
};

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

/// Comma-separated rows with a header line.
class Csv {
 public:
  explicit Csv(std::vector<std::string> header) { row(header); }

  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) os_ << (i ? "," : "") << cells[i];
    os_ << '\n';
  }
  void kv(const std::string& key, const std::string& value) { row({key, value}); }
  void kv(const std::string& key, double value) { row({key, num(value)}); }
  std::string str() const { return os_.str(); }

 private:
  std::ostringstream os_;
};

struct Output {
  json doc;
  std::string csv;
  int exit_code = kOk;
};

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("'" + path + "': " + e.what());
  }
}

/// key=value with dotted keys addressing nested objects; the value is read as
/// JSON when it parses, otherwise as a string.
void apply_set(json& params, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects key=value, got '" + assignment + "'");
  const std::string key = assignment.substr(0, eq), raw = assignment.substr(eq + 1);
  json value = json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;
  json* node = &params;
  std::size_t start = 0;
  for (std::size_t dot; (dot = key.find('.', start)) != std::string::npos; start = dot + 1) {
    node = &(*node)[key.substr(start, dot - start)];
    if (!node->is_object()) *node = json::object();
  }
  (*node)[key.substr(start)] = std::move(value);
}

double param(const json& p, const char* key, double fallback) { return stbell::io::get_or(p, key, fallback, "parameters"); }

std::vector<double> param_list(const json& p, const char* key, std::vector<double> fallback) {
  return stbell::io::get_or(p, key, std::move(fallback), "parameters");
}

// ---- commands ------------------------------------------------------------------------

Output cmd_chsh(const RunConfig& rc) {
  const json& p = rc.parameters;
  stbell::io::check_keys(p, {"alpha1", "alpha2", "beta1", "beta2", "g", "g_grid"}, "chsh");
  const auto c = stbell::ChshSettings::canonical();
  const stbell::ChshSettings s{stbell::PlanarAngle(param(p, "alpha1", c.alpha1.radians())),
                               stbell::PlanarAngle(param(p, "alpha2", c.alpha2.radians())),
                               stbell::PlanarAngle(param(p, "beta1", c.beta1.radians())),
                               stbell::PlanarAngle(param(p, "beta2", c.beta2.radians()))};
  Output out;
  if (p.contains("g_grid")) {
    Csv csv({"g", "S"});
    json rows = json::array();
    for (double g : param_list(p, "g_grid", {})) {
      const double v = stbell::quantum_chsh(s, g);
      csv.row({num(g), num(v)});
      rows.push_back({{"g", g}, {"S", v}});
    }
    out.csv = csv.str();
    out.doc = {{"command", "chsh"}, {"rows", rows}};
    return out;
  }
  const double g = param(p, "g", 1.0);
  const auto e = stbell::quantum_correlations(s, g);
  const double value = stbell::quantum_chsh(s, g);
  Csv csv({"quantity", "value"});
  csv.kv("alpha1", s.alpha1.radians());
  csv.kv("alpha2", s.alpha2.radians());
  csv.kv("beta1", s.beta1.radians());
  csv.kv("beta2", s.beta2.radians());
  csv.kv("g", g);
  const char* names[] = {"p11", "p12", "p21", "p22"};
  json corr;
  for (int k = 0; k < 4; ++k) {
    csv.kv(names[k], e[k]);
    corr[names[k]] = e[k];
  }
  csv.kv("S", value);
  out.csv = csv.str();
  out.doc = {{"command", "chsh"},
             {"settings",
              {{"alpha1", s.alpha1.radians()},
               {"alpha2", s.alpha2.radians()},
               {"beta1", s.beta1.radians()},
               {"beta2", s.beta2.radians()}}},
             {"g", g},
             {"correlations", corr},
             {"S", value}};
  return out;
}

Output cmd_gfactor(const RunConfig& rc) {
  json p = rc.parameters;
  stbell::io::check_keys(p, {"m", "l", "mass", "hbar", "region_a", "region_b", "t", "t_grid", "quadrature", "tol", "orders"},
                         "gfactor");
  json setup_json = json::object();
  for (const char* k : {"m", "l", "mass", "hbar", "region_a", "region_b"}) {
    if (p.contains(k)) setup_json[k] = p[k];
  }
  const auto setup = stbell::io::setup_from_json(setup_json);
  Output out;
  if (p.contains("t_grid")) {
    const auto curve = stbell::g_decay_curve(setup, param_list(p, "t_grid", {}));
    Csv csv({"t", "g", "regime"});
    json rows = json::array();
    for (const auto& [t, g] : curve) {
      const auto regime = stbell::to_string(stbell::classify_regime(g));
      csv.row({num(t), num(g), std::string(regime)});
      rows.push_back({{"t", t}, {"g", g}, {"regime", regime}});
    }
    out.csv = csv.str();
    out.doc = {{"command", "gfactor"}, {"rows", rows}};
    return out;
  }
  const double t = param(p, "t", 0.0);
  const double g = setup.g(t).value();
  const auto regime = stbell::classify_regime(g);
  Csv csv({"quantity", "value"});
  csv.kv("t", t);
  csv.kv("g", g);
  out.doc = {{"command", "gfactor"}, {"t", t}, {"g", g}};
  if (stbell::io::get_or(p, "quadrature", false, "gfactor")) {
    stbell::QuadratureOptions opts;
    opts.orders = stbell::io::get_or(p, "orders", opts.orders, "gfactor");
    const auto q = stbell::integrate_over_regions(stbell::product_density(setup.packet_a, setup.packet_b, t),
                                                  setup.region_a, setup.region_b, param(p, "tol", 1e-9), opts);
    csv.kv("g_quadrature", q.value);
    csv.kv("quadrature_error_estimate", q.error_estimate);
    out.doc["g_quadrature"] = q.value;
    out.doc["quadrature_error_estimate"] = q.error_estimate;
  }
  csv.kv("regime", std::string(stbell::to_string(regime)));
  csv.kv("description", std::string(stbell::describe(regime)));
  out.doc["regime"] = stbell::to_string(regime);
  out.doc["description"] = stbell::describe(regime);
  out.csv = csv.str();
  return out;
}

Output cmd_packet(const RunConfig& rc) {
  const json& p = rc.parameters;
  stbell::io::check_keys(p, {"m", "mass", "hbar", "t_grid"}, "packet");
  const double m = param(p, "m", 1.0), mass = param(p, "mass", 1.0), hbar = param(p, "hbar", 1.0);
  stbell::require(m > 0.0, "packet: m must be positive");
  const double eps = 1.0 / m;
  const auto grid = param_list(p, "t_grid", {0, 1, 10, 100, 1e3, 1e4, 1e5, 1e6});
  Csv csv({"t", "width", "asymptotic_ratio"});
  json rows = json::array();
  for (double t : grid) {
    const double w = stbell::expanded_width(eps, mass, t, hbar);
    json row{{"t", t}, {"width", w}, {"asymptotic_ratio", nullptr}};
    std::string ratio_cell;
    if (t > 0.0) {
      const double ratio = w / (hbar * t / (mass * eps));
      row["asymptotic_ratio"] = ratio;
      ratio_cell = num(ratio);
    }
    csv.row({num(t), num(w), ratio_cell});
    rows.push_back(std::move(row));
  }
  return {{{"command", "packet"}, {"epsilon", eps}, {"rows", rows}}, csv.str(), kOk};
}

Output cmd_lhv(const RunConfig& rc) {
  const json& p = rc.parameters;
  stbell::io::check_keys(p, {"g", "alpha", "beta", "n"}, "lhv");
  const double g = param(p, "g", 0.5);
  const stbell::PlanarAngle a(param(p, "alpha", 0.0)), b(param(p, "beta", std::numbers::pi / 3));
  const auto n = stbell::io::get_or<std::uint64_t>(p, "n", 1'000'000, "lhv");
  const auto model = stbell::cosine_model(g);
  stbell::RandomSource rng(rc.seed);
  const double exact = stbell::model_expectation_exact(model, a, b);
  const auto mc = stbell::model_expectation_mc(model, a, b, n, rng);
  const double analytic = g * std::cos(a.radians() - b.radians());
  const double chsh = stbell::model_chsh(model, stbell::ChshSettings::canonical(), stbell::ExpectationMode::exact).value;
  spdlog::info("lhv: exact {} mc {} +- {}", exact, mc.mean, mc.std_error);
  Csv csv({"quantity", "value"});
  csv.kv("g", g);
  csv.kv("alpha", a.radians());
  csv.kv("beta", b.radians());
  csv.kv("analytic", analytic);
  csv.kv("exact", exact);
  csv.kv("mc_mean", mc.mean);
  csv.kv("mc_std_error", mc.std_error);
  csv.kv("mc_samples", static_cast<double>(mc.n_samples));
  csv.kv("chsh_canonical_exact", chsh);
  return {{{"command", "lhv"},
           {"g", g},
           {"alpha", a.radians()},
           {"beta", b.radians()},
           {"analytic", analytic},
           {"exact", exact},
           {"monte_carlo", {{"mean", mc.mean}, {"std_error", mc.std_error}, {"n_samples", mc.n_samples}}},
           {"chsh_canonical_exact", chsh}},
          csv.str(),
          kOk};
}

std::string signs(const std::vector<int>& v) {
  std::string s;
  for (int x : v) s.push_back(x > 0 ? '+' : '-');
  return s;
}

Output cmd_feasibility(const RunConfig& rc) {
  const json& p = rc.parameters;
  stbell::io::check_keys(p, {"target", "canonical_g", "scale", "max_scale", "tol"}, "feasibility");
  stbell::require(p.contains("target") != p.contains("canonical_g"),
                  "feasibility: give exactly one of 'target' or 'canonical_g'");
  auto target = p.contains("target") ? stbell::io::target_from_json(p.at("target"))
                                     : stbell::CorrelationTarget::canonical_chsh(param(p, "canonical_g", 1.0));
  if (p.contains("scale")) target = target.scaled(param(p, "scale", 1.0));
  const auto result = stbell::local_polytope_membership(target);
  spdlog::info("feasibility: {} after {} iterations", result.feasible() ? "feasible" : "infeasible", result.iterations);

  Output out;
  out.doc = {{"command", "feasibility"}, {"target", stbell::io::to_json(target)}, {"result", stbell::io::to_json(result)}};
  Csv csv({"quantity", "value"});
  csv.kv("status", result.feasible() ? "Feasible" : "Infeasible");
  csv.kv("phase1_objective", result.phase1_objective);
  if (result.certificate) {
    const bool ok = stbell::verify_certificate(*result.certificate, target);
    const double margin = stbell::certificate_margin(*result.certificate, target);
    out.doc["certificate_verified"] = ok;
    out.doc["certificate_margin"] = margin;
    csv.kv("certificate_verified", ok ? "true" : "false");
    csv.kv("certificate_margin", margin);
    csv.kv("bound", result.certificate->bound);
  }
  std::optional<double> g_star;
  if (stbell::io::get_or(p, "max_scale", false, "feasibility")) {
    g_star = stbell::max_feasible_scale(target, param(p, "tol", 1e-6));
    out.doc["max_feasible_scale"] = *g_star;
    csv.kv("max_feasible_scale", *g_star);
  }
  std::string text = csv.str();
  if (result.feasible()) {
    Csv w({"weight", "s", "t"});
    for (const auto& ws : result.weights) w.row({num(ws.weight), signs(ws.strategy.s), signs(ws.strategy.t)});
    text += "\n" + w.str();
  } else {
    Csv c({"i", "j", "coefficient"});
    const auto& m = result.certificate->coefficients;
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) c.row({std::to_string(i), std::to_string(j), num(m(i, j))});
    text += "\n" + c.str();
  }
  out.csv = text;
  return out;
}

Output cmd_qkd(const RunConfig& rc) {
  json p = rc.parameters;
  std::string round_log;
  if (p.contains("round_log")) {
    round_log = stbell::io::get_as<std::string>(p, "round_log", "qkd");
    p.erase("round_log");
  }
  p["seed"] = rc.seed;
  const auto config = stbell::io::qkd_config_from_json(p);
  std::vector<stbell::RoundRecord> log;
  const auto rep = stbell::run_session(config, round_log.empty() ? nullptr : &log);
  spdlog::info("qkd: {} rounds, {} detected, verdict {}", rep.n_rounds, rep.n_detected, stbell::to_string(rep.verdict));

  if (!round_log.empty()) {
    std::ofstream f(round_log);
    if (!f) throw ConfigError("cannot write round log '" + round_log + "'");
    f << "round,a_idx,b_idx,detected,s_a,s_b\n";
    for (std::size_t k = 0; k < log.size(); ++k) {
      const auto& r = log[k];
      f << k << ',' << int(r.alice_setting) << ',' << int(r.bob_setting) << ',' << (r.detected() ? 1 : 0) << ',';
      if (r.detected()) f << r.outcomes->a() << ',' << r.outcomes->b();
      else f << ',';
      f << '\n';
    }
  }

  Csv csv({"quantity", "value"});
  csv.kv("n_rounds", static_cast<double>(rep.n_rounds));
  csv.kv("n_detected", static_cast<double>(rep.n_detected));
  csv.kv("coincidence_rate", rep.coincidence_rate);
  csv.kv("n_key_rounds", static_cast<double>(rep.n_key_rounds));
  csv.kv("n_test_rounds", static_cast<double>(rep.n_test_rounds));
  csv.kv("n_discarded", static_cast<double>(rep.n_discarded));
  csv.kv("min_test_rounds_per_pair", static_cast<double>(rep.min_test_rounds_per_pair));
  csv.kv("qber", rep.qber);
  csv.kv("qber_std_error", rep.qber_std_error);
  csv.kv("chsh_conditioned", rep.chsh_conditioned.value);
  csv.kv("chsh_conditioned_std_error", rep.chsh_conditioned.std_error);
  csv.kv("chsh_unconditioned", rep.chsh_unconditioned.value);
  csv.kv("chsh_unconditioned_std_error", rep.chsh_unconditioned.std_error);
  csv.kv("verdict", std::string(stbell::to_string(rep.verdict)));
  return {stbell::io::to_json(rep), csv.str(), rep.verdict == stbell::Verdict::inconclusive ? kInconclusive : kOk};
}

Output cmd_thresholds(const RunConfig& rc) {
  const json& p = rc.parameters;
  stbell::io::check_keys(p, {"g_values"}, "thresholds");
  std::vector<double> grid;
  for (int k = 0; k <= 20; ++k) grid.push_back(k / 20.0);
  grid = param_list(p, "g_values", grid);
  const auto rows = stbell::detectability_threshold_report(grid);
  Csv csv({"g", "regime", "max_unconditioned_chsh", "canonical_lp_feasible"});
  json doc_rows = json::array();
  for (const auto& r : rows) {
    const bool feasible = stbell::local_polytope_membership(stbell::CorrelationTarget::canonical_chsh(r.g)).feasible();
    csv.row({num(r.g), std::string(stbell::to_string(r.regime)), num(r.max_unconditioned_chsh), feasible ? "true" : "false"});
    doc_rows.push_back({{"g", r.g},
                        {"regime", stbell::to_string(r.regime)},
                        {"description", stbell::describe(r.regime)},
                        {"max_unconditioned_chsh", r.max_unconditioned_chsh},
                        {"canonical_lp_feasible", feasible}});
  }
  return {{{"command", "thresholds"}, {"rows", doc_rows}}, csv.str(), kOk};
}

const std::map<std::string, Output (*)(const RunConfig&)>& commands() {
  static const std::map<std::string, Output (*)(const RunConfig&)> table{
      {"chsh", cmd_chsh}, {"gfactor", cmd_gfactor},         {"packet", cmd_packet},        {"lhv", cmd_lhv},
      {"feasibility", cmd_feasibility}, {"qkd", cmd_qkd}, {"thresholds", cmd_thresholds}};
  return table;
}

/// Merges the config file (if any) with command-line overrides.
RunConfig build_run_config(const std::string& command, const std::string& config_path,
                           const std::optional<std::uint64_t>& seed, const std::optional<std::string>& format,
                           const std::optional<std::string>& out_path, const std::vector<std::string>& sets) {
  RunConfig rc;
  rc.command = command;
  if (!config_path.empty()) {
    const json file = read_json_file(config_path);
    try {
      stbell::io::check_keys(file, {"command", "parameters", "format", "out", "seed"}, "config");
      if (file.contains("command") && file.at("command").get<std::string>() != command) {
        throw ConfigError("config is for command '" + file.at("command").get<std::string>() + "', not '" + command + "'");
      }
      if (file.contains("parameters")) rc.parameters = file.at("parameters");
      rc.format = stbell::io::get_or(file, "format", rc.format, "config");
      rc.out = stbell::io::get_or(file, "out", rc.out, "config");
      rc.seed = stbell::io::get_or(file, "seed", rc.seed, "config");
    } catch (const json::exception& e) {
      throw ConfigError(std::string("config: ") + e.what());
    }
  }
  if (!rc.parameters.is_object()) throw ConfigError("config: 'parameters' must be an object");
  for (const auto& s : sets) apply_set(rc.parameters, s);
  if (seed) rc.seed = *seed;
  if (format) rc.format = *format;
  if (out_path) rc.out = *out_path;
  if (rc.format != "csv" && rc.format != "json") throw ConfigError("format must be csv or json");
  return rc;
}

int emit(const RunConfig& rc, const Output& out) {
  const std::string text = rc.format == "json" ? out.doc.dump(2) + "\n" : out.csv;
  if (rc.out.empty()) {
    std::cout << text << std::flush;
  } else {
    std::ofstream f(rc.out, std::ios::binary);
    if (!f) throw ConfigError("cannot write '" + rc.out + "'");
    f << text;
  }
  return out.exit_code;
}

void setup_logging() {
  auto logger = spdlog::stderr_logger_st("stbell");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  const char* env = std::getenv("STBELL_LOG");
  spdlog::set_level(env ? spdlog::level::from_str(env) : spdlog::level::warn);
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"Spin correlations, localization factors, LHV models, local-polytope LP and QKD simulation"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> format, out_path;
  std::vector<std::string> sets;

  for (const auto& [name, _] : commands()) {
    auto* sub = app.add_subcommand(name, "Run the " + name + " command");
    sub->add_option("--config", config_path, "JSON run config")->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "RNG seed (default " + std::to_string(stbell::kDefaultSeed) + ")");
    sub->add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
    sub->add_option("--out", out_path, "output file (default stdout)");
    sub->add_option("--set", sets, "parameter override key=value (repeatable)");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    const RunConfig rc = build_run_config(command, config_path, seed, format, out_path, sets);
    spdlog::debug("{}: seed {} format {} parameters {}", rc.command, rc.seed, rc.format, rc.parameters.dump());
    return emit(rc, commands().at(command)(rc));
  } catch (const ConfigError& e) {
    spdlog::error("{}", e.what());
    return kConfigError;
  } catch (const stbell::DomainError& e) {
    spdlog::error("{}", e.what());
    return kConfigError;
  } catch (const json::exception& e) {
    spdlog::error("{}", e.what());
    return kConfigError;
  } catch (const stbell::NumericalError& e) {
    spdlog::error("{}", e.what());
    return kNumericalError;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kFailure;
  }
}
