#pragma once

// Run configuration (JSON) and the five commands behind the `rankdist`
// executable. Commands write their files into the output directory and
// return a process exit code.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "rankdist/calibration.hpp"
#include "rankdist/error.hpp"
#include "rankdist/io.hpp"
#include "rankdist/model.hpp"
#include "rankdist/scenario.hpp"
#include "rankdist/simulator.hpp"
#include "rankdist/stable_solver.hpp"

namespace rankdist::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

/// US top wealth shares for 2012 over standard_brackets(); the default
/// calibration target.
inline GroupedShares us_2012_shares() {
  return make_grouped_shares(standard_brackets(), {0.111, 0.108, 0.124, 0.072, 0.357, 0.228});
}

struct RunConfig {
  std::size_t n = 1000000;
  SigmaVariant sigma_variant = SigmaVariant::Low;
  std::array<double, 2> breakpoints_pct{0.01, 10.0};
  std::optional<fs::path> data;
  std::optional<fs::path> volatility;
  /// Preset id or a trend CSV.
  std::variant<int, fs::path> scenario = 1;
  std::optional<fs::path> tax;
  std::vector<Bracket> reporting_brackets = standard_brackets();
  std::optional<SimConfig> simulation;
  fs::path output_dir = "out";
};

namespace detail {

inline void check_keys(const json& j, std::string_view where, std::initializer_list<std::string_view> allowed) {
  for (const auto& [key, value] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw Error(ErrorCode::BadConfig, std::string(where) + ": unknown key '" + key + "'");
    }
  }
}

inline SigmaVariant parse_sigma(std::string_view s) {
  if (s == "low") return SigmaVariant::Low;
  if (s == "high") return SigmaVariant::High;
  throw Error(ErrorCode::BadConfig, "sigma variant must be 'low' or 'high', got '" + std::string(s) + "'");
}

inline fs::path existing_file(const fs::path& base, const std::string& rel, std::string_view key) {
  const fs::path p = fs::path(rel).is_absolute() ? fs::path(rel) : base / rel;
  if (!fs::is_regular_file(p)) {
    throw Error(ErrorCode::BadConfig, std::string(key) + ": file " + p.string() + " does not exist");
  }
  return p;
}

inline std::vector<Bracket> parse_brackets(const json& j) {
  std::vector<Bracket> out;
  for (const auto& b : j) {
    if (!b.is_array() || b.size() != 2) throw Error(ErrorCode::BadConfig, "reporting_brackets: expected [lo_pct, hi_pct] pairs");
    out.push_back({b[0].get<double>(), b[1].get<double>()});
  }
  for (const auto& b : out) rankdist::detail::check_bracket_shape(b);
  return out;
}

}  // namespace detail

/// Relative paths in the config are resolved against `base_dir`.
inline RunConfig parse_run_config(const json& j, const fs::path& base_dir) {
  if (!j.is_object()) throw Error(ErrorCode::BadConfig, "config must be a JSON object");
  detail::check_keys(j, "config", {"n", "sigma_variant", "breakpoints", "data", "volatility", "scenario", "tax",
                                   "reporting_brackets", "simulation", "output_dir"});
  RunConfig c;
  try {
    if (j.contains("n")) c.n = j.at("n").get<std::size_t>();
    if (j.contains("sigma_variant")) c.sigma_variant = detail::parse_sigma(j.at("sigma_variant").get<std::string>());
    if (j.contains("breakpoints")) c.breakpoints_pct = j.at("breakpoints").get<std::array<double, 2>>();
    if (j.contains("data")) c.data = detail::existing_file(base_dir, j.at("data").get<std::string>(), "data");
    if (j.contains("volatility")) {
      c.volatility = detail::existing_file(base_dir, j.at("volatility").get<std::string>(), "volatility");
    }
    if (j.contains("scenario")) {
      const auto& s = j.at("scenario");
      if (s.is_number_integer()) {
        c.scenario = s.get<int>();
        (void)preset_scenario(s.get<int>());
      } else {
        c.scenario = detail::existing_file(base_dir, s.get<std::string>(), "scenario");
      }
    }
    if (j.contains("tax")) c.tax = detail::existing_file(base_dir, j.at("tax").get<std::string>(), "tax");
    if (j.contains("reporting_brackets")) c.reporting_brackets = detail::parse_brackets(j.at("reporting_brackets"));
    if (j.contains("output_dir")) c.output_dir = base_dir / j.at("output_dir").get<std::string>();
    else c.output_dir = base_dir / "out";
    if (j.contains("simulation")) {
      const auto& s = j.at("simulation");
      detail::check_keys(s, "simulation", {"n", "dt", "horizon", "record_every", "shock_scale", "threads"});
      SimConfig sim;
      sim.n = c.n;
      if (s.contains("n")) sim.n = s.at("n").get<std::size_t>();
      if (s.contains("dt")) sim.dt = s.at("dt").get<double>();
      if (s.contains("horizon")) sim.horizon = s.at("horizon").get<double>();
      if (s.contains("record_every")) sim.record_every = s.at("record_every").get<double>();
      if (s.contains("shock_scale")) sim.shock_scale = shock_scale_from_string(s.at("shock_scale").get<std::string>());
      if (s.contains("threads")) sim.threads = s.at("threads").get<unsigned>();
      sim.report_brackets = c.reporting_brackets;
      c.simulation = sim;
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::BadConfig, std::string("config: ") + e.what());
  }
  if (c.n < 2) throw Error(ErrorCode::BadConfig, "n must be at least 2");
  if (c.simulation && c.simulation->n != c.n) {
    throw Error(ErrorCode::BadConfig, "simulation.n (" + std::to_string(c.simulation->n) + ") differs from n (" +
                                          std::to_string(c.n) + ")");
  }
  return c;
}

inline RunConfig load_run_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
  return parse_run_config(j, path.parent_path());
}

/// Command-line overrides.
struct CommandOptions {
  std::optional<int> scenario;
  std::optional<SigmaVariant> sigma;
  std::optional<std::uint64_t> seed;
  std::optional<fs::path> out;
};

/// RANKDIST_THREADS, when set, overrides the configured thread count.
inline std::optional<unsigned> threads_from_env() {
  const char* v = std::getenv("RANKDIST_THREADS");
  if (v == nullptr || *v == '\0') return std::nullopt;
  char* end = nullptr;
  const unsigned long t = std::strtoul(v, &end, 10);
  if (*end != '\0') throw Error(ErrorCode::BadConfig, "RANKDIST_THREADS must be a non-negative integer");
  return static_cast<unsigned>(t);
}

/// Inputs shared by every command after applying overrides.
struct Inputs {
  GroupedShares target;
  VolatilityTable volatility;
  TrendSpec trend;
  std::string scenario_label;
  TaxSchedule tax;
  SigmaVariant sigma;
  fs::path out;
};

inline Inputs resolve_inputs(const RunConfig& c, const CommandOptions& o) {
  Inputs in{c.data ? io::read_grouped_shares(*c.data) : us_2012_shares(),
            c.volatility ? io::read_volatility_table(*c.volatility) : default_volatility_table(),
            {},
            {},
            c.tax ? io::read_tax(*c.tax) : progressive_tax_default(),
            o.sigma.value_or(c.sigma_variant),
            o.out.value_or(c.output_dir)};
  if (o.scenario) {
    in.trend = preset_scenario(*o.scenario);
    in.scenario_label = std::to_string(*o.scenario);
  } else if (const int* id = std::get_if<int>(&c.scenario)) {
    in.trend = preset_scenario(*id);
    in.scenario_label = std::to_string(*id);
  } else {
    const auto& p = std::get<fs::path>(c.scenario);
    in.trend = io::read_trend(p);
    in.scenario_label = p.filename().string();
  }
  return in;
}

inline std::string_view sigma_name(SigmaVariant v) { return v == SigmaVariant::Low ? "low" : "high"; }

inline Calibration calibrate_inputs(const Inputs& in, std::size_t n, const RunConfig& c) {
  FitOptions opt;
  opt.breakpoints_pct = c.breakpoints_pct;
  return calibrate(in.target, in.volatility, in.sigma, n, opt);
}

inline json fit_report(const Calibration& cal, const Inputs& in, const RunConfig& c) {
  const auto fitted = group_shares(cal.shares, in.target.brackets);
  json brackets = json::array();
  for (std::size_t i = 0; i < fitted.brackets.size(); ++i) {
    brackets.push_back({{"lo_pct", fitted.brackets[i].lo_pct},
                        {"hi_pct", fitted.brackets[i].hi_pct},
                        {"target", in.target.shares[i]},
                        {"fit", fitted.shares[i]}});
  }
  return {{"n", cal.shares.n()},
          {"sigma_variant", sigma_name(in.sigma)},
          {"breakpoints_pct", c.breakpoints_pct},
          {"breakpoint_ranks", cal.fit.breakpoints},
          {"slopes", cal.fit.slopes},
          {"intercept", cal.fit.intercept},
          {"fit_error", cal.fit.fit_error},
          {"brackets", brackets}};
}

/// Ranks 1, ..., n sampled about `per_decade` times per factor of ten,
/// keeping only positive shares.
inline std::vector<std::vector<double>> loglog_rows(std::span<const double> shares, int per_decade = 40) {
  std::vector<std::vector<double>> rows;
  const std::size_t n = shares.size();
  std::size_t last = 0;
  const double top = std::log10(static_cast<double>(n));
  const int points = static_cast<int>(std::ceil(top * per_decade));
  for (int j = 0; j <= points; ++j) {
    const double e = points == 0 ? 0.0 : top * j / points;
    const auto k = std::clamp<std::size_t>(static_cast<std::size_t>(std::llround(std::pow(10.0, e))), 1, n);
    if (k == last) continue;
    last = k;
    if (shares[k - 1] > 0.0) rows.push_back({std::log10(static_cast<double>(k)), std::log10(shares[k - 1])});
  }
  return rows;
}

inline json divergence_report(const ProjectionOutcome& p, std::size_t n) {
  const std::size_t m = *p.report.m;
  return {{"m", m},
          {"m_pct", 100.0 * static_cast<double>(m) / static_cast<double>(n)},
          {"A_m", *p.a_m()},
          {"first_violation", *p.report.first_violation},
          {"unique_max", p.report.unique_max}};
}

inline void write_json(const fs::path& path, const json& j) { io::write_text_file(path, j.dump(2) + "\n"); }

inline void write_projection(const fs::path& dir, const ProjectionOutcome& p, std::size_t n) {
  io::write_grouped_shares(dir / "projection.csv", p.grouped);
  const std::string header[] = {"log10_rank", "log10_share"};
  io::write_csv(dir / "loglog.csv", header, loglog_rows(p.shares));
  std::error_code ec;
  if (p.divergent()) write_json(dir / "divergence.json", divergence_report(p, n));
  else fs::remove(dir / "divergence.json", ec);
}

inline int cmd_calibrate(const RunConfig& c, const CommandOptions& o, std::ostream& log) {
  const auto in = resolve_inputs(c, o);
  const auto cal = calibrate_inputs(in, c.n, c);
  io::write_rank_series(in.out / "alpha.csv", "alpha", cal.params.alpha());
  io::write_rank_series(in.out / "fit.csv", "share", cal.shares.shares());
  write_json(in.out / "fit_report.json", fit_report(cal, in, c));
  const auto report = check_stability(cal.params.alpha());
  if (!report.stable) {
    log << "calibrated parameters are not stable (first violating rank " << *report.first_violation << ")\n";
    return 2;
  }
  log << "calibrate: fit error " << cal.fit.fit_error << ", wrote " << in.out.string() << "\n";
  return 0;
}

inline ProjectionOutcome project_inputs(const Inputs& in, const Calibration& cal, const RunConfig& c, bool taxed) {
  auto params = apply_trend(cal.params, in.trend);
  if (taxed) params = apply_tax(params, in.tax);
  return project(params, c.reporting_brackets);
}

inline int cmd_project(const RunConfig& c, const CommandOptions& o, std::ostream& log, bool taxed = false) {
  const auto in = resolve_inputs(c, o);
  const auto cal = calibrate_inputs(in, c.n, c);
  const auto p = project_inputs(in, cal, c, taxed);
  write_projection(in.out, p, c.n);
  log << (taxed ? "tax" : "project") << ": scenario " << in.scenario_label << ", sigma " << sigma_name(in.sigma) << ", "
      << (p.divergent() ? "divergent" : "stable") << ", wrote " << in.out.string() << "\n";
  return 0;
}

inline int cmd_tax(const RunConfig& c, const CommandOptions& o, std::ostream& log) { return cmd_project(c, o, log, true); }

inline int cmd_simulate(const RunConfig& c, const CommandOptions& o, std::ostream& log) {
  if (!o.seed) throw Error(ErrorCode::BadConfig, "simulate requires --seed");
  const auto in = resolve_inputs(c, o);
  SimConfig sim = c.simulation.value_or(SimConfig{});
  if (!c.simulation) {
    sim.n = c.n;
    sim.report_brackets = c.reporting_brackets;
  }
  sim.seed = *o.seed;
  if (const auto t = threads_from_env()) sim.threads = *t;
  const auto cal = calibrate_inputs(in, sim.n, c);
  const auto params = apply_trend(cal.params, in.trend);
  const auto path = simulate_ranked(params, sim, cal.shares);

  std::vector<std::string> header{"year"};
  for (const auto& b : sim.report_brackets) header.push_back(to_string(b));
  std::vector<std::vector<double>> rows;
  for (std::size_t t = 0; t < path.times.size(); ++t) {
    std::vector<double> row{path.times[t]};
    row.insert(row.end(), path.group_shares[t].begin(), path.group_shares[t].end());
    rows.push_back(std::move(row));
  }
  io::write_csv(in.out / "path.csv", header, rows);
  log << "simulate: " << path.times.size() << " records, wrote " << in.out.string() << "\n";
  return 0;
}

inline std::string percent(double share) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(1) << 100.0 * share;
  return os.str();
}

inline std::string render_report(const Inputs& in, const Calibration& cal, const ProjectionOutcome& base,
                                 const ProjectionOutcome& taxed, const RunConfig& c) {
  std::ostringstream os;
  os << "n = " << c.n << ", sigma = " << sigma_name(in.sigma) << ", scenario " << in.scenario_label << "\n";
  os << "fit slopes " << std::fixed << std::setprecision(3) << cal.fit.slopes[0] << " " << cal.fit.slopes[1] << " "
     << cal.fit.slopes[2] << ", bracket error " << percent(cal.fit.fit_error) << "%\n\n";
  const auto fitted = bracket_sums(cal.shares.shares(), c.reporting_brackets);
  os << std::left << std::setw(14) << "bracket %" << std::right << std::setw(10) << "today" << std::setw(12)
     << "projected" << std::setw(12) << "with tax" << "\n";
  for (std::size_t i = 0; i < c.reporting_brackets.size(); ++i) {
    os << std::left << std::setw(14) << to_string(c.reporting_brackets[i]) << std::right << std::setw(10)
       << percent(fitted[i]) << std::setw(12) << percent(base.grouped.shares[i]) << std::setw(12)
       << percent(taxed.grouped.shares[i]) << "\n";
  }
  auto describe = [&](std::string_view name, const ProjectionOutcome& p) {
    if (!p.divergent()) return;
    os << "\n" << name << ": divergent, top " << *p.report.m << " ranks (" << std::setprecision(4)
       << 100.0 * static_cast<double>(*p.report.m) / static_cast<double>(c.n) << "%) take all wealth; A_m = "
       << std::setprecision(6) << *p.a_m() << ", first violating rank " << *p.report.first_violation << "\n";
  };
  describe("projected", base);
  describe("with tax", taxed);
  return os.str();
}

inline int cmd_report(const RunConfig& c, const CommandOptions& o, std::ostream& log) {
  const auto in = resolve_inputs(c, o);
  const auto cal = calibrate_inputs(in, c.n, c);
  const auto base = project_inputs(in, cal, c, false);
  const auto taxed = project_inputs(in, cal, c, true);
  const auto text = render_report(in, cal, base, taxed, c);
  io::write_text_file(in.out / "report.txt", text);
  log << text;
  return 0;
}

inline int run_command(std::string_view command, const RunConfig& c, const CommandOptions& o, std::ostream& log) {
  if (command == "calibrate") return cmd_calibrate(c, o, log);
  if (command == "project") return cmd_project(c, o, log);
  if (command == "tax") return cmd_tax(c, o, log);
  if (command == "simulate") return cmd_simulate(c, o, log);
  if (command == "report") return cmd_report(c, o, log);
  throw Error(ErrorCode::BadConfig, "unknown command '" + std::string(command) + "'");
}

}  // namespace rankdist::cli
