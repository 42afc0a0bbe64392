// Acceptance gate: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "rankdist/calibration.hpp"
#include "rankdist/io.hpp"
#include "rankdist/scenario.hpp"
#include "rankdist/simulator.hpp"

using namespace rankdist;

namespace {

using Clock = std::chrono::steady_clock;
using Row = std::array<double, 6>;

int failures = 0;

void verdict(int id, bool ok, const std::string& detail) {
  std::printf("%s criterion %d: %s\n", ok ? "PASS" : "FAIL", id, detail.c_str());
  std::fflush(stdout);
  failures += ok ? 0 : 1;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

GroupedShares us_2012() { return make_grouped_shares(standard_brackets(), {0.111, 0.108, 0.124, 0.072, 0.357, 0.228}); }

// Largest per-bracket deviation in percentage points.
double max_pp(const GroupedShares& g, const Row& pct) {
  double worst = 0.0;
  for (std::size_t i = 0; i < 6; ++i) worst = std::max(worst, std::fabs(100.0 * g.shares[i] - pct[i]));
  return worst;
}

void criterion1() {
  std::mt19937_64 rng(1);
  const auto t0 = Clock::now();
  double worst = 0.0;
  int count = 0;
  for (std::size_t n : {3u, 10u, 1000u}) {
    for (int trial = 0; trial < 100; ++trial) {
      std::uniform_real_distribution<double> step(0.01, 0.5), sig(0.05, 2.0);
      std::vector<double> log_share(n, 0.0);
      for (std::size_t k = 1; k < n; ++k) log_share[k] = log_share[k - 1] - step(rng);
      std::vector<double> s(n);
      double z = 0.0;
      for (std::size_t k = 0; k < n; ++k) z += s[k] = std::exp(log_share[k]);
      for (double& v : s) v /= z;
      std::vector<double> sigma(n - 1);
      for (double& v : sigma) v = sig(rng);
      const auto shares = make_ranked_shares(s);
      const auto back = shares_from_gaps(stable_gaps(alpha_from_shares(shares, sigma)));
      for (std::size_t k = 0; k < n; ++k) worst = std::max(worst, std::fabs(back[k] / s[k] - 1.0));
      ++count;
    }
  }
  const double t = seconds_since(t0);
  verdict(1, worst <= 1e-10 && t < 1.0,
          fmt("round trip over %d vectors, max relative error %.3g (tol 1e-10), %.3f s (limit 1 s)", count, worst, t));
}

void criterion2() {
  const std::size_t n = 1000;
  const double a = -0.015, sigma = 0.3;
  std::vector<double> alpha(n, a);
  alpha[n - 1] = -a * static_cast<double>(n - 1);
  const auto shares = shares_from_gaps(stable_gaps(RankParameters::make(alpha, std::vector<double>(n - 1, sigma))));
  const double expected = sigma * sigma / (4.0 * std::fabs(a));
  double worst = 0.0;
  for (std::size_t k = 1; k < n; ++k) {
    const double scaled = static_cast<double>(k) * (std::log(shares[k - 1]) - std::log(shares[k]));
    worst = std::max(worst, std::fabs(scaled / expected - 1.0));
  }
  verdict(2, worst <= 1e-6,
          fmt("Gibrat system n=%zu: k * log gap constant at %.6g, max relative deviation %.3g (tol 1e-6)", n, expected,
              worst));
}

struct Calibrated {
  Calibration low;
  Calibration high;
};

Calibrated criterion3() {
  const auto t0 = Clock::now();
  auto low = calibrate(us_2012(), default_volatility_table(), SigmaVariant::Low, 1000000);
  const double t = seconds_since(t0);
  auto high = alpha_from_shares(low.shares, expand_sigma(default_volatility_table(), 1000000, SigmaVariant::High));
  const auto& f = low.fit;
  verdict(3, f.fit_error <= 0.0075 && t < 30.0,
          fmt("fit n=1e6 slopes (%.4f, %.4f, %.4f), fit error %.6f (limit 0.0075), %.1f s (limit 30 s)", f.slopes[0],
              f.slopes[1], f.slopes[2], f.fit_error, t));
  return {low, Calibration{std::move(high), low.shares, low.fit}};
}

ProjectionOutcome run(const Calibration& cal, int scenario, bool taxed) {
  auto p = apply_trend(cal.params, preset_scenario(scenario));
  if (taxed) p = apply_tax(p, progressive_tax_default());
  return project(p, standard_brackets());
}

void compare_tables(int id, const Calibrated& c, std::initializer_list<int> scenarios, bool taxed,
                    const std::vector<std::pair<Row, Row>>& paper, double tol) {
  double worst = 0.0;
  std::string detail;
  std::size_t i = 0;
  for (int s : scenarios) {
    const auto& [low, high] = paper[i++];
    const double dl = max_pp(run(c.low, s, taxed).grouped, low);
    const double dh = max_pp(run(c.high, s, taxed).grouped, high);
    worst = std::max({worst, dl, dh});
    detail += fmt("%sscenario %d low %.2f pp, high %.2f pp", detail.empty() ? "" : "; ", s, dl, dh);
  }
  verdict(id, worst <= tol, detail + fmt(" (tol %.1f pp)", tol));
}

void criterion6(const Calibrated& c) {
  bool ok = true;
  std::string detail;
  for (const auto* cal : {&c.low, &c.high}) {
    const auto p = run(*cal, 4, false);
    const std::size_t m = p.report.m.value_or(0);
    ok = ok && p.divergent() && m == 100 && p.grouped.shares[0] == 1.0;
    detail += fmt("%s%s sigma: %s, m=%zu, top 0.01%% share %.17g", detail.empty() ? "" : "; ",
                  cal == &c.low ? "low" : "high", p.divergent() ? "divergent" : "stable", m, p.grouped.shares[0]);
  }
  verdict(6, ok, detail);
}

void criterion8() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  std::uint64_t seed = 8000;
  for (double kappa : {0.05, 0.1, 0.5}) {
    for (double sigma : {0.1, 0.2, 0.4}) {
      GapOracleConfig g;
      g.kappa = kappa;
      g.sigma = sigma;
      g.dt = 1e-3;
      g.horizon = 5e4;
      g.burn_in = 1e3;
      g.seed = ++seed;
      const double err = std::fabs(simulate_gap_oracle(g) / (sigma * sigma / (2.0 * kappa)) - 1.0);
      worst = std::max(worst, err);
    }
  }
  const double t = seconds_since(t0);
  verdict(8, worst < 0.05 && t < 60.0,
          fmt("3x3 oracle grid, worst relative error %.4f (tol 0.05), %.1f s (limit 60 s)", worst, t));
}

void criterion9() {
  const std::size_t n = 10000;
  const auto cal = calibrate(us_2012(), default_volatility_table(), SigmaVariant::Low, n);
  SimConfig cfg;
  cfg.n = n;
  cfg.dt = 0.1;
  cfg.horizon = 5000;
  cfg.record_every = 50;
  cfg.seed = 42;
  const auto t0 = Clock::now();
  const auto path = simulate_ranked(cal.params, cfg, cal.shares);
  const double t = seconds_since(t0);
  const auto rep = gap_average_report(path, stable_gaps(cal.params), 100);
  verdict(9, rep.median < 0.10 && t < 300.0,
          fmt("n=1e4, 5000 years: ranks 1-100 median relative gap error %.4f (tol 0.10), p90 %.4f, %.1f s (limit 300 s)",
              rep.median, rep.p90, t));
}

std::string path_csv(const SimulationPath& p) {
  std::vector<std::vector<double>> rows;
  for (std::size_t t = 0; t < p.times.size(); ++t) {
    std::vector<double> r{p.times[t]};
    r.insert(r.end(), p.group_shares[t].begin(), p.group_shares[t].end());
    rows.push_back(std::move(r));
  }
  const std::vector<std::string> header(rows.empty() ? 0 : rows[0].size(), "c");
  std::ostringstream os;
  io::write_csv(os, header, rows);
  for (double v : p.final_shares) os << io::format_number(v) << '\n';
  return os.str();
}

void criterion10() {
  const std::size_t n = 100000;
  const auto cal = calibrate(us_2012(), default_volatility_table(), SigmaVariant::Low, n);
  SimConfig cfg;
  cfg.n = n;
  cfg.dt = 0.1;
  cfg.horizon = 260;
  cfg.seed = 42;
  const auto path = simulate_ranked(apply_trend(cal.params, preset_scenario(4)), cfg, cal.shares);
  double c40 = -1, c80 = -1;
  int run = 0, longest = 0;
  for (std::size_t t = 0; t < path.times.size(); ++t) {
    const double s = path.group_shares[t][0];
    if (c40 < 0 && s >= 0.4) c40 = path.times[t];
    if (c80 < 0 && s >= 0.8) c80 = path.times[t];
    run = t > 0 && s < path.group_shares[t - 1][0] ? run + 1 : 0;
    longest = std::max(longest, run);
  }
  const bool ok = c40 >= 60 && c40 <= 120 && c80 >= 150 && c80 <= 250 && longest >= 2;
  verdict(10, ok,
          fmt("n=1e5 scenario 4, seed 42: top 0.01%% crosses 40%% at year %g (window 60-120), 80%% at year %g "
              "(window 150-250), longest decrease %d years (need >= 2)",
              c40, c80, longest));
}

void criterion11(const Calibrated& c) {
  const auto t0 = Clock::now();
  const auto shares = shares_from_gaps(stable_gaps(c.low.params));
  const auto grouped = group_shares(shares.shares(), standard_brackets());
  const double t = seconds_since(t0);

  const std::size_t n = 100000;
  const auto cal = calibrate(us_2012(), default_volatility_table(), SigmaVariant::Low, n);
  const auto params = apply_trend(cal.params, preset_scenario(4));
  SimConfig cfg;
  cfg.n = n;
  cfg.horizon = 20;
  cfg.seed = 42;
  bool same = true;
  std::string ref;
  for (unsigned threads : {1u, 2u, 4u}) {
    cfg.threads = threads;
    const auto text = path_csv(simulate_ranked(params, cfg, cal.shares));
    if (ref.empty()) ref = text;
    same = same && text == ref;
  }
  verdict(11, t < 1.0 && same && std::fabs(grouped.shares[0] - 0.111) < 0.003,
          fmt("forward solve + grouping n=1e6 in %.3f s (limit 1 s); simulate output byte-identical at 1, 2, 4 threads: "
              "%s",
              t, same ? "yes" : "no"));
}

}  // namespace

int main() {
  try {
    criterion1();
    criterion2();
    const auto cal = criterion3();
    {
      double worst = 0.0;
      const Row table{11.1, 10.8, 12.4, 7.2, 35.7, 22.8};
      for (const auto* c : {&cal.low, &cal.high}) worst = std::max(worst, max_pp(run(*c, 1, false).grouped, table));
      verdict(4, worst <= 0.3, fmt("scenario 1 low and high sigma, max deviation %.3f pp (tol 0.3 pp)", worst));
    }
    compare_tables(5, cal, {2, 3}, false,
                   {{{36.8, 7.9, 8.2, 4.7, 23.4, 19.0}, {35.9, 8.1, 8.5, 4.9, 24.2, 18.5}},
                    {{87.9, 2.0, 1.5, 0.8, 3.9, 3.9}, {85.9, 2.3, 1.8, 1.0, 4.8, 4.2}}},
                   1.5);
    criterion6(cal);
    compare_tables(7, cal, {1, 2, 3, 4}, true,
                   {{{1.5, 4.0, 8.4, 6.7, 44.9, 34.6}, {1.5, 4.1, 8.4, 6.8, 45.0, 34.2}},
                    {{1.8, 3.8, 7.7, 6.2, 41.0, 39.6}, {1.9, 3.9, 7.9, 6.3, 42.0, 37.9}},
                    {{2.4, 3.9, 7.2, 5.7, 37.6, 43.3}, {2.5, 4.1, 7.6, 6.0, 39.2, 40.7}},
                    {{14.6, 3.8, 6.0, 4.7, 30.5, 40.5}, {14.8, 4.0, 6.4, 4.9, 32.3, 37.5}}},
                   1.5);
    criterion8();
    criterion9();
    criterion10();
    criterion11(cal);
  } catch (const std::exception& e) {
    std::printf("FAIL acceptance aborted: %s\n", e.what());
    return 1;
  }
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
