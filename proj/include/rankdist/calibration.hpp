#pragma once

// Calibration: per-gap volatilities from bracket tables, a three-segment
// piecewise-Pareto fill-in of grouped shares, and inversion to α.

#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "rankdist/error.hpp"
#include "rankdist/model.hpp"
#include "rankdist/nelder_mead.hpp"
#include "rankdist/numeric.hpp"
#include "rankdist/stable_solver.hpp"

namespace rankdist {

/// Low and high volatility estimates by percent rank.
inline VolatilityTable default_volatility_table() {
  return make_volatility_table({{0, 10}, {10, 20}, {20, 40}, {40, 60}, {60, 100}},
                               {0.283, 0.283, 0.283, 0.283, 0.283},
                               {0.286, 0.294, 0.316, 0.392, 1.662});
}

/// Gap volatility from an idiosyncratic investment-return s.d. and the s.d. of
/// labor income minus consumption relative to wealth: sqrt(2 (a² + b²)).
inline double combined_volatility(double investment_sd, double labor_rel_sd) {
  if (investment_sd < 0.0 || labor_rel_sd < 0.0) {
    throw Error(ErrorCode::NegativeInput, "volatility components must be nonnegative");
  }
  return std::sqrt(2.0 * (investment_sd * investment_sd + labor_rel_sd * labor_rel_sd));
}

/// Builds a table whose low column ignores the labor component.
inline VolatilityTable volatility_from_components(double investment_sd, std::vector<Bracket> brackets,
                                                  std::span<const double> labor_rel_sd) {
  if (labor_rel_sd.size() != brackets.size()) {
    throw Error(ErrorCode::DimensionMismatch, "one labor volatility per bracket expected");
  }
  std::vector<double> low;
  std::vector<double> high;
  for (double l : labor_rel_sd) {
    low.push_back(combined_volatility(investment_sd, 0.0));
    high.push_back(combined_volatility(investment_sd, l));
  }
  return make_volatility_table(std::move(brackets), std::move(low), std::move(high));
}

/// Per-gap σ: gap k (between ranks k and k+1) takes the value of the bracket
/// containing rank k.
inline std::vector<double> expand_sigma(const VolatilityTable& table, std::size_t n, SigmaVariant variant) {
  if (n < 2) throw Error(ErrorCode::BadConfig, "need at least two ranks");
  const auto values = table.values(variant);
  std::vector<double> sigma(n - 1, 0.0);
  for (std::size_t i = 0; i < table.brackets.size(); ++i) {
    const auto r = bracket_to_ranks(table.brackets[i], n);
    for (std::size_t k = r.begin_index(); k < std::min(r.end_index(), n - 1); ++k) sigma[k] = values[i];
  }
  return sigma;
}

/// Three connected log-log lines. Ranks 1..b1 follow slope[0], b1+1..b2
/// slope[1], b2+1..n slope[2]; the gap below rank k uses the slope of the
/// segment that contains k, so log θ is continuous with kinks at b1+1, b2+1.
struct PiecewiseLogLogFit {
  /// b0 = 1 < b1 < b2 < b3 = n.
  std::array<std::size_t, 4> breakpoints{};
  std::array<double, 3> slopes{};
  /// log θ(1) of the normalized fit.
  double intercept = 0.0;
  /// Sum of absolute bracket deviations between fit and target.
  double fit_error = 0.0;
};

struct FitResult {
  RankedShares shares;
  PiecewiseLogLogFit fit;
};

struct FitOptions {
  /// Interior knees in percent of population from the top.
  std::array<double, 2> breakpoints_pct{0.01, 10.0};
  std::size_t max_restarts = 200;
  /// A restart that improves the objective by less than this ends the search.
  double improvement_tolerance = 1e-10;
};

/// Σ_{k=a}^{b} k^s for 1 <= a <= b. Direct summation over the first terms,
/// Euler-Maclaurin with three Bernoulli corrections for the tail.
inline double power_sum(std::size_t a, std::size_t b, double s) {
  if (a > b) return 0.0;
  constexpr std::size_t kDirect = 64;
  CompensatedSum acc;
  std::size_t k = a;
  for (; k <= b && k < a + kDirect; ++k) acc += std::pow(static_cast<double>(k), s);
  if (k > b) return acc.value();

  const double x0 = static_cast<double>(k);
  const double x1 = static_cast<double>(b);
  const double t = s + 1.0;
  const double log_ratio = std::log(x1 / x0);
  const double integral =
      std::fabs(t) * log_ratio < 1e-300 ? log_ratio : std::pow(x0, t) * std::expm1(t * log_ratio) / t;
  auto f = [s](double x) { return std::pow(x, s); };
  auto d1 = [s](double x) { return s * std::pow(x, s - 1.0); };
  auto d3 = [s](double x) { return s * (s - 1.0) * (s - 2.0) * std::pow(x, s - 3.0); };
  auto d5 = [s](double x) { return s * (s - 1.0) * (s - 2.0) * (s - 3.0) * (s - 4.0) * std::pow(x, s - 5.0); };
  acc += integral;
  acc += 0.5 * (f(x0) + f(x1));
  acc += (d1(x1) - d1(x0)) / 12.0;
  acc += -(d3(x1) - d3(x0)) / 720.0;
  acc += (d5(x1) - d5(x0)) / 30240.0;
  return acc.value();
}

namespace detail {

struct SegmentLayout {
  std::size_t n = 0;
  std::size_t b1 = 0;
  std::size_t b2 = 0;
};

inline SegmentLayout segment_layout(std::size_t n, const std::array<double, 2>& pct) {
  const Bracket outer{pct[0], pct[1]};
  if (!(pct[0] > 0.0 && pct[0] < pct[1] && pct[1] < 100.0)) {
    throw Error(ErrorCode::BadConfig, "breakpoints must satisfy 0 < b1 < b2 < 100 percent");
  }
  const auto r = bracket_to_ranks(outer, n);
  SegmentLayout s{n, r.first - 1, r.last};
  if (s.b1 < 1 || s.b2 <= s.b1 || s.b2 >= n) {
    throw Error(ErrorCode::BadConfig, "breakpoints must map to ranks 1 <= b1 < b2 < n");
  }
  return s;
}

// Unnormalized log-level offsets: on segment j, log θ(k) = offset[j] + s_j log k,
// with θ(1) = 1.
inline std::array<double, 3> segment_offsets(const SegmentLayout& L, const std::array<double, 3>& s) {
  const double k1 = std::log(static_cast<double>(L.b1 + 1));
  const double k2 = std::log(static_cast<double>(L.b2 + 1));
  std::array<double, 3> c{};
  c[0] = 0.0;
  c[1] = c[0] + (s[0] - s[1]) * k1;
  c[2] = c[1] + (s[1] - s[2]) * k2;
  return c;
}

inline std::array<RankRange, 3> segment_ranges(const SegmentLayout& L) {
  return {RankRange{1, L.b1}, RankRange{L.b1 + 1, L.b2}, RankRange{L.b2 + 1, L.n}};
}

// Predicted normalized bracket shares without materializing n values.
inline std::vector<double> predicted_bracket_shares(const SegmentLayout& L, const std::array<double, 3>& s,
                                                    std::span<const RankRange> bracket_ranges) {
  const auto c = segment_offsets(L, s);
  const auto seg = segment_ranges(L);
  std::vector<double> sums(bracket_ranges.size());
  double total = 0.0;
  for (std::size_t i = 0; i < bracket_ranges.size(); ++i) {
    double v = 0.0;
    for (std::size_t j = 0; j < 3; ++j) {
      const std::size_t a = std::max(bracket_ranges[i].first, seg[j].first);
      const std::size_t b = std::min(bracket_ranges[i].last, seg[j].last);
      if (a <= b) v += std::exp(c[j]) * power_sum(a, b, s[j]);
    }
    sums[i] = v;
    total += v;
  }
  for (double& v : sums) v /= total;
  return sums;
}

inline std::vector<double> materialize(const SegmentLayout& L, const std::array<double, 3>& s) {
  const auto c = segment_offsets(L, s);
  const auto seg = segment_ranges(L);
  std::vector<double> out(L.n);
  CompensatedSum total;
  for (std::size_t j = 0; j < 3; ++j) {
    for (std::size_t k = seg[j].first; k <= seg[j].last; ++k) {
      out[k - 1] = std::exp(c[j] + s[j] * std::log(static_cast<double>(k)));
      total += out[k - 1];
    }
  }
  const double z = total.value();
  for (double& v : out) v /= z;
  return out;
}

}  // namespace detail

/// Fills in a full ranked distribution from grouped shares with three
/// connected log-log segments, minimizing the total absolute bracket error.
inline FitResult fit_piecewise_pareto(const GroupedShares& target, std::size_t n, const FitOptions& opt = {}) {
  const auto layout = detail::segment_layout(n, opt.breakpoints_pct);
  std::vector<RankRange> ranges;
  for (const auto& b : target.brackets) ranges.push_back(bracket_to_ranks(b, n));

  // A descending distribution has non-increasing per-household bracket means.
  for (std::size_t i = 1; i < ranges.size(); ++i) {
    const double prev = target.shares[i - 1] / static_cast<double>(ranges[i - 1].size());
    const double cur = target.shares[i] / static_cast<double>(ranges[i].size());
    if (cur > prev * (1.0 + 1e-9)) {
      throw Error(ErrorCode::InfeasibleTarget,
                  "bracket " + to_string(target.brackets[i]) + " has a higher mean share than the bracket above it");
    }
  }

  auto objective = [&](const std::array<double, 3>& raw) {
    std::array<double, 3> s{};
    double penalty = 0.0;
    for (std::size_t j = 0; j < 3; ++j) {
      s[j] = std::min(raw[j], 0.0);
      penalty += std::max(raw[j], 0.0);
    }
    const auto pred = detail::predicted_bracket_shares(layout, s, ranges);
    double err = penalty;
    for (std::size_t i = 0; i < pred.size(); ++i) err += std::fabs(pred[i] - target.shares[i]);
    return err;
  };

  NelderMeadOptions nm;
  nm.max_evaluations = 4000;
  nm.f_tolerance = 1e-13;
  nm.x_tolerance = 1e-9;

  const std::array<double, 4> starts{-0.25, -0.5, -1.0, -2.0};
  std::array<double, 3> best_x{};
  double best_f = std::numeric_limits<double>::infinity();
  bool any_converged = false;
  std::size_t restarts = 0;
  for (double s0 : starts) {
    std::array<double, 3> x{s0, s0, s0};
    std::array<double, 3> step{0.1, 0.1, 0.1};
    double fx = std::numeric_limits<double>::infinity();
    while (restarts < opt.max_restarts) {
      ++restarts;
      const auto r = nelder_mead(objective, x, step, nm);
      any_converged = any_converged || r.converged;
      const double improvement = fx - r.value;
      if (r.value < fx) {
        x = r.x;
        fx = r.value;
      }
      if (!(improvement >= opt.improvement_tolerance)) break;
      step = {0.02, 0.02, 0.02};
    }
    // Lowest objective wins; earlier starts win ties.
    if (fx < best_f) {
      best_f = fx;
      best_x = x;
    }
  }
  if (!any_converged || !std::isfinite(best_f)) {
    throw Error(ErrorCode::FitFailed, "simplex search did not converge");
  }

  std::array<double, 3> slopes{};
  for (std::size_t j = 0; j < 3; ++j) slopes[j] = std::min(best_x[j], 0.0);
  // Flat segments come out as tiny negative slopes; snap them when harmless.
  for (std::size_t j = 0; j < 3; ++j) {
    if (slopes[j] != 0.0 && std::fabs(slopes[j]) < 1e-6) {
      auto trial = slopes;
      trial[j] = 0.0;
      if (objective(trial) <= objective(slopes) + 1e-9) slopes = trial;
    }
  }

  auto values = detail::materialize(layout, slopes);
  auto shares = make_ranked_shares(std::move(values), kInternalTolerance);
  const auto grouped = bracket_sums(shares.shares(), target.brackets);
  double err = 0.0;
  for (std::size_t i = 0; i < grouped.size(); ++i) err += std::fabs(grouped[i] - target.shares[i]);

  PiecewiseLogLogFit fit;
  fit.breakpoints = {1, layout.b1, layout.b2, n};
  fit.slopes = slopes;
  fit.intercept = std::log(shares[0]);
  fit.fit_error = err;
  return FitResult{std::move(shares), fit};
}

struct Calibration {
  RankParameters params;
  RankedShares shares;
  PiecewiseLogLogFit fit;
};

/// Grouped data + volatility table -> balanced rank parameters whose stable
/// distribution is the piecewise-Pareto fill-in of the data.
inline Calibration calibrate(const GroupedShares& target, const VolatilityTable& table, SigmaVariant variant,
                             std::size_t n, const FitOptions& opt = {}) {
  auto fitted = fit_piecewise_pareto(target, n, opt);
  auto sigma = expand_sigma(table, n, variant);
  auto params = alpha_from_shares(fitted.shares, sigma);
  return Calibration{std::move(params), std::move(fitted.shares), fitted.fit};
}

}  // namespace rankdist
