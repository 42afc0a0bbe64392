#pragma once

// Domain types shared by every rankdist module.
//
// Ranks are 1-indexed in the public vocabulary (rank 1 = wealthiest
// household) and 0-indexed in storage: shares()[k] is the share of rank k+1.
// Percent brackets are counted from the top, so (0, 0.01) is the top 0.01%.

#include <algorithm>
#include <cmath>
#include <limits>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rankdist/error.hpp"
#include "rankdist/numeric.hpp"

namespace rankdist {

inline constexpr double kIngestTolerance = 1e-6;
inline constexpr double kInternalTolerance = 1e-9;

/// Half-open percent-rank interval [lo_pct, hi_pct) counted from the top.
struct Bracket {
  double lo_pct = 0.0;
  double hi_pct = 100.0;

  friend bool operator==(const Bracket&, const Bracket&) = default;
};

/// Inclusive 1-indexed rank range, first..last.
struct RankRange {
  std::size_t first = 1;
  std::size_t last = 0;

  std::size_t size() const noexcept { return last >= first ? last - first + 1 : 0; }
  std::size_t begin_index() const noexcept { return first - 1; }
  std::size_t end_index() const noexcept { return last; }
  bool contains(std::size_t rank) const noexcept { return rank >= first && rank <= last; }

  friend bool operator==(const RankRange&, const RankRange&) = default;
};

inline std::string to_string(const Bracket& b) {
  auto fmt = [](double v) {
    std::string s = std::to_string(v);
    s.erase(s.find_last_not_of('0') + 1);
    if (!s.empty() && s.back() == '.') s.pop_back();
    return s;
  };
  return fmt(b.lo_pct) + "-" + fmt(b.hi_pct);
}

namespace detail {

inline void check_bracket_shape(const Bracket& b) {
  if (!std::isfinite(b.lo_pct) || !std::isfinite(b.hi_pct) || b.lo_pct < 0.0 ||
      b.hi_pct > 100.0 || !(b.lo_pct < b.hi_pct)) {
    throw Error(ErrorCode::BadBrackets, "bracket " + to_string(b) + " is not a valid percent interval");
  }
}

inline std::size_t integer_rank(double pct, std::size_t n, const Bracket& b) {
  const double x = pct * static_cast<double>(n) / 100.0;
  const double r = std::round(x);
  if (std::fabs(x - r) > 1e-9 * std::max(1.0, std::fabs(x))) {
    throw Error(ErrorCode::NonIntegerBoundary,
                "bracket " + to_string(b) + " does not land on integer ranks for n = " + std::to_string(n));
  }
  return static_cast<std::size_t>(r);
}

// Brackets must tile [0, 100) in order.
inline void check_partition(std::span<const Bracket> brackets) {
  if (brackets.empty()) throw Error(ErrorCode::BracketGap, "no brackets");
  double expected = 0.0;
  for (const auto& b : brackets) {
    check_bracket_shape(b);
    if (std::fabs(b.lo_pct - expected) > 1e-12) {
      throw Error(ErrorCode::BracketGap, "bracket " + to_string(b) + " does not start where the previous one ended (" +
                                             std::to_string(expected) + ")");
    }
    expected = b.hi_pct;
  }
  if (std::fabs(expected - 100.0) > 1e-12) {
    throw Error(ErrorCode::BracketGap, "brackets do not reach 100");
  }
}

// Brackets inside [0, 100] that do not overlap; gaps allowed.
inline void check_disjoint(std::span<const Bracket> brackets) {
  std::vector<Bracket> sorted(brackets.begin(), brackets.end());
  for (const auto& b : sorted) check_bracket_shape(b);
  std::sort(sorted.begin(), sorted.end(), [](const Bracket& a, const Bracket& b) { return a.lo_pct < b.lo_pct; });
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    if (sorted[i].lo_pct < sorted[i - 1].hi_pct - 1e-12) {
      throw Error(ErrorCode::BracketGap, "brackets " + to_string(sorted[i - 1]) + " and " + to_string(sorted[i]) + " overlap");
    }
  }
}

}  // namespace detail

/// Maps a percent bracket onto the ranks it covers: [ceil(lo*n/100)+1, ceil(hi*n/100)].
/// Both boundaries must land on integer ranks for `n`.
inline RankRange bracket_to_ranks(const Bracket& bracket, std::size_t n) {
  detail::check_bracket_shape(bracket);
  if (n == 0) throw Error(ErrorCode::BadConfig, "n must be positive");
  const std::size_t lo = detail::integer_rank(bracket.lo_pct, n, bracket);
  const std::size_t hi = detail::integer_rank(bracket.hi_pct, n, bracket);
  return RankRange{lo + 1, hi};
}

/// Full descending vector of wealth shares, strictly positive, summing to 1.
class RankedShares {
 public:
  std::size_t n() const noexcept { return shares_.size(); }
  std::span<const double> shares() const noexcept { return shares_; }
  double operator[](std::size_t k) const noexcept { return shares_[k]; }
  /// Share of 1-indexed rank.
  double at_rank(std::size_t rank) const { return shares_.at(rank - 1); }

  friend RankedShares make_ranked_shares(std::vector<double> values, double tolerance);

 private:
  explicit RankedShares(std::vector<double> v) : shares_(std::move(v)) {}
  std::vector<double> shares_;
};

/// Validates and, when the sum is off by at most `tolerance`, renormalizes.
inline RankedShares make_ranked_shares(std::vector<double> values, double tolerance = kIngestTolerance) {
  if (values.empty()) throw Error(ErrorCode::NonPositiveShare, "empty share vector");
  for (std::size_t k = 0; k < values.size(); ++k) {
    if (!(values[k] > 0.0) || !std::isfinite(values[k])) {
      throw Error(ErrorCode::NonPositiveShare, "share of rank " + std::to_string(k + 1) + " is not positive", k + 1);
    }
    if (k > 0 && values[k] > values[k - 1]) {
      throw Error(ErrorCode::NotDescending, "share of rank " + std::to_string(k + 1) + " exceeds rank " + std::to_string(k),
                  k + 1);
    }
  }
  const double total = compensated_sum(values);
  if (std::fabs(total - 1.0) > tolerance) {
    throw Error(ErrorCode::BadNormalization, "shares sum to " + std::to_string(total));
  }
  // Skip sub-ulp rescaling so that re-validating accepted shares is a no-op.
  if (std::fabs(total - 1.0) > 4.0 * std::numeric_limits<double>::epsilon()) {
    for (double& v : values) v /= total;
  }
  return RankedShares(std::move(values));
}

/// Per-rank relative growth rates alpha (n entries, 1/year) and gap
/// volatilities sigma (n-1 entries, 1/sqrt(year)). kappa is derived on demand.
///
/// Parameters produced by calibration sum to zero. Trend and tax adjustments
/// yield "unbalanced" parameters whose sum is not zero; see `balanced()`.
class RankParameters {
 public:
  /// Strict constructor: alpha must sum to zero.
  static RankParameters make(std::vector<double> alpha, std::vector<double> sigma);
  /// Relaxed constructor for adjusted (disequilibrium) rates.
  static RankParameters unbalanced(std::vector<double> alpha, std::vector<double> sigma);

  std::size_t n() const noexcept { return alpha_.size(); }
  std::span<const double> alpha() const noexcept { return alpha_; }
  std::span<const double> sigma() const noexcept { return sigma_; }

  /// kappa[k] = -2 (alpha[0] + ... + alpha[k]), k = 0..n-2.
  std::vector<double> kappa() const {
    auto p = prefix_sums(alpha_);
    std::vector<double> out(n() - 1);
    for (std::size_t k = 0; k + 1 < n(); ++k) out[k] = -2.0 * p[k];
    return out;
  }

  double alpha_sum() const { return compensated_sum(alpha_); }
  bool balanced() const;

 private:
  RankParameters(std::vector<double> a, std::vector<double> s) : alpha_(std::move(a)), sigma_(std::move(s)) {}
  static void check_shapes(std::span<const double> alpha, std::span<const double> sigma);

  std::vector<double> alpha_;
  std::vector<double> sigma_;
};

/// Absolute tolerance used for "alpha sums to zero": 1e-9, scaled by the L1
/// norm of alpha when that exceeds one (the bottom rank's alpha is O(10^4)
/// at n = 10^6).
inline double alpha_sum_tolerance(std::span<const double> alpha) {
  double l1 = 0.0;
  for (double a : alpha) l1 += std::fabs(a);
  return kInternalTolerance * std::max(1.0, l1);
}

inline void check_alpha_sum(std::span<const double> alpha) {
  const double s = compensated_sum(alpha);
  if (!(std::fabs(s) <= alpha_sum_tolerance(alpha))) {
    throw Error(ErrorCode::BadAlphaSum, "alpha sums to " + std::to_string(s) + ", expected 0");
  }
}

inline void RankParameters::check_shapes(std::span<const double> alpha, std::span<const double> sigma) {
  if (alpha.empty()) throw Error(ErrorCode::DimensionMismatch, "alpha is empty");
  if (sigma.size() + 1 != alpha.size()) {
    throw Error(ErrorCode::DimensionMismatch, "sigma must have n-1 = " + std::to_string(alpha.size() - 1) +
                                                  " entries, got " + std::to_string(sigma.size()));
  }
  for (std::size_t k = 0; k < alpha.size(); ++k) {
    if (!std::isfinite(alpha[k])) throw Error(ErrorCode::BadAlphaSum, "alpha is not finite", k + 1);
  }
  for (std::size_t k = 0; k < sigma.size(); ++k) {
    if (!(sigma[k] > 0.0) || !std::isfinite(sigma[k])) {
      throw Error(ErrorCode::BadSigma, "sigma of gap " + std::to_string(k + 1) + " is not positive", k + 1);
    }
  }
}

inline RankParameters RankParameters::make(std::vector<double> alpha, std::vector<double> sigma) {
  check_shapes(alpha, sigma);
  check_alpha_sum(alpha);
  return RankParameters(std::move(alpha), std::move(sigma));
}

inline RankParameters RankParameters::unbalanced(std::vector<double> alpha, std::vector<double> sigma) {
  check_shapes(alpha, sigma);
  return RankParameters(std::move(alpha), std::move(sigma));
}

inline bool RankParameters::balanced() const {
  return std::fabs(alpha_sum()) <= alpha_sum_tolerance(alpha_);
}

/// Bracket-level shares; brackets tile [0, 100).
struct GroupedShares {
  std::vector<Bracket> brackets;
  std::vector<double> shares;
};

inline GroupedShares make_grouped_shares(std::vector<Bracket> brackets, std::vector<double> shares,
                                         double tolerance = kIngestTolerance) {
  detail::check_partition(brackets);
  if (brackets.size() != shares.size()) {
    throw Error(ErrorCode::DimensionMismatch, "one share per bracket expected");
  }
  for (std::size_t i = 0; i < shares.size(); ++i) {
    if (!(shares[i] >= 0.0) || !std::isfinite(shares[i])) {
      throw Error(ErrorCode::BadSum, "share of bracket " + to_string(brackets[i]) + " is negative");
    }
  }
  const double total = compensated_sum(shares);
  if (std::fabs(total - 1.0) > tolerance) {
    throw Error(ErrorCode::BadSum, "grouped shares sum to " + std::to_string(total));
  }
  return GroupedShares{std::move(brackets), std::move(shares)};
}

/// Sums of `shares` over each bracket's rank range. No partition requirement.
inline std::vector<double> bracket_sums(std::span<const double> shares, std::span<const Bracket> brackets) {
  std::vector<double> out;
  out.reserve(brackets.size());
  for (const auto& b : brackets) {
    const auto r = bracket_to_ranks(b, shares.size());
    out.push_back(compensated_sum(shares.subspan(r.begin_index(), r.size())));
  }
  return out;
}

inline GroupedShares group_shares(std::span<const double> shares, std::vector<Bracket> brackets) {
  auto sums = bracket_sums(shares, brackets);
  return make_grouped_shares(std::move(brackets), std::move(sums), kInternalTolerance);
}

inline GroupedShares group_shares(const RankedShares& shares, std::vector<Bracket> brackets) {
  return group_shares(shares.shares(), std::move(brackets));
}

enum class SigmaVariant { Low, High };

/// Bracket-level gap volatilities with low and high estimates.
struct VolatilityTable {
  std::vector<Bracket> brackets;
  std::vector<double> sigma_low;
  std::vector<double> sigma_high;

  std::span<const double> values(SigmaVariant v) const { return v == SigmaVariant::Low ? sigma_low : sigma_high; }
};

inline VolatilityTable make_volatility_table(std::vector<Bracket> brackets, std::vector<double> low,
                                             std::vector<double> high) {
  detail::check_partition(brackets);
  if (low.size() != brackets.size() || high.size() != brackets.size()) {
    throw Error(ErrorCode::DimensionMismatch, "one low and one high volatility per bracket expected");
  }
  for (std::size_t i = 0; i < brackets.size(); ++i) {
    if (!(low[i] > 0.0) || !(high[i] > 0.0)) {
      throw Error(ErrorCode::BadSigma, "volatility of bracket " + to_string(brackets[i]) + " is not positive");
    }
  }
  return VolatilityTable{std::move(brackets), std::move(low), std::move(high)};
}

/// One percent bracket with an attached per-year rate.
struct BracketRate {
  Bracket bracket;
  double rate = 0.0;

  friend bool operator==(const BracketRate&, const BracketRate&) = default;
};

/// Observed annual log-share growth per bracket; uncovered ranks get 0.
struct TrendSpec {
  std::vector<BracketRate> entries;
};

/// Annual capital tax rate per bracket; uncovered ranks are untaxed.
struct TaxSchedule {
  std::vector<BracketRate> entries;
};

inline TrendSpec make_trend(std::vector<BracketRate> entries) {
  std::vector<Bracket> bs;
  for (const auto& e : entries) {
    if (!std::isfinite(e.rate)) throw Error(ErrorCode::BadConfig, "trend growth is not finite");
    bs.push_back(e.bracket);
  }
  detail::check_disjoint(bs);
  return TrendSpec{std::move(entries)};
}

inline TaxSchedule make_tax(std::vector<BracketRate> entries) {
  std::vector<Bracket> bs;
  for (const auto& e : entries) {
    if (!(e.rate >= 0.0) || !std::isfinite(e.rate)) {
      throw Error(ErrorCode::NegativeInput, "tax rate of bracket " + to_string(e.bracket) + " is negative");
    }
    bs.push_back(e.bracket);
  }
  detail::check_disjoint(bs);
  return TaxSchedule{std::move(entries)};
}

/// Expands bracket rates to a per-rank vector of length n (0 where uncovered).
inline std::vector<double> per_rank_rates(std::span<const BracketRate> entries, std::size_t n) {
  std::vector<double> out(n, 0.0);
  for (const auto& e : entries) {
    const auto r = bracket_to_ranks(e.bracket, n);
    for (std::size_t k = r.begin_index(); k < r.end_index(); ++k) out[k] += e.rate;
  }
  return out;
}

/// Outcome of the stability test on a vector of relative growth rates.
struct StabilityReport {
  bool stable = true;
  /// First 1-indexed rank k whose prefix sum alpha_1 + ... + alpha_k is >= 0.
  std::optional<std::size_t> first_violation;
  /// Size of the divergent top group (1-indexed count), only when unstable.
  std::optional<std::size_t> m;
  /// Running averages A_k = (alpha_1 + ... + alpha_k) / k, k = 1..n (only when unstable).
  std::vector<double> A;
  bool unique_max = true;
};

/// Default reporting brackets: 0-0.01, 0.01-0.1, 0.1-0.5, 0.5-1, 1-10, 10-100.
inline std::vector<Bracket> standard_brackets() {
  return {{0.0, 0.01}, {0.01, 0.1}, {0.1, 0.5}, {0.5, 1.0}, {1.0, 10.0}, {10.0, 100.0}};
}

}  // namespace rankdist
