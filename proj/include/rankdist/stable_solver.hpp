#pragma once

// Closed-form stable distribution of the rank-based model and its inverse.
//
// The stable log-gap between ranks k and k+1 is
//
//     log θ(k) - log θ(k+1) = σ_k² / (-4 (α_1 + ... + α_k)),
//
// which exists iff every proper prefix sum of α is negative. The reported
// distribution is the point estimate whose realized log-gaps equal these
// time averages.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "rankdist/error.hpp"
#include "rankdist/model.hpp"
#include "rankdist/numeric.hpp"

namespace rankdist {

/// Expected log-gaps between adjacent ranks; gaps[k] is the gap below rank k+1.
struct StableGaps {
  std::vector<double> gaps;

  std::size_t n() const noexcept { return gaps.size() + 1; }
};

/// κ_k = -2 (α_1 + ... + α_k) for k = 1..n-1.
inline std::vector<double> kappa_from_alpha(std::span<const double> alpha) {
  check_alpha_sum(alpha);
  const auto p = prefix_sums(alpha);
  std::vector<double> kappa(alpha.empty() ? 0 : alpha.size() - 1);
  for (std::size_t k = 0; k < kappa.size(); ++k) kappa[k] = -2.0 * p[k];
  return kappa;
}

namespace detail {

// First 1-indexed k < n whose prefix sum is >= 0, or 0 when all are negative.
inline std::size_t first_nonnegative_prefix(std::span<const double> prefix) {
  for (std::size_t k = 0; k + 1 < prefix.size(); ++k) {
    if (!(prefix[k] < 0.0)) return k + 1;
  }
  return 0;
}

inline std::vector<double> gaps_from_prefix(std::span<const double> prefix, std::span<const double> sigma) {
  std::vector<double> gaps(sigma.size());
  for (std::size_t k = 0; k < gaps.size(); ++k) gaps[k] = sigma[k] * sigma[k] / (-4.0 * prefix[k]);
  return gaps;
}

}  // namespace detail

/// Forward solve. Throws Unstable carrying the first violating rank.
inline StableGaps stable_gaps(const RankParameters& params) {
  const auto p = prefix_sums(params.alpha());
  if (const auto bad = detail::first_nonnegative_prefix(p); bad != 0) {
    throw Error(ErrorCode::Unstable,
                "alpha_1 + ... + alpha_" + std::to_string(bad) + " = " + std::to_string(p[bad - 1]) + " is not negative",
                bad);
  }
  return StableGaps{detail::gaps_from_prefix(p, params.sigma())};
}

/// θ(k) ∝ exp(-(gaps[0] + ... + gaps[k-2])), normalized. Shares too small
/// for a double are floored at the smallest positive subnormal.
inline RankedShares shares_from_gaps(const StableGaps& g) {
  const std::size_t n = g.n();
  std::vector<double> log_share(n);
  CompensatedSum acc;
  log_share[0] = 0.0;
  for (std::size_t k = 0; k + 1 < n; ++k) {
    if (!(g.gaps[k] >= 0.0) || !std::isfinite(g.gaps[k])) {
      throw Error(ErrorCode::BadConfig, "gap " + std::to_string(k + 1) + " is negative or not finite", k + 1);
    }
    acc += -g.gaps[k];
    log_share[k + 1] = acc.value();
  }
  std::vector<double> shares(n);
  CompensatedSum total;
  for (std::size_t k = 0; k < n; ++k) {
    shares[k] = std::exp(log_share[k]);
    total += shares[k];
  }
  const double z = total.value();
  for (double& s : shares) s = std::max(s / z, std::numeric_limits<double>::denorm_min());
  return make_ranked_shares(std::move(shares), kInternalTolerance);
}

/// Inverse solve: given a strictly descending distribution and gap
/// volatilities, returns the balanced α that makes it the stable one.
inline RankParameters alpha_from_shares(const RankedShares& shares, std::span<const double> sigma) {
  const std::size_t n = shares.n();
  if (sigma.size() + 1 != n) {
    throw Error(ErrorCode::DimensionMismatch, "sigma must have n-1 entries");
  }
  for (std::size_t k = 0; k < sigma.size(); ++k) {
    if (!(sigma[k] > 0.0) || !std::isfinite(sigma[k])) {
      throw Error(ErrorCode::BadSigma, "sigma of gap " + std::to_string(k + 1) + " is not positive", k + 1);
    }
  }
  std::vector<double> prefix(n - 1);
  for (std::size_t k = 0; k + 1 < n; ++k) {
    const double gap = std::log1p((shares[k] - shares[k + 1]) / shares[k + 1]);
    if (!(gap > 0.0)) {
      throw Error(ErrorCode::TiedShares, "ranks " + std::to_string(k + 1) + " and " + std::to_string(k + 2) + " are tied",
                  k + 1);
    }
    prefix[k] = -sigma[k] * sigma[k] / (4.0 * gap);
  }
  std::vector<double> alpha(n);
  CompensatedSum acc;
  // Difference against the running sum of the stored α rather than the exact
  // prefix, so rounding of each α_k does not accumulate in later prefixes.
  for (std::size_t k = 0; k + 1 < n; ++k) {
    alpha[k] = prefix[k] - acc.value();
    acc += alpha[k];
  }
  alpha[n - 1] = -acc.value();
  return RankParameters::make(std::move(alpha), std::vector<double>(sigma.begin(), sigma.end()));
}

namespace detail {

inline StabilityReport stability_of(std::span<const double> alpha) {
  StabilityReport report;
  const auto p = prefix_sums(alpha);
  if (const auto bad = first_nonnegative_prefix(p); bad != 0) {
    report.stable = false;
    report.first_violation = bad;
  }
  if (report.stable) return report;

  const std::size_t n = alpha.size();
  report.A.resize(n);
  for (std::size_t k = 0; k < n; ++k) report.A[k] = p[k] / static_cast<double>(k + 1);
  const double best = *std::max_element(report.A.begin(), report.A.end());
  const double tie = 1e-12 * std::max(1.0, std::fabs(best));
  std::size_t m = 0;
  std::size_t ties = 0;
  for (std::size_t k = 0; k < n; ++k) {
    if (best - report.A[k] <= tie) {
      if (ties == 0) m = k + 1;
      ++ties;
    }
  }
  report.m = m;
  report.unique_max = ties == 1;
  return report;
}

}  // namespace detail

/// Stable iff every proper prefix sum of α is negative. Otherwise reports
/// the running averages A_k and the divergent group size m = argmax A_k
/// (smallest index among ties; `unique_max` is false when ties exist).
inline StabilityReport check_stability(std::span<const double> alpha) {
  check_alpha_sum(alpha);
  return detail::stability_of(alpha);
}

/// Internal stable distribution of a divergent top group of m ranks.
///
/// Within the group, growth rates are measured relative to the group's own
/// wealth: α'_k = α_k - A_m, which sums to zero over the group. This is our
/// reading of "relative to the growth of the group's total wealth"; it keeps
/// σ_1..σ_{m-1} unchanged. The group eventually holds all wealth, so the
/// returned shares are also the limit shares of ranks 1..m in the economy.
inline RankedShares top_group_stable(const RankParameters& params, std::size_t m) {
  const auto alpha = params.alpha();
  const auto p = prefix_sums(alpha);
  if (m == 0 || m > params.n()) {
    throw Error(ErrorCode::BadConfig, "group size " + std::to_string(m) + " out of range");
  }
  if (detail::first_nonnegative_prefix(p) == 0) {
    throw Error(ErrorCode::NotDivergent, "parameters admit a stable distribution");
  }
  if (m == 1) return make_ranked_shares({1.0}, kInternalTolerance);

  const double a_m = p[m - 1] / static_cast<double>(m);
  std::vector<double> prefix(m);
  for (std::size_t k = 0; k < m; ++k) prefix[k] = p[k] - static_cast<double>(k + 1) * a_m;
  if (const auto bad = detail::first_nonnegative_prefix(prefix); bad != 0) {
    throw Error(ErrorCode::GroupUnstable,
                "group-relative prefix sum at rank " + std::to_string(bad) + " is not negative", bad);
  }
  const auto sigma = params.sigma().first(m - 1);
  return shares_from_gaps(StableGaps{detail::gaps_from_prefix(prefix, sigma)});
}

}  // namespace rankdist
