#pragma once

// Trend and tax adjustments to rank-based growth rates, and projection of
// the adjusted rates to a future stable (or divergent) distribution.

#include <algorithm>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rankdist/error.hpp"
#include "rankdist/model.hpp"
#include "rankdist/numeric.hpp"
#include "rankdist/stable_solver.hpp"

namespace rankdist {

/// α'_k = α_k + g(bracket of k). A group whose share grows at rate g has its
/// households' relative growth understated by g. The result is unbalanced.
inline RankParameters apply_trend(const RankParameters& params, const TrendSpec& trend) {
  const auto shift = per_rank_rates(trend.entries, params.n());
  std::vector<double> alpha(params.alpha().begin(), params.alpha().end());
  for (std::size_t k = 0; k < alpha.size(); ++k) alpha[k] += shift[k];
  return RankParameters::unbalanced(std::move(alpha), {params.sigma().begin(), params.sigma().end()});
}

/// α'_k = α_k - τ(bracket of k): a capital tax of τ lowers the taxed
/// households' growth by τ. Revenue is not redistributed; σ is unchanged.
inline RankParameters apply_tax(const RankParameters& params, const TaxSchedule& tax) {
  const auto rate = per_rank_rates(tax.entries, params.n());
  std::vector<double> alpha(params.alpha().begin(), params.alpha().end());
  for (std::size_t k = 0; k < alpha.size(); ++k) alpha[k] -= rate[k];
  return RankParameters::unbalanced(std::move(alpha), {params.sigma().begin(), params.sigma().end()});
}

/// Subtracts the mean so the rates sum to zero.
inline std::vector<double> recenter(std::span<const double> alpha) {
  std::vector<double> out(alpha.begin(), alpha.end());
  if (out.empty()) return out;
  const double mean = compensated_sum(alpha) / static_cast<double>(alpha.size());
  for (double& a : out) a -= mean;
  out.back() -= compensated_sum(out);
  return out;
}

/// Restores α_1 + ... + α_n = 0 by redefining the bottom rank,
/// α_n = -(α_1 + ... + α_{n-1}). Ranks above n keep their adjusted rates, so
/// stability and the stable gaps are unchanged by this closure.
inline std::vector<double> rebalance_bottom_rank(std::span<const double> alpha) {
  std::vector<double> out(alpha.begin(), alpha.end());
  if (out.empty()) return out;
  out.back() = -compensated_sum(alpha.first(alpha.size() - 1));
  return out;
}

enum class OutcomeKind { Stable, Divergent };

struct ProjectionOutcome {
  OutcomeKind kind = OutcomeKind::Stable;
  /// Full distribution, or the limit distribution (top group, zeros below).
  std::vector<double> shares;
  StabilityReport report;
  GroupedShares grouped;

  bool divergent() const noexcept { return kind == OutcomeKind::Divergent; }
  /// A_m of the divergent group.
  std::optional<double> a_m() const {
    if (!report.m) return std::nullopt;
    return report.A[*report.m - 1];
  }
};

/// Future stable distribution implied by (possibly adjusted) rates, or the
/// divergence analysis and the top group's internal limit distribution.
inline ProjectionOutcome project(const RankParameters& params, std::vector<Bracket> reporting_brackets) {
  const auto balanced = RankParameters::make(rebalance_bottom_rank(params.alpha()),
                                             {params.sigma().begin(), params.sigma().end()});
  ProjectionOutcome out;
  out.report = check_stability(balanced.alpha());
  if (out.report.stable) {
    auto shares = shares_from_gaps(stable_gaps(balanced));
    out.shares.assign(shares.shares().begin(), shares.shares().end());
  } else {
    out.kind = OutcomeKind::Divergent;
    const auto group = top_group_stable(balanced, *out.report.m);
    out.shares.assign(balanced.n(), 0.0);
    std::copy(group.shares().begin(), group.shares().end(), out.shares.begin());
  }
  auto sums = bracket_sums(out.shares, reporting_brackets);
  if (out.divergent()) {
    // A bracket holding the whole top group holds all wealth in the limit.
    for (std::size_t i = 0; i < sums.size(); ++i) {
      const auto r = bracket_to_ranks(reporting_brackets[i], balanced.n());
      if (r.first == 1 && r.last >= *out.report.m) sums[i] = 1.0;
    }
  }
  out.grouped = make_grouped_shares(std::move(reporting_brackets), std::move(sums), kInternalTolerance);
  return out;
}

/// Trend presets: 1 = stable baseline; 2-4 = rising top shares of increasing
/// speed with a shrinking bottom 90%.
inline TrendSpec preset_scenario(int id) {
  switch (id) {
    case 1:
      return TrendSpec{};
    case 2:
      return make_trend({{{0, 0.01}, 0.01}, {{10, 100}, -0.005}});
    case 3:
      return make_trend({{{0, 0.01}, 0.015}, {{0.01, 0.1}, 0.005}, {{10, 100}, -0.01}});
    case 4:
      return make_trend({{{0, 0.01}, 0.03}, {{0.01, 0.1}, 0.01}, {{10, 100}, -0.015}});
    default:
      throw Error(ErrorCode::UnknownScenario, "scenario " + std::to_string(id) + " is not one of 1..4");
  }
}

/// 2% on the top 0.5%, 1% on the next 0.5%, nothing below.
inline TaxSchedule progressive_tax_default() {
  return make_tax({{{0, 0.5}, 0.02}, {{0.5, 1}, 0.01}});
}

}  // namespace rankdist
