#pragma once

// Monte Carlo validation layer.
//
//  * simulate_gap_oracle: a single reflected gap process
//      dX = -κ dt + σ dB + dΛ,  X >= 0,
//    whose long-run mean is σ²/(2κ).
//  * simulate_ranked: n particles whose log-wealth drift and shock scale are
//    set by their current rank; ranks are recomputed by sorting every step.

#include <algorithm>
#include <atomic>
#include <barrier>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "rankdist/error.hpp"
#include "rankdist/model.hpp"
#include "rankdist/numeric.hpp"
#include "rankdist/philox.hpp"
#include "rankdist/stable_solver.hpp"

namespace rankdist {

enum class ReflectionScheme {
  /// X' = max(0, X - κ dt + σ √dt Z). Biased upward by O(σ √dt).
  Truncation,
  /// Exact transition: the step's Brownian-bridge minimum decides how much
  /// the boundary pushes, so grid values have the exact reflected law.
  BridgeMinimum,
};

struct GapOracleConfig {
  double kappa = 0.1;
  double sigma = 0.2;
  double dt = 1e-3;
  double horizon = 5e4;
  double burn_in = 1e3;
  std::uint64_t seed = 1;
  ReflectionScheme scheme = ReflectionScheme::BridgeMinimum;
};

/// Time average of the reflected gap process after burn-in.
inline double simulate_gap_oracle(const GapOracleConfig& c) {
  if (!(c.kappa > 0.0)) throw Error(ErrorCode::NonPositiveKappa, "kappa must be positive");
  if (!(c.sigma >= 0.0) || !(c.dt > 0.0) || !(c.horizon > c.burn_in) || c.burn_in < 0.0) {
    throw Error(ErrorCode::BadConfig, "gap oracle needs sigma >= 0, dt > 0 and horizon > burn_in >= 0");
  }
  const CounterRng rng(c.seed);
  const auto steps = static_cast<std::uint64_t>(std::llround(c.horizon / c.dt));
  const auto burn = static_cast<std::uint64_t>(std::llround(c.burn_in / c.dt));
  const double drift = -c.kappa * c.dt;
  const double scale = c.sigma * std::sqrt(c.dt);
  const double var = scale * scale;

  double x = 0.0;
  CompensatedSum acc;
  for (std::uint64_t s = 0; s < steps; ++s) {
    if (c.scheme == ReflectionScheme::Truncation) {
      x = std::max(0.0, x + drift + scale * rng.normal(0, s));
    } else {
      const auto [z, u] = rng.normal_and_uniform(0, s);
      const double y = drift + scale * z;
      const double path_min = 0.5 * (y - std::sqrt(y * y - 2.0 * var * std::log(u)));
      x = x + y + std::max(0.0, -(x + path_min));
    }
    if (s >= burn) acc += x;
  }
  return acc.value() / static_cast<double>(steps - burn);
}

/// How a gap volatility σ_k maps to the per-particle shock of rank k.
enum class ShockScale {
  /// δ_k = σ_k / √2: two independent neighbor shocks add up to σ_k.
  SigmaOverSqrt2,
  /// δ_k = σ_k, for sensitivity runs.
  Sigma,
};

inline std::string_view to_string(ShockScale s) {
  return s == ShockScale::Sigma ? "sigma" : "sigma_over_sqrt2";
}

inline ShockScale shock_scale_from_string(std::string_view s) {
  if (s == "sigma_over_sqrt2") return ShockScale::SigmaOverSqrt2;
  if (s == "sigma") return ShockScale::Sigma;
  throw Error(ErrorCode::BadConfig, "unknown shock_scale '" + std::string(s) + "'");
}

struct SimConfig {
  std::size_t n = 10000;
  /// Years per step.
  double dt = 0.1;
  double horizon = 100.0;
  std::uint64_t seed = 0;
  double record_every = 1.0;
  std::vector<Bracket> report_brackets = standard_brackets();
  ShockScale shock_scale = ShockScale::SigmaOverSqrt2;
  /// Worker threads, 0 = hardware concurrency. Results do not depend on it.
  unsigned threads = 1;
};

inline void validate(const SimConfig& c) {
  if (c.n < 2) throw Error(ErrorCode::BadConfig, "simulation needs n >= 2");
  if (!(c.dt > 0.0)) throw Error(ErrorCode::BadConfig, "dt must be positive");
  if (!(c.record_every > 0.0) || !(c.horizon >= c.record_every)) {
    throw Error(ErrorCode::BadConfig, "need horizon >= record_every > 0");
  }
  for (const auto& b : c.report_brackets) (void)bracket_to_ranks(b, c.n);
}

struct SimulationPath {
  std::vector<double> times;
  /// group_shares[t][b]: share of report bracket b at times[t].
  std::vector<std::vector<double>> group_shares;
  std::vector<double> final_shares;
  /// Time-averaged log gap below each rank over all steps, length n-1.
  std::vector<double> rank_gap_averages;
};

namespace detail {

// Least-squares projection of z onto non-increasing sequences (pool adjacent
// violators). Applied to free-flight positions this is the sticky-collision
// flow of rank-attached velocities: particles that would cross merge and
// share their ranks' drift equally.
inline void project_non_increasing(std::span<double> z) {
  struct Block {
    double sum;
    std::size_t count;
  };
  std::vector<Block> blocks;
  blocks.reserve(64);
  for (double v : z) {
    blocks.push_back({v, 1});
    while (blocks.size() > 1) {
      const auto& hi = blocks[blocks.size() - 2];
      const auto& lo = blocks.back();
      if (lo.sum * static_cast<double>(hi.count) <= hi.sum * static_cast<double>(lo.count)) break;
      const Block merged{hi.sum + lo.sum, hi.count + lo.count};
      blocks.pop_back();
      blocks.back() = merged;
    }
  }
  if (blocks.size() == z.size()) return;
  std::size_t k = 0;
  for (const auto& b : blocks) {
    const double mean = b.sum / static_cast<double>(b.count);
    for (std::size_t j = 0; j < b.count; ++j) z[k++] = mean;
  }
}

// Re-sorts `order` by (value descending, id ascending). Insertion sort is
// linear on nearly sorted input; heavily shuffled input falls back to
// std::sort. Both produce the same unique order.
inline void rerank(std::vector<std::uint32_t>& order, std::span<const double> x) {
  struct Key {
    double value;
    std::uint32_t id;
  };
  auto before = [](const Key& a, const Key& b) { return a.value > b.value || (a.value == b.value && a.id < b.id); };
  std::vector<Key> keys(order.size());
  for (std::size_t r = 0; r < order.size(); ++r) keys[r] = {x[order[r]], order[r]};
  const std::size_t budget = 4 * keys.size() + 1024;
  std::size_t moves = 0;
  bool sorted = true;
  for (std::size_t i = 1; i < keys.size() && sorted; ++i) {
    const Key k = keys[i];
    std::size_t j = i;
    while (j > 0 && before(k, keys[j - 1])) {
      keys[j] = keys[j - 1];
      --j;
      if (++moves > budget) {
        sorted = false;
        break;
      }
    }
    keys[j] = k;
  }
  if (!sorted) std::sort(keys.begin(), keys.end(), before);
  for (std::size_t r = 0; r < order.size(); ++r) order[r] = keys[r].id;
}

inline std::vector<double> shares_in_rank_order(std::span<const std::uint32_t> order, std::span<const double> x) {
  std::vector<double> s(order.size());
  const double top = x[order[0]];
  CompensatedSum total;
  for (std::size_t r = 0; r < order.size(); ++r) {
    s[r] = std::exp(x[order[r]] - top);
    total += s[r];
  }
  const double z = total.value();
  if (!std::isfinite(z)) throw Error(ErrorCode::Overflow, "log-wealth is no longer finite");
  for (double& v : s) v /= z;
  return s;
}

}  // namespace detail

/// Ranked-particle simulation of the rank-based model. Particle i starts at
/// rank i+1 with log share log(initial[i]).
///
/// Each step of length dt:
///  1. drift: free flight x + α_rank dt, projected back onto ordered
///     positions (colliding particles stick and share their drift);
///  2. shock: x += δ_rank √dt Z with Z keyed by (seed, particle, step),
///     computed per particle id so thread chunks never change a draw;
///  3. re-rank by log-wealth, ties broken by particle id.
/// Common growth cancels in shares, so α is economy-relative and need not
/// sum to zero.
inline SimulationPath simulate_ranked(const RankParameters& params, const SimConfig& config,
                                      const RankedShares& initial) {
  validate(config);
  const std::size_t n = config.n;
  if (params.n() != n || initial.n() != n) {
    throw Error(ErrorCode::DimensionMismatch, "parameters, initial shares and config disagree on n");
  }
  if (n > std::size_t{0xFFFFFFFFu}) throw Error(ErrorCode::BadConfig, "too many particles");

  const auto steps = static_cast<std::uint64_t>(std::llround(config.horizon / config.dt));
  const auto stride = std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::llround(config.record_every / config.dt)));
  const double sqrt_dt = std::sqrt(config.dt);
  const double shock_factor = config.shock_scale == ShockScale::Sigma ? 1.0 : 1.0 / std::sqrt(2.0);

  std::vector<double> drift(n);
  std::vector<double> shock(n);
  for (std::size_t r = 0; r < n; ++r) {
    drift[r] = params.alpha()[r] * config.dt;
    shock[r] = params.sigma()[std::min(r, n - 2)] * shock_factor * sqrt_dt;
  }

  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = std::log(initial[i]);
  std::vector<std::uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0u);
  std::vector<std::uint32_t> rank_of(order);
  std::vector<double> ranked(n);
  std::vector<double> gap_sum(n - 1, 0.0);

  SimulationPath path;
  auto record = [&](std::uint64_t step) {
    const auto s = detail::shares_in_rank_order(order, x);
    path.times.push_back(static_cast<double>(step) * config.dt);
    path.group_shares.push_back(bracket_sums(s, config.report_brackets));
  };
  record(0);

  const CounterRng rng(config.seed);
  unsigned threads = config.threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : config.threads;
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));

  std::barrier sync(static_cast<std::ptrdiff_t>(threads));
  std::atomic<bool> failed{false};
  std::exception_ptr error;

  auto serial_drift = [&] {
    for (std::size_t r = 0; r < n; ++r) ranked[r] = x[order[r]] + drift[r];
    detail::project_non_increasing(ranked);
    for (std::size_t r = 0; r < n; ++r) x[order[r]] = ranked[r];
  };
  auto serial_rerank = [&](std::uint64_t step) {
    detail::rerank(order, x);
    for (std::size_t r = 0; r < n; ++r) rank_of[order[r]] = static_cast<std::uint32_t>(r);
    for (std::size_t k = 0; k + 1 < n; ++k) gap_sum[k] += x[order[k]] - x[order[k + 1]];
    if (step % stride == 0) record(step);
  };

  auto worker = [&](unsigned t) {
    // even-aligned particle-id chunk
    const std::size_t lo = (n * t / threads) & ~std::size_t{1};
    const std::size_t hi = t + 1 == threads ? n : (n * (t + 1) / threads) & ~std::size_t{1};
    for (std::uint64_t step = 1; step <= steps; ++step) {
      if (t == 0 && !failed) {
        try {
          serial_drift();
        } catch (...) {
          error = std::current_exception();
          failed = true;
        }
      }
      sync.arrive_and_wait();
      if (failed) return;
      // Particles 2j and 2j+1 share one generator block.
      for (std::size_t p = lo; p < hi; p += 2) {
        const auto z = rng.normal_pair(p / 2, step);
        x[p] += shock[rank_of[p]] * z.first;
        if (p + 1 < hi) x[p + 1] += shock[rank_of[p + 1]] * z.second;
      }
      sync.arrive_and_wait();
      if (t == 0) {
        try {
          serial_rerank(step);
        } catch (...) {
          error = std::current_exception();
          failed = true;
        }
      }
    }
  };

  {
    std::vector<std::jthread> pool;
    for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker, t);
    worker(0);
  }
  if (error) std::rethrow_exception(error);

  path.final_shares = detail::shares_in_rank_order(order, x);
  path.rank_gap_averages.resize(n - 1);
  for (std::size_t k = 0; k + 1 < n; ++k) {
    path.rank_gap_averages[k] = steps == 0 ? 0.0 : gap_sum[k] / static_cast<double>(steps);
  }
  return path;
}

struct GapReport {
  std::vector<double> relative_errors;
  double median = 0.0;
  double p90 = 0.0;
  double max = 0.0;
};

/// |empirical - predicted| / predicted per rank over the first `ranks` gaps
/// (all gaps when `ranks` is 0).
inline GapReport gap_average_report(std::span<const double> empirical, const StableGaps& predicted,
                                    std::size_t ranks = 0) {
  if (empirical.size() != predicted.gaps.size()) {
    throw Error(ErrorCode::DimensionMismatch, "empirical and predicted gaps differ in length");
  }
  const std::size_t m = ranks == 0 ? empirical.size() : std::min(ranks, empirical.size());
  GapReport rep;
  rep.relative_errors.resize(m);
  for (std::size_t k = 0; k < m; ++k) {
    rep.relative_errors[k] = std::fabs(empirical[k] - predicted.gaps[k]) / predicted.gaps[k];
  }
  if (m == 0) return rep;
  auto sorted = rep.relative_errors;
  std::sort(sorted.begin(), sorted.end());
  auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(m - 1);
    const auto i = static_cast<std::size_t>(pos);
    const double frac = pos - static_cast<double>(i);
    return i + 1 < m ? sorted[i] * (1.0 - frac) + sorted[i + 1] * frac : sorted[i];
  };
  rep.median = quantile(0.5);
  rep.p90 = quantile(0.9);
  rep.max = sorted.back();
  return rep;
}

inline GapReport gap_average_report(const SimulationPath& path, const StableGaps& predicted, std::size_t ranks = 0) {
  return gap_average_report(path.rank_gap_averages, predicted, ranks);
}

}  // namespace rankdist
