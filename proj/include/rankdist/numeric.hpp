#pragma once

#include <cmath>
#include <span>
#include <vector>

namespace rankdist {

/// Neumaier's variant of Kahan summation. Accurate to a few ulps of the
/// result even when terms of very different magnitude cancel, which matters
/// for prefix sums over 10^6 ranks.
class CompensatedSum {
 public:
  CompensatedSum& operator+=(double x) noexcept {
    const double t = sum_ + x;
    if (std::fabs(sum_) >= std::fabs(x)) {
      carry_ += (sum_ - t) + x;
    } else {
      carry_ += (x - t) + sum_;
    }
    sum_ = t;
    return *this;
  }

  double value() const noexcept { return sum_ + carry_; }

 private:
  double sum_ = 0.0;
  double carry_ = 0.0;
};

inline double compensated_sum(std::span<const double> xs) noexcept {
  CompensatedSum acc;
  for (double x : xs) acc += x;
  return acc.value();
}

/// out[k] = xs[0] + ... + xs[k], single left-to-right compensated pass.
inline std::vector<double> prefix_sums(std::span<const double> xs) {
  std::vector<double> out(xs.size());
  CompensatedSum acc;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    acc += xs[k];
    out[k] = acc.value();
  }
  return out;
}

}  // namespace rankdist
